#pragma once

#include <nfseer/error.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <compare>
#include <string>
#include <string_view>

namespace nfseer {

// Ordinal linguistic rating. Base levels are encoded 1..7 (VLo..EHi); the
// minus/plus modifiers shift the encoding by half a step, so "Nom+" sits
// midway between Nom and Hi.
enum class RatingBase { VLo = 1, Low, Nom, Hi, VHi, XHi, EHi };
enum class RatingModifier { minus = -1, none = 0, plus = 1 };

struct RatingLevel {
  RatingBase base = RatingBase::Nom;
  RatingModifier modifier = RatingModifier::none;

  constexpr double ordinal() const noexcept {
    return static_cast<double>(static_cast<int>(base)) + 0.5 * static_cast<int>(modifier);
  }

  friend constexpr bool operator==(const RatingLevel&, const RatingLevel&) = default;
  friend constexpr std::partial_ordering operator<=>(const RatingLevel& lhs, const RatingLevel& rhs) {
    return lhs.ordinal() <=> rhs.ordinal();
  }
};

inline constexpr std::array<std::string_view, 7> kRatingBaseNames{"VLo", "Low", "Nom", "Hi",
                                                                  "VHi", "XHi", "EHi"};

inline constexpr double rating_to_ordinal(RatingLevel level) noexcept { return level.ordinal(); }

inline std::string to_string(RatingLevel level) {
  std::string out{kRatingBaseNames[static_cast<int>(level.base) - 1]};
  if (level.modifier == RatingModifier::minus) out += '-';
  if (level.modifier == RatingModifier::plus) out += '+';
  return out;
}

namespace detail {

inline std::string lower_ascii(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

inline std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  return text;
}

}  // namespace detail

/// Parses a rating token. Accepts the table spellings ("VLo-", "Nom+", "Hi"),
/// long forms ("Nominal", "High") and the PROMISE abbreviations ("vl", "l",
/// "n", "h", "vh", "xh"), case-insensitively. The Unicode minus sign is
/// accepted as a modifier.
inline RatingLevel parse_rating(std::string_view token) {
  std::string_view body = detail::trim(token);
  RatingModifier modifier = RatingModifier::none;
  constexpr std::string_view kUnicodeMinus = "\xE2\x88\x92";
  if (body.ends_with(kUnicodeMinus)) {
    modifier = RatingModifier::minus;
    body.remove_suffix(kUnicodeMinus.size());
  } else if (body.ends_with('-')) {
    modifier = RatingModifier::minus;
    body.remove_suffix(1);
  } else if (body.ends_with('+')) {
    modifier = RatingModifier::plus;
    body.remove_suffix(1);
  }
  const std::string key = detail::lower_ascii(detail::trim(body));

  struct Alias {
    std::string_view name;
    RatingBase base;
  };
  static constexpr std::array<Alias, 24> kAliases{{
      {"vlo", RatingBase::VLo},     {"vl", RatingBase::VLo},      {"verylow", RatingBase::VLo},
      {"low", RatingBase::Low},     {"lo", RatingBase::Low},      {"l", RatingBase::Low},
      {"nom", RatingBase::Nom},     {"nominal", RatingBase::Nom}, {"n", RatingBase::Nom},
      {"hi", RatingBase::Hi},       {"high", RatingBase::Hi},     {"h", RatingBase::Hi},
      {"vhi", RatingBase::VHi},     {"vh", RatingBase::VHi},      {"veryhigh", RatingBase::VHi},
      {"xhi", RatingBase::XHi},     {"xh", RatingBase::XHi},      {"extrahigh", RatingBase::XHi},
      {"ehi", RatingBase::EHi},     {"eh", RatingBase::EHi},      {"extremelyhigh", RatingBase::EHi},
      {"vhigh", RatingBase::VHi},   {"xhigh", RatingBase::XHi},   {"vlow", RatingBase::VLo},
  }};
  for (const auto& alias : kAliases) {
    if (alias.name == key) return RatingLevel{alias.base, modifier};
  }
  throw ParseError("unparseable rating token '" + std::string(token) + "'");
}

/// Nearest representable level (half-step grid) for an ordinal in [0.5, 7.5].
inline RatingLevel rating_from_ordinal(double ordinal) {
  if (!std::isfinite(ordinal) || ordinal < 0.5 || ordinal > 7.5) {
    throw DomainError("rating ordinal " + std::to_string(ordinal) + " outside [0.5, 7.5]");
  }
  const int halves = static_cast<int>(std::lround(ordinal * 2.0));
  int base = halves / 2;
  int rest = halves % 2;
  RatingModifier modifier = RatingModifier::none;
  if (rest == 1) {
    // x.5 is written as the plus form of the lower base, except below VLo.
    if (base == 0) {
      base = 1;
      modifier = RatingModifier::minus;
    } else {
      modifier = RatingModifier::plus;
    }
  }
  return RatingLevel{static_cast<RatingBase>(base), modifier};
}

}  // namespace nfseer
