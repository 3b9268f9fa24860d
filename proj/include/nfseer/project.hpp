#pragma once

#include <nfseer/rating.hpp>

#include <map>
#include <optional>
#include <string>

namespace nfseer {

enum class DevelopmentMode { embedded, organic, semidetached, unknown };

inline std::string to_string(DevelopmentMode mode) {
  switch (mode) {
    case DevelopmentMode::embedded: return "embedded";
    case DevelopmentMode::organic: return "organic";
    case DevelopmentMode::semidetached: return "semidetached";
    case DevelopmentMode::unknown: break;
  }
  return "unknown";
}

inline DevelopmentMode parse_mode(std::string_view text) {
  const std::string key = detail::lower_ascii(detail::trim(text));
  if (key == "embedded" || key == "e") return DevelopmentMode::embedded;
  if (key == "organic" || key == "o") return DevelopmentMode::organic;
  if (key == "semidetached" || key == "semi-detached" || key == "s") return DevelopmentMode::semidetached;
  if (key.empty() || key == "unknown" || key == "?") return DevelopmentMode::unknown;
  throw ParseError("unknown development mode '" + std::string(text) + "'");
}

/// One software project with SEER-SEM parameter ratings.
struct ProjectRecord {
  std::string id;
  std::string source;
  DevelopmentMode mode = DevelopmentMode::unknown;
  double size_kloc = 0.0;
  double actual_effort_pm = 0.0;
  std::map<std::string, RatingLevel> ratings;
  std::optional<double> staffing_complexity;

  friend bool operator==(const ProjectRecord&, const ProjectRecord&) = default;
};

/// One project rated with COCOMO (81 or II) drivers.
struct CocomoRecord {
  std::string id;
  std::string source;
  DevelopmentMode mode = DevelopmentMode::unknown;
  double size_kloc = 0.0;
  double actual_effort_pm = 0.0;
  std::map<std::string, RatingLevel> drivers;
};

}  // namespace nfseer
