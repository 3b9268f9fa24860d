#pragma once

// SEER-SEM effort path:
//   Cte = Ctb / prod(m_i)
//   K   = D^staffing_exponent * (Se / Cte)^size_exponent     (person-years)
//   E   = 0.393469 * K                                       (person-years)

#include <nfseer/error.hpp>

#include <cmath>
#include <map>
#include <string>

namespace nfseer {

/// Development share of lifecycle effort.
inline constexpr double kDevelopmentFraction = 0.393469;

struct SeerConstants {
  double staffing_exponent = 0.4;
  double size_exponent = 1.2;
  double months_per_year = 12.0;
  double default_ctb = 1.0;
  double default_d = 1.0;

  friend bool operator==(const SeerConstants&, const SeerConstants&) = default;
};

struct SeerInputs {
  double se = 1.0;   // effective size, KLOC
  double d = 1.0;    // staffing complexity
  double cte = 1.0;  // effective technology
  double ctb = 1.0;  // basic technology constant
};

struct EffortEstimate {
  double k_person_years = 0.0;
  double e_person_years = 0.0;
  double e_person_months = 0.0;
};

namespace detail {
inline bool positive(double v) { return std::isfinite(v) && v > 0.0; }
}  // namespace detail

inline void validate(const SeerConstants& k) {
  if (!detail::positive(k.staffing_exponent) || !detail::positive(k.size_exponent) ||
      !detail::positive(k.months_per_year) || !detail::positive(k.default_ctb) || !detail::positive(k.default_d)) {
    throw DomainError("SEER-SEM constants must all be positive");
  }
}

inline double effective_technology(double ctb, const std::map<std::string, double>& multipliers) {
  if (!detail::positive(ctb)) throw DomainError("ctb must be positive");
  double product = 1.0;
  for (const auto& [name, m] : multipliers) {
    if (!detail::positive(m)) throw DomainError("multiplier " + name + " must be positive");
    product *= m;
  }
  return ctb / product;
}

inline double lifecycle_effort(const SeerInputs& in, const SeerConstants& k = {}) {
  if (!detail::positive(in.se) || !detail::positive(in.d) || !detail::positive(in.cte) ||
      !detail::positive(in.ctb)) {
    throw DomainError("SEER-SEM inputs must be strictly positive");
  }
  return std::pow(in.d, k.staffing_exponent) * std::pow(in.se / in.cte, k.size_exponent);
}

inline EffortEstimate development_effort(double k_person_years, const SeerConstants& k = {}) {
  if (!detail::positive(k_person_years)) throw DomainError("lifecycle effort must be positive");
  const double e = kDevelopmentFraction * k_person_years;
  return {k_person_years, e, k.months_per_year * e};
}

}  // namespace nfseer
