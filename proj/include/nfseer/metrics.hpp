#pragma once

#include <nfseer/error.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace nfseer {

struct MetricSet {
  double mmre = 0.0;
  double mdmre = 0.0;
  double pred30 = 0.0;  // fraction in [0, 1]
  double pred50 = 0.0;
  double mse = 0.0;
  std::size_t n = 0;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

/// |actual - predicted| / actual
inline double mre(double actual, double predicted) {
  if (!(std::isfinite(actual) && actual > 0.0)) throw DomainError("MRE needs a positive actual value");
  if (!std::isfinite(predicted)) throw DomainError("MRE needs a finite prediction");
  return std::abs(actual - predicted) / actual;
}

namespace detail {

inline void check_pairs(std::span<const double> actuals, std::span<const double> predictions) {
  if (actuals.empty()) throw ArgumentError("no observations");
  if (actuals.size() != predictions.size()) throw ArgumentError("actual/prediction length mismatch");
}

inline double median_of_sorted(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace detail

inline std::vector<double> mre_values(std::span<const double> actuals, std::span<const double> predictions) {
  detail::check_pairs(actuals, predictions);
  std::vector<double> out(actuals.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mre(actuals[i], predictions[i]);
  return out;
}

inline double mmre(std::span<const double> actuals, std::span<const double> predictions) {
  const auto m = mre_values(actuals, predictions);
  double sum = 0.0;
  for (double v : m) sum += v;
  return sum / static_cast<double>(m.size());
}

/// Median MRE; an even count takes the mean of the two central values.
inline double mdmre(std::span<const double> actuals, std::span<const double> predictions) {
  auto m = mre_values(actuals, predictions);
  std::sort(m.begin(), m.end());
  return detail::median_of_sorted(m);
}

/// Fraction of observations with MRE <= x.
inline double pred(std::span<const double> actuals, std::span<const double> predictions, double x) {
  if (!(x > 0.0)) throw DomainError("PRED threshold must be positive");
  const auto m = mre_values(actuals, predictions);
  const auto hits = std::count_if(m.begin(), m.end(), [x](double v) { return v <= x; });
  return static_cast<double>(hits) / static_cast<double>(m.size());
}

inline double mse(std::span<const double> actuals, std::span<const double> predictions) {
  detail::check_pairs(actuals, predictions);
  double sum = 0.0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    const double d = actuals[i] - predictions[i];
    sum += d * d;
  }
  return sum / static_cast<double>(actuals.size());
}

inline MetricSet compute_metrics(std::span<const double> actuals, std::span<const double> predictions) {
  return {mmre(actuals, predictions),     mdmre(actuals, predictions), pred(actuals, predictions, 0.30),
          pred(actuals, predictions, 0.50), mse(actuals, predictions),  actuals.size()};
}

}  // namespace nfseer
