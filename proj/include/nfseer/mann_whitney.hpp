#pragma once

// Two-sided Mann-Whitney U test with mid-rank ties.
//
// Small samples (n_a + n_b <= 16) get the exact permutation p-value: the null
// distribution of the rank sum over all C(n, n_a) splits of the pooled
// mid-ranks, computed by dynamic programming on doubled (integer) ranks so
// ties are handled exactly. Larger samples use the normal approximation with
// tie-corrected variance and a 0.5 continuity correction.

#include <nfseer/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace nfseer {

enum class MannWhitneyMethod { automatic, exact, normal };

inline constexpr std::size_t kExactMannWhitneyLimit = 16;

struct MannWhitneyResult {
  double u_a = 0.0;  // U for the first sample
  double u_b = 0.0;
  double p_two_sided = 1.0;
  bool exact = false;
};

/// Mid-ranks (1-based) of the pooled sample, in input order.
inline std::vector<double> midranks(std::span<const double> pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return pooled[l] < pooled[r]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

/// Standard normal upper tail.
inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace detail {

inline double exact_mann_whitney_p(const std::vector<double>& ranks, std::size_t n_a, double rank_sum_a) {
  const std::size_t n = ranks.size();
  std::vector<int> doubled(n);
  int total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
    total += doubled[i];
  }
  // ways[j][s]: subsets of size j with doubled rank sum s.
  std::vector<std::vector<double>> ways(n_a + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = std::min(n_a, i + 1); j >= 1; --j) {
      const auto& from = ways[j - 1];
      auto& to = ways[j];
      for (int s = total - doubled[i]; s >= 0; --s) {
        if (from[static_cast<std::size_t>(s)] != 0.0) to[static_cast<std::size_t>(s + doubled[i])] += from[static_cast<std::size_t>(s)];
      }
    }
  }
  // Two-sided: splits whose doubled rank sum lies at least as far from its
  // mean n_a (n + 1) as the observed one.
  const std::int64_t centre = static_cast<std::int64_t>(n_a) * static_cast<std::int64_t>(n + 1);
  const std::int64_t observed = std::llabs(std::llround(2.0 * rank_sum_a) - centre);
  double hits = 0.0, all = 0.0;
  for (std::size_t s = 0; s < ways[n_a].size(); ++s) {
    const double count = ways[n_a][s];
    if (count == 0.0) continue;
    all += count;
    if (std::llabs(static_cast<std::int64_t>(s) - centre) >= observed) hits += count;
  }
  return std::min(1.0, hits / all);
}

}  // namespace detail

inline MannWhitneyResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                                        MannWhitneyMethod method = MannWhitneyMethod::automatic) {
  if (sample_a.empty() || sample_b.empty()) throw ArgumentError("Mann-Whitney needs two nonempty samples");
  const std::size_t n_a = sample_a.size();
  const std::size_t n_b = sample_b.size();
  std::vector<double> pooled(sample_a.begin(), sample_a.end());
  pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw DomainError("Mann-Whitney samples must be finite");
  }
  const auto ranks = midranks(pooled);
  const double rank_sum_a = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(n_a), 0.0);
  const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
  MannWhitneyResult out;
  out.u_a = rank_sum_a - na * (na + 1.0) / 2.0;
  out.u_b = na * nb - out.u_a;

  const bool exact = method == MannWhitneyMethod::exact ||
                     (method == MannWhitneyMethod::automatic && n_a + n_b <= kExactMannWhitneyLimit);
  if (exact) {
    out.exact = true;
    out.p_two_sided = detail::exact_mann_whitney_p(ranks, n_a, rank_sum_a);
    return out;
  }
  const double n = na + nb;
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(variance > 0.0)) {
    out.p_two_sided = 1.0;
    return out;
  }
  const double mean = na * nb / 2.0;
  const double z = std::max(0.0, std::abs(out.u_a - mean) - 0.5) / std::sqrt(variance);
  out.p_two_sided = std::min(1.0, 2.0 * normal_upper_tail(z));
  return out;
}

}  // namespace nfseer
