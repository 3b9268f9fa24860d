#pragma once

// Neuro-fuzzy bank: one single-input ANFIS per SEER-SEM parameter, turning a
// rating into an effort multiplier, calibrated end to end through the effort
// equation.

#include <nfseer/anfis.hpp>
#include <nfseer/csv.hpp>
#include <nfseer/error.hpp>
#include <nfseer/lsi.hpp>
#include <nfseer/mapping.hpp>
#include <nfseer/project.hpp>
#include <nfseer/rating.hpp>
#include <nfseer/seer_sem.hpp>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nfseer {

enum class Direction { increases_effort, decreases_effort };

inline std::string to_string(Direction d) {
  return d == Direction::increases_effort ? "increases_effort" : "decreases_effort";
}

inline Direction parse_direction(std::string_view text) {
  const std::string key = detail::lower_ascii(detail::trim(text));
  if (key == "increases_effort" || key == "increases" || key == "+") return Direction::increases_effort;
  if (key == "decreases_effort" || key == "decreases" || key == "-") return Direction::decreases_effort;
  throw ParseError("unknown direction '" + std::string(text) + "'");
}

struct Anchor {
  RatingLevel level;
  double multiplier = 1.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// Defined levels are the anchor levels, kept in ascending order.
struct ParameterSpec {
  std::string name;
  Direction direction = Direction::increases_effort;
  std::vector<Anchor> anchors;

  std::optional<double> anchor_at(RatingLevel level) const {
    for (const auto& a : anchors) {
      if (a.level == level) return a.multiplier;
    }
    return std::nullopt;
  }
  double nominal() const { return anchor_at(RatingLevel{}).value_or(1.0); }

  friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

inline constexpr double kMultiplierFloor = 1e-3;
inline constexpr double kMonotoneSlack = 1e-9;

inline void validate(const ParameterSpec& spec) {
  if (spec.name.empty()) throw SpecError("parameter spec without a name");
  if (spec.anchors.empty()) throw SpecError(spec.name + ": no defined levels");
  for (std::size_t i = 0; i < spec.anchors.size(); ++i) {
    const auto& a = spec.anchors[i];
    if (!(std::isfinite(a.multiplier) && a.multiplier > 0.0)) {
      throw SpecError(spec.name + ": anchor at " + to_string(a.level) + " must be positive");
    }
    if (i == 0) continue;
    const auto& prev = spec.anchors[i - 1];
    if (!(a.level.ordinal() > prev.level.ordinal())) {
      throw SpecError(spec.name + ": levels must be strictly ascending");
    }
    const bool ok = spec.direction == Direction::increases_effort ? a.multiplier >= prev.multiplier
                                                                  : a.multiplier <= prev.multiplier;
    if (!ok) {
      throw SpecError(spec.name + ": anchor table is not monotone (" + to_string(spec.direction) + ") between " +
                      to_string(prev.level) + " and " + to_string(a.level));
    }
  }
}

struct NfBank {
  std::map<std::string, AnfisNet> submodels;
  std::map<std::string, ParameterSpec> specs;
  double ctb = 1.0;
  double d = 1.0;
  SeerConstants constants;

  friend bool operator==(const NfBank&, const NfBank&) = default;
};

inline void validate(const NfBank& bank) {
  if (!(std::isfinite(bank.ctb) && bank.ctb > 0.0) || !(std::isfinite(bank.d) && bank.d > 0.0)) {
    throw DomainError("bank ctb and d must be positive");
  }
  validate(bank.constants);
  if (bank.submodels.size() != bank.specs.size()) throw SpecError("bank submodels and specs differ");
  for (const auto& [name, spec] : bank.specs) {
    const auto it = bank.submodels.find(name);
    if (it == bank.submodels.end()) throw SpecError("no submodel for parameter " + name);
    validate(it->second);
    const auto& dom = it->second.input_domain;
    if (dom.lo > spec.anchors.front().level.ordinal() || dom.hi < spec.anchors.back().level.ordinal()) {
      throw SpecError(name + ": submodel domain does not cover the defined levels");
    }
  }
}

// ---------------------------------------------------------------------------
// Fitting a sub-model through a set of (ordinal, value) points

namespace detail {

struct Point {
  double x;
  double y;
};

inline constexpr int kInteriorSamples = 4;

// Points plus a piecewise-linear fill between neighbours.
inline std::vector<Sample> densify(const std::vector<Point>& points) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.push_back({points[i].x, points[i].y});
    if (i + 1 == points.size()) break;
    for (int k = 1; k <= kInteriorSamples; ++k) {
      const double t = static_cast<double>(k) / (kInteriorSamples + 1);
      out.push_back({points[i].x + t * (points[i + 1].x - points[i].x),
                     points[i].y + t * (points[i + 1].y - points[i].y)});
    }
  }
  return out;
}

// Premises centred on the levels, half-width = half the wider neighbouring gap.
inline AnfisNet initial_net(const std::vector<Point>& points) {
  AnfisNet net;
  net.input_domain = {points.front().x, points.back().x};
  for (std::size_t i = 0; i < points.size(); ++i) {
    double gap = 0.0;
    if (i > 0) gap = std::max(gap, points[i].x - points[i - 1].x);
    if (i + 1 < points.size()) gap = std::max(gap, points[i + 1].x - points[i].x);
    if (gap == 0.0) gap = 1.0;
    net.rules.push_back({{0.5 * gap, 2.0, points[i].x}, {0.0, points[i].y}});
  }
  return net;
}

inline std::vector<Point> anchor_points(const ParameterSpec& spec) {
  std::vector<Point> points;
  for (const auto& a : spec.anchors) points.push_back({a.level.ordinal(), a.multiplier});
  return points;
}

// Pool-adjacent-violators: least-squares non-decreasing fit.
inline std::vector<double> isotonic_increasing(const std::vector<double>& values) {
  struct Block {
    double sum;
    double count;
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1.0});
    while (blocks.size() >= 2) {
      auto& hi = blocks[blocks.size() - 1];
      auto& lo = blocks[blocks.size() - 2];
      if (lo.sum / lo.count <= hi.sum / hi.count) break;
      lo.sum += hi.sum;
      lo.count += hi.count;
      blocks.pop_back();
    }
  }
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), static_cast<std::size_t>(b.count), b.sum / b.count);
  return out;
}

inline std::vector<double> isotonic(const std::vector<double>& values, Direction direction) {
  if (direction == Direction::increases_effort) return isotonic_increasing(values);
  std::vector<double> reversed(values.rbegin(), values.rend());
  auto fitted = isotonic_increasing(reversed);
  return {fitted.rbegin(), fitted.rend()};
}

}  // namespace detail

namespace detail {
// Least-squares weight of the points themselves relative to the fill samples.
inline constexpr double kNodeWeight = 1e6;
inline constexpr double kRepairNodeWeight = 1e4;
inline constexpr double kRepairRidge = 1e-6;
}  // namespace detail

/// Refits the consequents of `net` so that it passes through `points`
/// (densified piecewise-linearly), premises fixed. The points carry a heavy
/// weight so the fill only shapes the curve between them.
inline AnfisNet fit_through_points(const AnfisNet& net, const std::vector<detail::Point>& points,
                                   double node_weight = detail::kNodeWeight) {
  const auto samples = detail::densify(points);
  std::vector<double> weights(samples.size(), 1.0);
  for (std::size_t i = 0; i < samples.size(); i += detail::kInteriorSamples + 1) weights[i] = node_weight;
  return fit_consequents_lse(net, samples, weights).net;
}

inline double clamp_multiplier(double value) { return std::max(value, kMultiplierFloor); }

// ---------------------------------------------------------------------------
// Monotonicity

struct MonotonicityViolation {
  std::string parameter;
  std::size_t grid_index = 0;  // violation between grid points index and index + 1
  double x_left = 0.0;
  double x_right = 0.0;
  double y_left = 0.0;
  double y_right = 0.0;
};

inline constexpr std::size_t kMonotonicityGrid = 101;

inline std::vector<MonotonicityViolation> monotonicity_violations(const std::string& name, const AnfisNet& net,
                                                                  Direction direction) {
  std::vector<MonotonicityViolation> out;
  const auto& dom = net.input_domain;
  std::vector<double> xs(kMonotonicityGrid), ys(kMonotonicityGrid);
  for (std::size_t k = 0; k < kMonotonicityGrid; ++k) {
    xs[k] = dom.lo + (dom.hi - dom.lo) * static_cast<double>(k) / (kMonotonicityGrid - 1);
    ys[k] = clamp_multiplier(anfis_eval(net, xs[k]));
  }
  for (std::size_t k = 0; k + 1 < kMonotonicityGrid; ++k) {
    const double delta = ys[k + 1] - ys[k];
    const bool bad = direction == Direction::increases_effort ? delta < -kMonotoneSlack : delta > kMonotoneSlack;
    if (bad) out.push_back({name, k, xs[k], xs[k + 1], ys[k], ys[k + 1]});
  }
  return out;
}

/// Adjacent grid pairs (101 points per domain) where a sub-model moves
/// against its declared direction by more than 1e-9.
inline std::vector<MonotonicityViolation> monotonicity_check(const NfBank& bank) {
  std::vector<MonotonicityViolation> out;
  for (const auto& [name, net] : bank.submodels) {
    const auto spec = bank.specs.find(name);
    const Direction direction = spec == bank.specs.end() ? Direction::increases_effort : spec->second.direction;
    auto v = monotonicity_violations(name, net, direction);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

namespace detail {

// One least-squares row of the consequent problem: [w1 x, w1, ..., wM x, wM].
inline Eigen::RowVectorXd consequent_row(const AnfisNet& net, double x) {
  const auto fwd = forward(net, x);
  Eigen::RowVectorXd row(2 * static_cast<Eigen::Index>(net.size()));
  for (std::size_t i = 0; i < net.size(); ++i) {
    row(2 * static_cast<Eigen::Index>(i)) = fwd.trace.normalized[i] * x;
    row(2 * static_cast<Eigen::Index>(i) + 1) = fwd.trace.normalized[i];
  }
  return row;
}

// Consequent refit through `points` constrained to move in `direction` on the
// monotonicity grid. A constant output is always feasible.
inline AnfisNet monotone_refit(const AnfisNet& net, const std::vector<Point>& points, Direction direction) {
  const auto samples = densify(points);
  const auto cols = 2 * static_cast<Eigen::Index>(net.size());
  const auto rows = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd E(rows + cols, cols);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(rows + cols);
  for (Eigen::Index k = 0; k < rows; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    const double root_w = k % (kInteriorSamples + 1) == 0 ? std::sqrt(kRepairNodeWeight) : 1.0;
    E.row(k) = root_w * consequent_row(net, s.x);
    f(k) = root_w * s.target;
  }
  // Small ridge keeps E at full column rank.
  E.bottomRows(cols) = kRepairRidge * Eigen::MatrixXd::Identity(cols, cols);

  const auto& dom = net.input_domain;
  const double sign = direction == Direction::increases_effort ? 1.0 : -1.0;
  Eigen::MatrixXd G(static_cast<Eigen::Index>(kMonotonicityGrid) - 1, cols);
  Eigen::RowVectorXd prev = consequent_row(net, dom.lo);
  for (std::size_t k = 1; k < kMonotonicityGrid; ++k) {
    const double x = dom.lo + (dom.hi - dom.lo) * static_cast<double>(k) / (kMonotonicityGrid - 1);
    const Eigen::RowVectorXd cur = consequent_row(net, x);
    G.row(static_cast<Eigen::Index>(k) - 1) = sign * (cur - prev);
    prev = cur;
  }
  const Eigen::VectorXd theta = lsi::solve(E, f, G, Eigen::VectorXd::Zero(G.rows()));
  AnfisNet out = net;
  for (std::size_t i = 0; i < net.size(); ++i) {
    out.rules[i].out = {theta(2 * static_cast<Eigen::Index>(i)), theta(2 * static_cast<Eigen::Index>(i) + 1)};
  }
  return out;
}

}  // namespace detail

struct AnchorInitOptions {
  int max_epochs = 500;
  double learning_rate = 0.01;
  double tolerance = 1e-14;
};

inline std::pair<AnfisNet, std::vector<double>> init_submodel(const ParameterSpec& spec,
                                                               const AnchorInitOptions& options = {}) {
  validate(spec);
  if (spec.anchors.size() < 2) throw SpecError(spec.name + ": at least two defined levels are needed");
  const auto points = detail::anchor_points(spec);
  const auto samples = detail::densify(points);
  TrainConfig cfg{options.max_epochs, options.learning_rate, options.tolerance, 0};
  auto trained = train_hybrid(detail::initial_net(points), samples, cfg);
  if (!monotonicity_violations(spec.name, trained.net, spec.direction).empty()) {
    trained.net = detail::monotone_refit(trained.net, points, spec.direction);
  }
  for (const auto& p : points) {
    const double got = clamp_multiplier(anfis_eval(trained.net, p.x));
    if (std::abs(got - p.y) > 0.01 * p.y) {
      throw SpecError(spec.name + ": anchor at ordinal " + std::to_string(p.x) + " not reproduced within 1%");
    }
  }
  return {std::move(trained.net), std::move(trained.loss_history)};
}

/// Builds a bank whose sub-models reproduce every anchor within 1%.
inline NfBank init_from_anchors(const std::vector<ParameterSpec>& specs, const SeerConstants& constants = {},
                                const AnchorInitOptions& options = {}) {
  validate(constants);
  NfBank bank;
  bank.constants = constants;
  bank.ctb = constants.default_ctb;
  bank.d = constants.default_d;
  for (const auto& spec : specs) {
    if (bank.specs.contains(spec.name)) throw SpecError("duplicate parameter spec " + spec.name);
    bank.submodels.emplace(spec.name, init_submodel(spec, options).first);
    bank.specs.emplace(spec.name, spec);
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Evaluation

inline double submodel_multiplier(const NfBank& bank, const std::string& param, double ordinal) {
  const auto it = bank.submodels.find(param);
  if (it == bank.submodels.end()) throw DataError("unknown parameter '" + param + "'");
  const auto& dom = it->second.input_domain;
  constexpr double kSlack = 1e-9;
  if (!std::isfinite(ordinal) || ordinal < dom.lo - kSlack || ordinal > dom.hi + kSlack) {
    throw DomainError(param + " rating ordinal " + csv::format_double(ordinal) + " outside [" +
                      csv::format_double(dom.lo) + ", " + csv::format_double(dom.hi) + "]");
  }
  return clamp_multiplier(anfis_eval(it->second, ordinal));
}

/// One multiplier per bank parameter; parameters missing from `ratings` get
/// their spec's Nominal anchor.
inline std::map<std::string, double> bank_evaluate(const NfBank& bank, const std::map<std::string, double>& ratings) {
  for (const auto& [name, value] : ratings) {
    if (!bank.submodels.contains(name)) throw DataError("unknown parameter '" + name + "'");
  }
  std::map<std::string, double> out;
  for (const auto& [name, spec] : bank.specs) {
    const auto it = ratings.find(name);
    out.emplace(name, it == ratings.end() ? spec.nominal() : submodel_multiplier(bank, name, it->second));
  }
  return out;
}

inline std::map<std::string, double> bank_evaluate(const NfBank& bank,
                                                   const std::map<std::string, RatingLevel>& ratings) {
  std::map<std::string, double> ordinals;
  for (const auto& [name, level] : ratings) ordinals.emplace(name, level.ordinal());
  return bank_evaluate(bank, ordinals);
}

/// Predicted development effort in person-months.
inline double estimate(const ProjectRecord& project, const NfBank& bank) {
  try {
    if (!(project.size_kloc > 0.0)) throw DataError("non-positive size");
    const auto multipliers = bank_evaluate(bank, project.ratings);
    const double cte = effective_technology(bank.ctb, multipliers);
    const double d = project.staffing_complexity.value_or(bank.d);
    const double k = lifecycle_effort({project.size_kloc, d, cte, bank.ctb}, bank.constants);
    return development_effort(k, bank.constants).e_person_months;
  } catch (const Error& e) {
    throw DataError("project " + project.id + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// End-to-end loss and gradient

namespace detail {

// Projects resolved against a bank's parameter roster.
struct PreparedProjects {
  std::vector<std::string> params;                      // roster order
  std::vector<std::vector<std::optional<double>>> x;    // [project][param] ordinal
  std::vector<double> log_base;                         // log of everything except ctb and multipliers
  std::vector<double> actual;
  std::vector<double> fixed_log_multipliers;            // sum of log of defaulted (missing) multipliers
};

inline PreparedProjects prepare(const NfBank& bank, const std::vector<ProjectRecord>& projects) {
  PreparedProjects out;
  for (const auto& [name, spec] : bank.specs) out.params.push_back(name);
  const auto& k = bank.constants;
  for (const auto& p : projects) {
    if (!(std::isfinite(p.actual_effort_pm) && p.actual_effort_pm > 0.0)) {
      throw DataError("project " + p.id + ": non-positive actual effort");
    }
    if (!(std::isfinite(p.size_kloc) && p.size_kloc > 0.0)) throw DataError("project " + p.id + ": non-positive size");
    for (const auto& [name, level] : p.ratings) {
      if (!bank.specs.contains(name)) throw DataError("project " + p.id + ": unknown parameter '" + name + "'");
    }
    std::vector<std::optional<double>> row;
    double fixed = 0.0;
    for (const auto& name : out.params) {
      const auto it = p.ratings.find(name);
      if (it == p.ratings.end()) {
        row.push_back(std::nullopt);
        fixed += std::log(bank.specs.at(name).nominal());
      } else {
        const double x = it->second.ordinal();
        const auto& dom = bank.submodels.at(name).input_domain;
        if (x < dom.lo - 1e-9 || x > dom.hi + 1e-9) {
          throw DataError("project " + p.id + ": " + name + " rating " + to_string(it->second) + " outside domain");
        }
        row.push_back(x);
      }
    }
    const double d = p.staffing_complexity.value_or(bank.d);
    out.log_base.push_back(std::log(k.months_per_year * kDevelopmentFraction) + k.staffing_exponent * std::log(d) +
                           k.size_exponent * std::log(p.size_kloc));
    out.x.push_back(std::move(row));
    out.actual.push_back(p.actual_effort_pm);
    out.fixed_log_multipliers.push_back(fixed);
  }
  return out;
}

// log multiplier of every (project, param) cell; missing cells hold 0.
inline std::vector<std::vector<double>> log_multipliers(const NfBank& bank, const PreparedProjects& prep) {
  std::vector<std::vector<double>> out(prep.x.size(), std::vector<double>(prep.params.size(), 0.0));
  for (std::size_t i = 0; i < prep.params.size(); ++i) {
    const auto& net = bank.submodels.at(prep.params[i]);
    for (std::size_t j = 0; j < prep.x.size(); ++j) {
      if (prep.x[j][i]) out[j][i] = std::log(clamp_multiplier(anfis_eval(net, *prep.x[j][i])));
    }
  }
  return out;
}

inline std::vector<double> predictions(const NfBank& bank, const PreparedProjects& prep,
                                       const std::vector<std::vector<double>>& logm) {
  std::vector<double> out(prep.x.size());
  const double e = bank.constants.size_exponent;
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = prep.fixed_log_multipliers[j];
    for (double v : logm[j]) s += v;
    out[j] = std::exp(prep.log_base[j] + e * (s - std::log(bank.ctb)));
  }
  return out;
}

inline double relative_loss(const std::vector<double>& predicted, const std::vector<double>& actual) {
  double loss = 0.0;
  for (std::size_t j = 0; j < actual.size(); ++j) {
    const double r = (predicted[j] - actual[j]) / actual[j];
    loss += r * r;
  }
  return loss;
}

}  // namespace detail

/// L = sum_j ((estimate_j - actual_j) / actual_j)^2
inline double bank_loss(const NfBank& bank, const std::vector<ProjectRecord>& projects) {
  const auto prep = detail::prepare(bank, projects);
  return detail::relative_loss(detail::predictions(bank, prep, detail::log_multipliers(bank, prep)), prep.actual);
}

/// dL/d(a, b, c) for every sub-model rule, chained through the effort
/// equation: d estimate / d m_i = size_exponent * estimate / m_i.
inline std::map<std::string, std::vector<PremiseGradient>> bank_premise_gradients(
    const NfBank& bank, const std::vector<ProjectRecord>& projects) {
  const auto prep = detail::prepare(bank, projects);
  const auto logm = detail::log_multipliers(bank, prep);
  const auto pred = detail::predictions(bank, prep, logm);
  const double e = bank.constants.size_exponent;
  std::map<std::string, std::vector<PremiseGradient>> out;
  for (std::size_t i = 0; i < prep.params.size(); ++i) {
    const auto& net = bank.submodels.at(prep.params[i]);
    std::vector<PremiseGradient> grad(net.size());
    for (std::size_t j = 0; j < prep.x.size(); ++j) {
      if (!prep.x[j][i]) continue;
      double raw = 0.0;
      const auto d = output_derivatives(net, *prep.x[j][i], &raw);
      if (raw < kMultiplierFloor) continue;  // clamped: flat
      const double dl_dm = 2.0 * (pred[j] - prep.actual[j]) / (prep.actual[j] * prep.actual[j]) * e * pred[j] / raw;
      for (std::size_t r = 0; r < net.size(); ++r) {
        grad[r].da += dl_dm * d[r].da;
        grad[r].db += dl_dm * d[r].db;
        grad[r].dc += dl_dm * d[r].dc;
      }
    }
    out.emplace(prep.params[i], std::move(grad));
  }
  return out;
}

/// Closed-form ctb minimising the relative loss with everything else fixed.
/// With q_j = estimate_j / actual_j, scaling every estimate by s gives
/// L(s) = sum (s q_j - 1)^2, minimised at s = sum q / sum q^2.
inline double fitted_ctb(const NfBank& bank, const std::vector<double>& predicted, const std::vector<double>& actual) {
  double sq = 0.0, sqq = 0.0;
  for (std::size_t j = 0; j < actual.size(); ++j) {
    const double q = predicted[j] / actual[j];
    sq += q;
    sqq += q * q;
  }
  if (!(sqq > 0.0) || !std::isfinite(sqq)) return bank.ctb;
  const double s = sq / sqq;
  return bank.ctb * std::pow(s, -1.0 / bank.constants.size_exponent);
}

/// Returns `bank` with ctb recalibrated on `projects`; nothing else changes.
inline NfBank calibrate_ctb(NfBank bank, const std::vector<ProjectRecord>& projects) {
  if (projects.empty()) return bank;
  const auto prep = detail::prepare(bank, projects);
  const auto pred = detail::predictions(bank, prep, detail::log_multipliers(bank, prep));
  bank.ctb = fitted_ctb(bank, pred, prep.actual);
  return bank;
}

// ---------------------------------------------------------------------------
// Training

struct BankTrainOptions {
  bool enforce_monotone = true;
  // Pseudo-observations pulling each level toward its current value during
  // the consequent step.
  double shrinkage = 2.0;
  bool premise_step = true;
};

struct CtbStep {
  double loss_before = 0.0;
  double loss_after = 0.0;
};

struct BankTrainResult {
  NfBank bank;
  std::vector<double> loss_history;  // loss at the end of each epoch
  std::vector<CtbStep> ctb_steps;
};

namespace detail {

// Puts a sub-model back in its declared direction: isotonic projection of its
// outputs at the defined levels, then a consequent refit through them under
// grid monotonicity constraints.
inline AnfisNet repair_monotone(const AnfisNet& net, const ParameterSpec& spec) {
  if (monotonicity_violations(spec.name, net, spec.direction).empty()) return net;
  std::vector<Point> points;
  std::vector<double> values;
  for (const auto& a : spec.anchors) {
    points.push_back({a.level.ordinal(), clamp_multiplier(anfis_eval(net, a.level.ordinal()))});
    values.push_back(points.back().y);
  }
  const auto fitted = isotonic(values, spec.direction);
  for (std::size_t i = 0; i < points.size(); ++i) points[i].y = fitted[i];
  return monotone_refit(net, points, spec.direction);
}

}  // namespace detail

/// Trains every sub-model through the effort equation on relative squared
/// error. Each epoch:
///   1. ctb refit in closed form (loss cannot increase),
///   2. consequent step per sub-model in roster order: each project's target
///      multiplier is the value that would make its estimate exact, targets
///      are pooled per rating (geometric mean, shrunk toward the current
///      output) and the consequents are refit through them by least squares,
///   3. one gradient step on all premises with the end-to-end gradient,
///   4. optional monotone repair.
inline BankTrainResult bank_train(const NfBank& bank, const std::vector<ProjectRecord>& projects,
                                  const TrainConfig& cfg, const BankTrainOptions& options = {}) {
  validate(cfg);
  validate(bank);
  for (const auto& p : projects) {
    if (!(std::isfinite(p.actual_effort_pm) && p.actual_effort_pm > 0.0)) {
      throw DataError("project " + p.id + ": non-positive actual effort");
    }
  }
  BankTrainResult out{bank, {}, {}};
  if (cfg.epochs == 0) return out;
  if (projects.size() < 2) throw ArgumentError("bank training needs at least two projects");

  auto& b = out.bank;
  const auto prep = detail::prepare(b, projects);
  const double e = b.constants.size_exponent;
  const std::size_t n = prep.x.size();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto logm = detail::log_multipliers(b, prep);
    auto pred = detail::predictions(b, prep, logm);

    CtbStep step{detail::relative_loss(pred, prep.actual), 0.0};
    b.ctb = fitted_ctb(b, pred, prep.actual);
    pred = detail::predictions(b, prep, logm);
    step.loss_after = detail::relative_loss(pred, prep.actual);
    out.ctb_steps.push_back(step);

    for (std::size_t i = 0; i < prep.params.size(); ++i) {
      const auto& name = prep.params[i];
      const auto& spec = b.specs.at(name);
      auto& net = b.submodels.at(name);
      // Pool log targets per distinct rating ordinal.
      std::map<double, std::pair<double, double>> pooled;  // x -> (sum log target, count)
      for (std::size_t j = 0; j < n; ++j) {
        if (!prep.x[j][i]) continue;
        const double log_target = logm[j][i] + (std::log(prep.actual[j]) - std::log(pred[j])) / e;
        auto& cell = pooled[*prep.x[j][i]];
        cell.first += log_target;
        cell.second += 1.0;
      }
      if (pooled.empty()) continue;
      std::map<double, double> targets;
      for (const auto& a : spec.anchors) targets[a.level.ordinal()] = clamp_multiplier(anfis_eval(net, a.level.ordinal()));
      for (const auto& [x, cell] : pooled) {
        const double current = std::log(clamp_multiplier(anfis_eval(net, x)));
        targets[x] = std::exp((options.shrinkage * current + cell.first) / (options.shrinkage + cell.second));
      }
      std::vector<detail::Point> points;
      for (const auto& [x, y] : targets) points.push_back({x, y});
      net = fit_through_points(net, points);
      for (std::size_t j = 0; j < n; ++j) {
        if (!prep.x[j][i]) continue;
        logm[j][i] = std::log(clamp_multiplier(anfis_eval(net, *prep.x[j][i])));
      }
      pred = detail::predictions(b, prep, logm);
    }

    if (options.premise_step) {
      const auto grads = bank_premise_gradients(b, projects);
      for (auto& [name, net] : b.submodels) apply_premise_step(net, grads.at(name), cfg.learning_rate);
    }
    if (options.enforce_monotone) {
      for (auto& [name, net] : b.submodels) net = detail::repair_monotone(net, b.specs.at(name));
    }

    logm = detail::log_multipliers(b, prep);
    pred = detail::predictions(b, prep, logm);
    const double loss = detail::relative_loss(pred, prep.actual);
    if (!std::isfinite(loss)) {
      throw DivergenceError("bank loss became non-finite at epoch " + std::to_string(epoch) +
                            "; try a smaller learning_rate");
    }
    out.loss_history.push_back(loss);
    const std::size_t k = out.loss_history.size();
    if (k >= 2 && std::abs(out.loss_history[k - 1] - out.loss_history[k - 2]) < cfg.tolerance) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parameter specs: CSV with one row per defined level
//   parameter,direction,level,multiplier

inline std::vector<ParameterSpec> parse_parameter_specs(std::string_view text) {
  const auto table = csv::parse(text);
  const auto c_param = csv::column_index(table.header, "parameter");
  const auto c_dir = csv::column_index(table.header, "direction");
  const auto c_level = csv::column_index(table.header, "level");
  const auto c_mult = csv::column_index(table.header, "multiplier");
  std::vector<ParameterSpec> specs;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = "parameter specs line " + std::to_string(table.line_numbers[i]);
    if (row.size() != table.header.size()) throw ParseError(where + ": wrong field count");
    const std::string name = upper_ascii(row[c_param]);
    const Direction direction = parse_direction(row[c_dir]);
    auto it = std::find_if(specs.begin(), specs.end(), [&](const auto& s) { return s.name == name; });
    if (it == specs.end()) {
      specs.push_back({name, direction, {}});
      it = std::prev(specs.end());
    } else if (it->direction != direction) {
      throw SpecError(where + ": conflicting direction for " + name);
    }
    it->anchors.push_back({parse_rating(row[c_level]), csv::parse_double(row[c_mult], "multiplier")});
  }
  for (auto& spec : specs) {
    std::stable_sort(spec.anchors.begin(), spec.anchors.end(),
                     [](const auto& l, const auto& r) { return l.level.ordinal() < r.level.ordinal(); });
    validate(spec);
  }
  return specs;
}

inline std::vector<ParameterSpec> load_parameter_specs(const std::string& path) {
  return parse_parameter_specs(csv::read_file(path));
}

inline std::string format_parameter_specs(const std::vector<ParameterSpec>& specs) {
  std::string out = "parameter,direction,level,multiplier\n";
  for (const auto& spec : specs) {
    for (const auto& a : spec.anchors) {
      out += csv::format_row({spec.name, to_string(spec.direction), to_string(a.level), csv::format_double(a.multiplier)});
    }
  }
  return out;
}

/// Parameters whose higher ratings mean a more capable team or environment.
inline bool reduces_effort(std::string_view param) {
  static constexpr std::array<std::string_view, 8> kCapability{"ACAP", "AEXP", "PCAP", "LEXP",
                                                                "DEXP", "TEXP", "MODP", "TOOL"};
  return std::find(kCapability.begin(), kCapability.end(), param) != kCapability.end();
}

/// Neutral geometric ladder: Nominal = 1, 8% per rating step in the declared
/// direction, over every level the mapping table defines for the parameter.
inline std::vector<ParameterSpec> default_parameter_specs(const MappingTable& table = default_mapping_table(),
                                                          double step = 1.08) {
  std::vector<ParameterSpec> specs;
  for (const auto& name : table.seer_parameters()) {
    ParameterSpec spec{name, reduces_effort(name) ? Direction::decreases_effort : Direction::increases_effort, {}};
    const double sign = spec.direction == Direction::increases_effort ? 1.0 : -1.0;
    for (const auto& level : table.seer_levels(name)) {
      spec.anchors.push_back({level, std::pow(step, sign * (level.ordinal() - 3.0))});
    }
    specs.push_back(std::move(spec));
  }
  return specs;
}

// ---------------------------------------------------------------------------
// Bank persistence (JSON); each sub-model is embedded as an ANFIS model object.

inline std::string write_bank(const NfBank& bank) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, spec] : bank.specs) {
    nlohmann::json anchors = nlohmann::json::array();
    for (const auto& a : spec.anchors) anchors.push_back({{"level", to_string(a.level)}, {"multiplier", a.multiplier}});
    params.push_back({{"name", name},
                      {"direction", to_string(spec.direction)},
                      {"anchors", anchors},
                      {"model", anfis_to_json(bank.submodels.at(name))}});
  }
  const auto& k = bank.constants;
  nlohmann::json doc = {{"format", "nfseer.bank"},
                        {"version", 1},
                        {"ctb", bank.ctb},
                        {"d", bank.d},
                        {"constants",
                         {{"staffing_exponent", k.staffing_exponent},
                          {"size_exponent", k.size_exponent},
                          {"months_per_year", k.months_per_year},
                          {"default_ctb", k.default_ctb},
                          {"default_d", k.default_d}}},
                        {"parameters", params}};
  return doc.dump(2) + "\n";
}

inline NfBank read_bank(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.at("format") != "nfseer.bank") throw ParseError("not a bank model document");
    if (doc.at("version") != 1) throw ParseError("unsupported bank model version");
    NfBank bank;
    bank.ctb = doc.at("ctb").get<double>();
    bank.d = doc.at("d").get<double>();
    const auto& k = doc.at("constants");
    bank.constants = {k.at("staffing_exponent").get<double>(), k.at("size_exponent").get<double>(),
                      k.at("months_per_year").get<double>(), k.at("default_ctb").get<double>(),
                      k.at("default_d").get<double>()};
    for (const auto& p : doc.at("parameters")) {
      ParameterSpec spec{p.at("name").get<std::string>(), parse_direction(p.at("direction").get<std::string>()), {}};
      for (const auto& a : p.at("anchors")) {
        spec.anchors.push_back({parse_rating(a.at("level").get<std::string>()), a.at("multiplier").get<double>()});
      }
      bank.submodels.emplace(spec.name, anfis_from_json(p.at("model")));
      bank.specs.emplace(spec.name, std::move(spec));
    }
    validate(bank);
    return bank;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed bank model: ") + e.what());
  }
}

inline NfBank load_bank(const std::string& path) { return read_bank(csv::read_file(path)); }

}  // namespace nfseer
