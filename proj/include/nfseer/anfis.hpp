#pragma once

// Single-input first-order Sugeno ANFIS with generalized-bell memberships.
//
// Layers, for an input x and M rules:
//   1. w_i  = bell_i(x) = 1 / (1 + |(x - c_i) / a_i|^(2 b_i))
//   2. S    = sum_j w_j
//   3. nw_i = w_i / S
//   4. f_i  = p_i x + r_i
//   5. y    = sum_i nw_i f_i
//
// Training is the classic hybrid cycle: consequents (p, r) by linear least
// squares with premises fixed, then one batch gradient step on the premises
// (a, b, c).

#include <nfseer/error.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nfseer {

struct MembershipFunction {
  double a = 1.0;  // half-width
  double b = 1.0;  // slope exponent
  double c = 0.0;  // centre

  friend bool operator==(const MembershipFunction&, const MembershipFunction&) = default;
};

struct Consequent {
  double p = 0.0;  // slope
  double r = 0.0;  // intercept

  friend bool operator==(const Consequent&, const Consequent&) = default;
};

struct Rule {
  MembershipFunction mf;
  Consequent out;

  friend bool operator==(const Rule&, const Rule&) = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Rules are kept sorted by membership centre.
struct AnfisNet {
  std::vector<Rule> rules;
  Interval input_domain;

  std::size_t size() const noexcept { return rules.size(); }
  friend bool operator==(const AnfisNet&, const AnfisNet&) = default;
};

struct Sample {
  double x = 0.0;
  double target = 0.0;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double tolerance = 0.0;  // stop once |loss[k] - loss[k-1]| < tolerance
  std::uint64_t seed = 0;
};

// Repair bounds applied after every premise update.
inline constexpr double kMinHalfWidth = 1e-3;
inline constexpr double kMinSlope = 0.1;
inline constexpr double kMaxSlope = 10.0;
inline constexpr double kMinCentreGap = 1e-3;
inline constexpr double kDegenerateFiring = 1e-300;

inline void validate(const MembershipFunction& mf) {
  if (!(std::isfinite(mf.a) && mf.a > 0.0) || !(std::isfinite(mf.b) && mf.b > 0.0) || !std::isfinite(mf.c)) {
    throw DomainError("invalid membership function (a=" + std::to_string(mf.a) + ", b=" + std::to_string(mf.b) +
                      ", c=" + std::to_string(mf.c) + "): need a > 0, b > 0, finite c");
  }
}

inline void validate(const AnfisNet& net) {
  if (net.rules.empty()) throw DomainError("ANFIS net needs at least one rule");
  for (std::size_t i = 0; i < net.rules.size(); ++i) {
    validate(net.rules[i].mf);
    if (!std::isfinite(net.rules[i].out.p) || !std::isfinite(net.rules[i].out.r)) {
      throw DomainError("non-finite consequent in rule " + std::to_string(i));
    }
    if (i > 0 && !(net.rules[i].mf.c > net.rules[i - 1].mf.c)) {
      throw DomainError("membership centres must be strictly increasing");
    }
  }
  if (!(net.input_domain.lo <= net.input_domain.hi)) throw DomainError("empty input domain");
}

inline double membership_eval(const MembershipFunction& mf, double x) {
  validate(mf);
  if (!std::isfinite(x)) throw DomainError("membership input must be finite");
  const double u = (x - mf.c) / mf.a;
  return 1.0 / (1.0 + std::pow(u * u, mf.b));
}

/// Partial derivatives of a bell value with respect to its parameters.
struct MembershipGradient {
  double da = 0.0;
  double db = 0.0;
  double dc = 0.0;
};

inline MembershipGradient membership_gradient(const MembershipFunction& mf, double x) {
  const double u = (x - mf.c) / mf.a;
  if (u == 0.0) return {};
  const double t = std::pow(u * u, mf.b);
  const double w = 1.0 / (1.0 + t);
  const double w2t = w * w * t;
  return {2.0 * mf.b * w2t / mf.a, -2.0 * w2t * std::log(std::abs(u)), 2.0 * mf.b * w2t / (u * mf.a)};
}

struct ForwardTrace {
  std::vector<double> firing;      // w_i
  std::vector<double> normalized;  // w_i / S
  std::vector<double> rule_outputs;
  double total_firing = 0.0;
  bool extrapolated = false;
};

struct ForwardResult {
  double y = 0.0;
  ForwardTrace trace;
};

namespace detail {

// Unchecked forward pass; the net is assumed valid.
inline ForwardResult forward(const AnfisNet& net, double x) {
  ForwardResult out;
  auto& tr = out.trace;
  const std::size_t m = net.size();
  tr.firing.resize(m);
  tr.normalized.resize(m);
  tr.rule_outputs.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& mf = net.rules[i].mf;
    const double u = (x - mf.c) / mf.a;
    tr.firing[i] = 1.0 / (1.0 + std::pow(u * u, mf.b));
    tr.total_firing += tr.firing[i];
    tr.rule_outputs[i] = net.rules[i].out.p * x + net.rules[i].out.r;
  }
  if (!(tr.total_firing >= kDegenerateFiring)) {
    throw DegenerateFiringError("all firing strengths vanish at x=" + std::to_string(x));
  }
  for (std::size_t i = 0; i < m; ++i) {
    tr.normalized[i] = tr.firing[i] / tr.total_firing;
    out.y += tr.normalized[i] * tr.rule_outputs[i];
  }
  tr.extrapolated = !net.input_domain.contains(x);
  return out;
}

}  // namespace detail

inline ForwardResult anfis_forward(const AnfisNet& net, double x) {
  validate(net);
  if (!std::isfinite(x)) throw DomainError("ANFIS input must be finite");
  return detail::forward(net, x);
}

/// Output only; skips validation. For hot loops over a net already validated.
inline double anfis_eval(const AnfisNet& net, double x) { return detail::forward(net, x).y; }

/// dy/d(parameter) for every rule at one input.
struct RuleDerivatives {
  double da = 0.0;
  double db = 0.0;
  double dc = 0.0;
  double dp = 0.0;
  double dr = 0.0;
};

inline std::vector<RuleDerivatives> output_derivatives(const AnfisNet& net, double x, double* y_out = nullptr) {
  const auto fwd = detail::forward(net, x);
  const auto& tr = fwd.trace;
  std::vector<RuleDerivatives> out(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const double dy_dw = (tr.rule_outputs[i] - fwd.y) / tr.total_firing;
    const auto g = membership_gradient(net.rules[i].mf, x);
    out[i] = {dy_dw * g.da, dy_dw * g.db, dy_dw * g.dc, tr.normalized[i] * x, tr.normalized[i]};
  }
  if (y_out) *y_out = fwd.y;
  return out;
}

inline double sum_squared_error(const AnfisNet& net, std::span<const Sample> samples) {
  double sse = 0.0;
  for (const auto& s : samples) {
    const double e = anfis_eval(net, s.x) - s.target;
    sse += e * e;
  }
  return sse;
}

struct LseResult {
  AnfisNet net;
  double sse = 0.0;
};

/// Least-squares consequents for fixed premises. Optional per-sample weights
/// scale the squared residuals. Rank-deficient systems get the minimum-norm
/// solution.
inline LseResult fit_consequents_lse(const AnfisNet& net, std::span<const Sample> samples,
                                     std::span<const double> weights = {}) {
  validate(net);
  if (samples.empty()) throw ArgumentError("least-squares fit needs at least one sample");
  if (!weights.empty() && weights.size() != samples.size()) throw ArgumentError("weights/samples length mismatch");
  const auto m = static_cast<Eigen::Index>(net.size());
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd design(n, 2 * m);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    ForwardResult fwd;
    try {
      fwd = detail::forward(net, s.x);
    } catch (const DegenerateFiringError&) {
      throw DegenerateFiringError("degenerate firing at sample " + std::to_string(k) + " (x=" + std::to_string(s.x) +
                                  ")");
    }
    const double root_w = weights.empty() ? 1.0 : std::sqrt(weights[static_cast<std::size_t>(k)]);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double nw = fwd.trace.normalized[static_cast<std::size_t>(i)];
      design(k, 2 * i) = root_w * nw * s.x;
      design(k, 2 * i + 1) = root_w * nw;
    }
    rhs(k) = root_w * s.target;
  }
  const Eigen::VectorXd theta = design.completeOrthogonalDecomposition().solve(rhs);
  LseResult out{net, 0.0};
  for (Eigen::Index i = 0; i < m; ++i) {
    out.net.rules[static_cast<std::size_t>(i)].out = {theta(2 * i), theta(2 * i + 1)};
  }
  out.sse = sum_squared_error(out.net, samples);
  return out;
}

struct PremiseGradient {
  double da = 0.0;
  double db = 0.0;
  double dc = 0.0;
};

/// Gradient of the sum of squared errors with respect to every (a, b, c).
inline std::vector<PremiseGradient> premise_gradients(const AnfisNet& net, std::span<const Sample> samples) {
  validate(net);
  std::vector<PremiseGradient> grad(net.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    double y = 0.0;
    std::vector<RuleDerivatives> d;
    try {
      d = output_derivatives(net, samples[k].x, &y);
    } catch (const DegenerateFiringError&) {
      throw DegenerateFiringError("degenerate firing at sample " + std::to_string(k));
    }
    const double scale = 2.0 * (y - samples[k].target);
    for (std::size_t i = 0; i < net.size(); ++i) {
      grad[i].da += scale * d[i].da;
      grad[i].db += scale * d[i].db;
      grad[i].dc += scale * d[i].dc;
    }
  }
  return grad;
}

/// Restores the premise invariants: a >= 1e-3, b in [0.1, 10], centres sorted
/// (rules move with their centre) and at least 1e-3 apart.
inline void repair_premises(AnfisNet& net) {
  for (auto& rule : net.rules) {
    rule.mf.a = std::max(rule.mf.a, kMinHalfWidth);
    rule.mf.b = std::clamp(rule.mf.b, kMinSlope, kMaxSlope);
  }
  std::stable_sort(net.rules.begin(), net.rules.end(),
                   [](const Rule& l, const Rule& r) { return l.mf.c < r.mf.c; });
  for (std::size_t i = 1; i < net.rules.size(); ++i) {
    net.rules[i].mf.c = std::max(net.rules[i].mf.c, net.rules[i - 1].mf.c + kMinCentreGap);
  }
}

inline void apply_premise_step(AnfisNet& net, const std::vector<PremiseGradient>& grad, double learning_rate) {
  for (std::size_t i = 0; i < net.size(); ++i) {
    net.rules[i].mf.a -= learning_rate * grad[i].da;
    net.rules[i].mf.b -= learning_rate * grad[i].db;
    net.rules[i].mf.c -= learning_rate * grad[i].dc;
  }
  repair_premises(net);
}

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw ArgumentError("epochs must be non-negative");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ArgumentError("learning_rate must be positive");
  }
  if (!(cfg.tolerance >= 0.0)) throw ArgumentError("tolerance must be non-negative");
}

struct HybridTrainResult {
  AnfisNet net;
  std::vector<double> loss_history;  // sse right after each epoch's LSE step
};

/// Hybrid learning. Each epoch: LSE consequents, record sse, one premise
/// gradient step. A closing LSE pass keeps the returned consequents optimal
/// for the returned premises.
inline HybridTrainResult train_hybrid(const AnfisNet& net, std::span<const Sample> samples, const TrainConfig& cfg) {
  validate(cfg);
  validate(net);
  HybridTrainResult out{net, {}};
  if (cfg.epochs == 0) return out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto lse = fit_consequents_lse(out.net, samples);
    if (!std::isfinite(lse.sse)) {
      throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) +
                            "; try a smaller learning_rate");
    }
    out.net = std::move(lse.net);
    out.loss_history.push_back(lse.sse);
    const std::size_t k = out.loss_history.size();
    if (k >= 2 && std::abs(out.loss_history[k - 1] - out.loss_history[k - 2]) < cfg.tolerance) break;
    apply_premise_step(out.net, premise_gradients(out.net, samples), cfg.learning_rate);
  }
  auto closing = fit_consequents_lse(out.net, samples);
  if (!std::isfinite(closing.sse)) throw DivergenceError("loss became non-finite; try a smaller learning_rate");
  // Only adopt the closing fit when it does not lose accuracy (it cannot in
  // exact arithmetic; guard against round-off in rank-deficient solves).
  if (closing.sse <= sum_squared_error(out.net, samples)) out.net = std::move(closing.net);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence: JSON object
//   {"format": "nfseer.anfis", "version": 1, "input_domain": [lo, hi],
//    "rules": [{"a":..,"b":..,"c":..,"p":..,"r":..}, ...]}
// Numbers are written in shortest round-trip form, so read(write(net)) == net.

inline nlohmann::json anfis_to_json(const AnfisNet& net) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& rule : net.rules) {
    rules.push_back({{"a", rule.mf.a}, {"b", rule.mf.b}, {"c", rule.mf.c}, {"p", rule.out.p}, {"r", rule.out.r}});
  }
  return {{"format", "nfseer.anfis"},
          {"version", 1},
          {"input_domain", {net.input_domain.lo, net.input_domain.hi}},
          {"rules", rules}};
}

inline AnfisNet anfis_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "nfseer.anfis") throw ParseError("not an ANFIS model document");
    if (doc.at("version") != 1) throw ParseError("unsupported ANFIS model version");
    AnfisNet net;
    const auto& domain = doc.at("input_domain");
    net.input_domain = {domain.at(0).get<double>(), domain.at(1).get<double>()};
    for (const auto& r : doc.at("rules")) {
      net.rules.push_back({{r.at("a").get<double>(), r.at("b").get<double>(), r.at("c").get<double>()},
                           {r.at("p").get<double>(), r.at("r").get<double>()}});
    }
    validate(net);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed ANFIS model: ") + e.what());
  }
}

inline std::string write_anfis(const AnfisNet& net) { return anfis_to_json(net).dump(2) + "\n"; }

inline AnfisNet read_anfis(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed ANFIS model: ") + e.what());
  }
  return anfis_from_json(doc);
}

}  // namespace nfseer
