#pragma once

// Cross-validated comparison of a baseline estimator against a candidate,
// with pooled out-of-fold metrics and a Mann-Whitney test on residuals.

#include <nfseer/bank.hpp>
#include <nfseer/dataset.hpp>
#include <nfseer/error.hpp>
#include <nfseer/mann_whitney.hpp>
#include <nfseer/metrics.hpp>
#include <nfseer/plots.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <memory>
#include <string>
#include <vector>

namespace nfseer {

using Predictor = std::function<double(const ProjectRecord&)>;
/// Builds a predictor from a training subset. Must not touch shared mutable
/// state: folds may run concurrently.
using Builder = std::function<Predictor(const std::vector<ProjectRecord>& train)>;

enum class ResidualKind { absolute, raw };

inline std::string to_string(ResidualKind r) { return r == ResidualKind::absolute ? "absolute" : "raw"; }

inline ResidualKind parse_residual_kind(std::string_view text) {
  if (text == "absolute") return ResidualKind::absolute;
  if (text == "raw") return ResidualKind::raw;
  throw ParseError("unknown residual kind '" + std::string(text) + "'");
}

struct CrossValidateOptions {
  bool parallel = false;
  ResidualKind residuals = ResidualKind::absolute;
  MannWhitneyMethod method = MannWhitneyMethod::automatic;
};

struct RecordPrediction {
  std::string id;
  int fold = 0;
  double actual = 0.0;
  double baseline = 0.0;
  double candidate = 0.0;
};

struct FoldOutcome {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  bool ok = false;
  std::string error;
  MetricSet baseline;
  MetricSet candidate;
};

/// Positive values favour the candidate.
struct MetricDelta {
  double mmre = 0.0;
  double mdmre = 0.0;
  double pred30 = 0.0;
  double pred50 = 0.0;
  double mse = 0.0;
};

inline MetricDelta improvement(const MetricSet& baseline, const MetricSet& candidate) {
  return {baseline.mmre - candidate.mmre, baseline.mdmre - candidate.mdmre, candidate.pred30 - baseline.pred30,
          candidate.pred50 - baseline.pred50, baseline.mse - candidate.mse};
}

struct ComparisonReport {
  int k = 0;
  std::uint64_t seed = 0;
  ResidualKind residuals = ResidualKind::absolute;
  MetricSet baseline;
  MetricSet candidate;
  MetricDelta improvement;
  double relative_mmre_improvement = 0.0;  // (baseline - candidate) / baseline
  double u_statistic = 0.0;                // U of the baseline residual sample
  double p_value = 1.0;
  bool exact_p = false;
  std::vector<FoldOutcome> per_fold;
  std::vector<RecordPrediction> predictions;
  std::vector<std::string> warnings;
};

namespace detail {

struct FoldRun {
  FoldOutcome outcome;
  std::vector<RecordPrediction> predictions;
};

inline FoldRun run_fold(const std::vector<ProjectRecord>& projects, const FoldPlan& plan, int fold,
                        const Builder& baseline_builder, const Builder& candidate_builder) {
  FoldRun run;
  run.outcome.fold = fold;
  std::vector<ProjectRecord> train, test;
  for (const auto& p : projects) (plan.assignments.at(p.id) == fold ? test : train).push_back(p);
  run.outcome.n_train = train.size();
  run.outcome.n_test = test.size();
  try {
    const auto base = baseline_builder(train);
    const auto cand = candidate_builder(train);
    std::vector<double> actual, b, c;
    for (const auto& p : test) {
      RecordPrediction rp{p.id, fold, p.actual_effort_pm, base(p), cand(p)};
      actual.push_back(rp.actual);
      b.push_back(rp.baseline);
      c.push_back(rp.candidate);
      run.predictions.push_back(std::move(rp));
    }
    if (!test.empty()) {
      run.outcome.baseline = compute_metrics(actual, b);
      run.outcome.candidate = compute_metrics(actual, c);
    }
    run.outcome.ok = true;
  } catch (const std::exception& ex) {
    run.outcome.ok = false;
    run.outcome.error = ex.what();
    run.predictions.clear();
  }
  return run;
}

}  // namespace detail

inline ComparisonReport cross_validate(const std::vector<ProjectRecord>& projects, const FoldPlan& plan,
                                       const Builder& baseline_builder, const Builder& candidate_builder,
                                       const CrossValidateOptions& options = {}) {
  if (projects.empty()) throw ArgumentError("cross-validation needs projects");
  for (const auto& p : projects) {
    if (!plan.assignments.contains(p.id)) throw ArgumentError("project " + p.id + " is not in the fold plan");
  }
  std::vector<detail::FoldRun> runs(static_cast<std::size_t>(plan.k));
  if (options.parallel) {
    std::vector<std::future<detail::FoldRun>> jobs;
    for (int f = 0; f < plan.k; ++f) {
      jobs.push_back(std::async(std::launch::async, detail::run_fold, std::cref(projects), std::cref(plan), f,
                                std::cref(baseline_builder), std::cref(candidate_builder)));
    }
    for (int f = 0; f < plan.k; ++f) runs[static_cast<std::size_t>(f)] = jobs[static_cast<std::size_t>(f)].get();
  } else {
    for (int f = 0; f < plan.k; ++f) {
      runs[static_cast<std::size_t>(f)] = detail::run_fold(projects, plan, f, baseline_builder, candidate_builder);
    }
  }

  ComparisonReport report;
  report.k = plan.k;
  report.seed = plan.seed;
  report.residuals = options.residuals;
  for (auto& run : runs) {
    if (!run.outcome.ok) {
      report.warnings.push_back("fold " + std::to_string(run.outcome.fold) + " failed: " + run.outcome.error);
    }
    report.per_fold.push_back(run.outcome);
    for (auto& p : run.predictions) report.predictions.push_back(std::move(p));
  }
  if (report.predictions.empty()) throw Error("cross-validation failed in every fold");

  std::vector<double> actual, b, c, rb, rc;
  for (const auto& p : report.predictions) {
    actual.push_back(p.actual);
    b.push_back(p.baseline);
    c.push_back(p.candidate);
    const double db = p.actual - p.baseline, dc = p.actual - p.candidate;
    rb.push_back(options.residuals == ResidualKind::absolute ? std::abs(db) : db);
    rc.push_back(options.residuals == ResidualKind::absolute ? std::abs(dc) : dc);
  }
  report.baseline = compute_metrics(actual, b);
  report.candidate = compute_metrics(actual, c);
  report.improvement = improvement(report.baseline, report.candidate);
  report.relative_mmre_improvement =
      report.baseline.mmre > 0.0 ? report.improvement.mmre / report.baseline.mmre : 0.0;
  const auto mw = mann_whitney_u(rb, rc, options.method);
  report.u_statistic = mw.u_a;
  report.p_value = mw.p_two_sided;
  report.exact_p = mw.exact;
  return report;
}

// ---------------------------------------------------------------------------
// Bank-backed builders

inline Predictor bank_predictor(std::shared_ptr<const NfBank> bank) {
  return [bank](const ProjectRecord& p) { return estimate(p, *bank); };
}

/// Anchor bank with only ctb recalibrated on the training fold.
inline Builder baseline_builder(const NfBank& anchor_bank) {
  auto anchors = std::make_shared<const NfBank>(anchor_bank);
  return [anchors](const std::vector<ProjectRecord>& train) {
    return bank_predictor(std::make_shared<const NfBank>(calibrate_ctb(*anchors, train)));
  };
}

/// Anchor bank trained end to end on the training fold.
inline Builder trained_builder(const NfBank& anchor_bank, const TrainConfig& cfg, const BankTrainOptions& options = {}) {
  auto anchors = std::make_shared<const NfBank>(anchor_bank);
  return [anchors, cfg, options](const std::vector<ProjectRecord>& train) {
    return bank_predictor(std::make_shared<const NfBank>(bank_train(*anchors, train, cfg, options).bank));
  };
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::ordered_json to_json(const MetricSet& m) {
  return {{"mmre", m.mmre}, {"mdmre", m.mdmre}, {"pred30", m.pred30},
          {"pred50", m.pred50}, {"mse", m.mse}, {"n", m.n}};
}

inline nlohmann::ordered_json to_json(const MetricDelta& d) {
  return {{"mmre", d.mmre}, {"mdmre", d.mdmre}, {"pred30", d.pred30}, {"pred50", d.pred50}, {"mse", d.mse}};
}

inline nlohmann::ordered_json to_json(const ComparisonReport& r) {
  nlohmann::ordered_json doc;
  doc["format"] = "nfseer.report";
  doc["version"] = 1;
  doc["k"] = r.k;
  doc["seed"] = r.seed;
  doc["residuals"] = to_string(r.residuals);
  doc["baseline"] = to_json(r.baseline);
  doc["candidate"] = to_json(r.candidate);
  doc["improvement"] = to_json(r.improvement);
  doc["relative_mmre_improvement"] = r.relative_mmre_improvement;
  doc["mann_whitney"] = {{"u", r.u_statistic}, {"p_two_sided", r.p_value}, {"exact", r.exact_p}};
  auto folds = nlohmann::ordered_json::array();
  for (const auto& f : r.per_fold) {
    nlohmann::ordered_json jf{{"fold", f.fold}, {"n_train", f.n_train}, {"n_test", f.n_test}, {"ok", f.ok}};
    if (f.ok) {
      jf["baseline"] = to_json(f.baseline);
      jf["candidate"] = to_json(f.candidate);
    } else {
      jf["error"] = f.error;
    }
    folds.push_back(std::move(jf));
  }
  doc["per_fold"] = std::move(folds);
  auto preds = nlohmann::ordered_json::array();
  for (const auto& p : r.predictions) {
    preds.push_back({{"id", p.id}, {"fold", p.fold}, {"actual", p.actual}, {"baseline", p.baseline},
                     {"candidate", p.candidate}});
  }
  doc["predictions"] = std::move(preds);
  doc["warnings"] = r.warnings;
  return doc;
}

inline std::string write_report(const ComparisonReport& r) { return to_json(r).dump(2) + "\n"; }

/// Per-model MRE samples for the interval plot and boxplot.
inline std::vector<NamedSample> mre_samples(const ComparisonReport& r) {
  NamedSample b{"SEER-SEM", {}}, c{"Neuro-fuzzy SEER-SEM", {}};
  for (const auto& p : r.predictions) {
    b.values.push_back(mre(p.actual, p.baseline));
    c.values.push_back(mre(p.actual, p.candidate));
  }
  return {b, c};
}

/// Human-readable table: one row per model, the improvement row and the
/// significance test. PRED is shown in percent.
inline std::string format_summary(const ComparisonReport& r) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof line, "%-22s %8s %8s %11s %11s %14s\n", "Model", "MMRE", "MdMRE", "PRED(0.30)",
                "PRED(0.50)", "MSE");
  out += line;
  const auto row = [&](const char* name, const MetricSet& m) {
    std::snprintf(line, sizeof line, "%-22s %8.4f %8.4f %11.2f %11.2f %14.2f\n", name, m.mmre, m.mdmre,
                  100.0 * m.pred30, 100.0 * m.pred50, m.mse);
    out += line;
  };
  row("SEER-SEM", r.baseline);
  row("Neuro-fuzzy SEER-SEM", r.candidate);
  const auto& d = r.improvement;
  std::snprintf(line, sizeof line, "%-22s %7.2f%% %7.2f%% %10.2f%% %10.2f%% %14.2f\n", "Improvement", 100.0 * d.mmre,
                100.0 * d.mdmre, 100.0 * d.pred30, 100.0 * d.pred50, d.mse);
  out += line;
  std::snprintf(line, sizeof line, "Relative MMRE improvement: %.2f%%\n", 100.0 * r.relative_mmre_improvement);
  out += line;
  std::snprintf(line, sizeof line, "Mann-Whitney U (%s residuals): U = %.1f, p = %.4f%s\n",
                to_string(r.residuals).c_str(), r.u_statistic, r.p_value, r.exact_p ? " (exact)" : "");
  out += line;
  std::snprintf(line, sizeof line, "Projects: %zu, folds: %d, seed: %llu\n", r.baseline.n, r.k,
                static_cast<unsigned long long>(r.seed));
  out += line;
  for (const auto& w : r.warnings) out += "warning: " + w + "\n";
  return out;
}

}  // namespace nfseer
