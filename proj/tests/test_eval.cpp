#include <nfseer/evaluation.hpp>
#include <nfseer/mann_whitney.hpp>
#include <nfseer/metrics.hpp>
#include <nfseer/plots.hpp>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace nfseer;

namespace {

using Vec = std::vector<double>;

const NfBank& anchor_bank() {
  static const NfBank bank = init_from_anchors(default_parameter_specs());
  return bank;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nfseer_eval_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

// ---------------------------------------------------------------------------
// Accuracy metrics

TEST(Metrics, Examples) {
  EXPECT_DOUBLE_EQ(mre(100, 150), 0.5);
  EXPECT_DOUBLE_EQ(mre(200, 100), 0.5);
  EXPECT_NEAR(mmre(Vec{100, 200}, Vec{110, 180}), 0.1, 1e-15);
  EXPECT_DOUBLE_EQ(mse(Vec{1, 2}, Vec{2, 4}), 2.5);
}

TEST(Metrics, MedianOddAndEven) {
  // Actual 1 makes MRE equal to |1 - predicted|.
  EXPECT_NEAR(mdmre(Vec{1, 1, 1}, Vec{1.1, 0.8, 1.9}), 0.2, 1e-15);
  EXPECT_NEAR(mdmre(Vec{1, 1}, Vec{0.9, 1.3}), 0.2, 1e-15);
}

TEST(Metrics, PredCountsInclusiveThreshold) {
  EXPECT_DOUBLE_EQ(pred(Vec{1, 1, 1, 1}, Vec{1.1, 0.75, 1.31, 0.4}, 0.3), 0.5);
  EXPECT_DOUBLE_EQ(pred(Vec{4}, Vec{5}, 0.25), 1.0);
  EXPECT_THROW(pred(Vec{1}, Vec{1}, 0.0), DomainError);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(mmre(Vec{}, Vec{}), ArgumentError);
  EXPECT_THROW(mse(Vec{1, 2}, Vec{1}), ArgumentError);
  EXPECT_THROW(mre(0, 1), DomainError);
  EXPECT_THROW(mre(-1, 1), DomainError);
}

TEST(Metrics, TenRecordFixture) {
  const Vec actual{12, 40.5, 7, 300, 98, 2.4, 61, 15, 880, 33};
  const Vec predicted{10, 52, 7.7, 210, 101, 4.1, 58, 22, 640, 30};
  Vec m;
  double sum = 0, sq = 0;
  int in30 = 0, in50 = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double diff = actual[i] > predicted[i] ? actual[i] - predicted[i] : predicted[i] - actual[i];
    m.push_back(diff / actual[i]);
    sum += m.back();
    sq += diff * diff;
    in30 += m.back() <= 0.3;
    in50 += m.back() <= 0.5;
  }
  std::sort(m.begin(), m.end());
  const auto s = compute_metrics(actual, predicted);
  EXPECT_NEAR(s.mmre, sum / 10, 1e-12);
  EXPECT_NEAR(s.mdmre, (m[4] + m[5]) / 2, 1e-12);
  EXPECT_NEAR(s.pred30, in30 / 10.0, 1e-12);
  EXPECT_NEAR(s.pred50, in50 / 10.0, 1e-12);
  EXPECT_NEAR(s.mse, sq / 10, 1e-12 * sq);
  EXPECT_EQ(s.n, 10u);
}

TEST(Metrics, ScaleEquivariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1, 1000), scale(0.01, 100);
  for (int t = 0; t < 200; ++t) {
    Vec a(15), p(15);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng);
      p[i] = u(rng);
    }
    const double c = scale(rng);
    Vec ca = a, cp = p;
    for (auto& v : ca) v *= c;
    for (auto& v : cp) v *= c;
    const auto m1 = compute_metrics(a, p), m2 = compute_metrics(ca, cp);
    EXPECT_NEAR(m1.mmre, m2.mmre, 1e-12 * m1.mmre);
    EXPECT_NEAR(m1.mdmre, m2.mdmre, 1e-12 * m1.mdmre);
    EXPECT_NEAR(m2.mse, c * c * m1.mse, 1e-12 * m2.mse);
  }
}

TEST(Metrics, PredMonotoneInThreshold) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1, 100);
  Vec a(50), p(50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    p[i] = u(rng);
  }
  double last = 0.0;
  for (double x = 0.05; x < 100.0; x += 0.05) {
    const double v = pred(a, p, x);
    EXPECT_GE(v, last);
    EXPECT_LE(v, 1.0);
    last = v;
  }
  EXPECT_EQ(last, 1.0);
}

// ---------------------------------------------------------------------------
// Mann-Whitney U

TEST(MannWhitney, SeparatedSamples) {
  const auto r = mann_whitney_u(Vec{1, 2, 3}, Vec{4, 5, 6});
  EXPECT_EQ(r.u_a, 0.0);
  EXPECT_EQ(r.u_b, 9.0);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_two_sided, 0.1, 1e-15);
}

TEST(MannWhitney, SingleTie) {
  const auto r = mann_whitney_u(Vec{1}, Vec{1});
  EXPECT_EQ(r.u_a, 0.5);
  EXPECT_EQ(r.u_b, 0.5);
  EXPECT_EQ(r.p_two_sided, 1.0);
}

TEST(MannWhitney, Midranks) {
  EXPECT_EQ(midranks(Vec{10, 20, 20, 5}), (Vec{2, 3.5, 3.5, 1}));
}

TEST(MannWhitney, ExactMatchesEnumeration) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> value(0, 6);
  for (std::size_t na = 1; na <= 7; ++na) {
    for (std::size_t nb = 1; nb <= 7; ++nb) {
      for (int rep = 0; rep < 3; ++rep) {
        Vec a(na), b(nb);
        for (auto& v : a) v = value(rng);
        for (auto& v : b) v = value(rng);
        const auto r = mann_whitney_u(a, b, MannWhitneyMethod::exact);
        ASSERT_EQ(r.u_a, oracle::u_by_pairs(a, b));
        ASSERT_EQ(r.u_a + r.u_b, static_cast<double>(na * nb));
        Vec pooled = a;
        pooled.insert(pooled.end(), b.begin(), b.end());
        const double p = oracle::exact_p(oracle::null_u(pooled, na), r.u_a, na, nb);
        ASSERT_NEAR(r.p_two_sided, p, 1e-12) << na << "x" << nb << " rep " << rep;
      }
    }
  }
}

TEST(MannWhitney, Symmetric) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    Vec a(5 + t % 20), b(3 + t % 13);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng) + 0.5;
    const auto ab = mann_whitney_u(a, b), ba = mann_whitney_u(b, a);
    EXPECT_EQ(ab.u_a, ba.u_b);
    EXPECT_NEAR(ab.p_two_sided, ba.p_two_sided, 1e-14);
  }
}

TEST(MannWhitney, NormalApproximationCloseToExact) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    Vec a(8), b(8);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng) + 0.8;
    const auto exact = mann_whitney_u(a, b, MannWhitneyMethod::exact);
    const auto approx = mann_whitney_u(a, b, MannWhitneyMethod::normal);
    EXPECT_FALSE(approx.exact);
    worst = std::max(worst, std::abs(exact.p_two_sided - approx.p_two_sided));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(MannWhitney, AutomaticSwitchesAtLimit) {
  const Vec a{1, 2, 3, 4, 5, 6, 7, 8}, b{1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5};
  Vec a9 = a;
  a9.push_back(9);
  EXPECT_TRUE(mann_whitney_u(a, b).exact);
  EXPECT_FALSE(mann_whitney_u(a9, b).exact);
}

TEST(MannWhitney, EmptySampleIsError) { EXPECT_THROW(mann_whitney_u(Vec{}, Vec{1}), ArgumentError); }

// ---------------------------------------------------------------------------
// Plot data

TEST(Plots, TukeyHinges) {
  const auto r = boxplot_record({"m", {5, 3, 1, 4, 2}});
  EXPECT_EQ(r.median, 3.0);
  EXPECT_EQ(r.q1, 2.0);
  EXPECT_EQ(r.q3, 4.0);
  EXPECT_EQ(r.whisker_low, 1.0);
  EXPECT_EQ(r.whisker_high, 5.0);
  EXPECT_TRUE(r.outliers.empty());
  const auto even = boxplot_record({"m", {1, 2, 3, 4, 5, 6}});
  EXPECT_EQ(even.q1, 2.0);
  EXPECT_EQ(even.q3, 5.0);
  EXPECT_EQ(even.median, 3.5);
}

TEST(Plots, Outlier) {
  const auto r = boxplot_record({"m", {1, 2, 3, 4, 100}});
  EXPECT_EQ(r.outliers, Vec{100});
  EXPECT_EQ(r.whisker_high, 4.0);
  EXPECT_EQ(r.max, 100.0);
}

TEST(Plots, ConstantSample) {
  const auto b = boxplot_record({"m", {2, 2, 2}});
  EXPECT_EQ(b.q1, 2.0);
  EXPECT_EQ(b.q3, 2.0);
  EXPECT_TRUE(b.outliers.empty());
  const auto i = interval_record({"m", {2, 2, 2}});
  EXPECT_EQ(i.sd, 0.0);
  EXPECT_EQ(i.ci_low, 2.0);
  EXPECT_EQ(i.ci_high, 2.0);
}

TEST(Plots, StudentInterval) {
  const auto r = interval_record({"m", {1, 2, 3, 4, 5}});
  EXPECT_NEAR(r.t_quantile, 2.7764451051977987, 1e-12);
  EXPECT_EQ(r.mean, 3.0);
  EXPECT_NEAR(r.sd, std::sqrt(2.5), 1e-15);
  EXPECT_NEAR(r.ci_high - r.mean, 2.7764451051977987 * std::sqrt(2.5) / std::sqrt(5.0), 1e-12);
  const auto one = interval_record({"m", {7}});
  EXPECT_EQ(one.t_quantile, 0.0);
  EXPECT_EQ(one.ci_low, 7.0);
}

TEST(Plots, EmitsFiles) {
  const auto dir = scratch("plots") / "nested";
  const auto files = emit_plot_data({{"a", {1, 2, 3}}, {"b", {2, 4, 8}}}, dir);
  EXPECT_EQ(files.intervals.size(), 2u);
  for (const char* f : {"interval.csv", "boxplot.csv", "interval.svg", "boxplot.svg"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto csv_text = csv::read_file((dir / "boxplot.csv").string());
  EXPECT_EQ(std::count(csv_text.begin(), csv_text.end(), '\n'), 3);
}

TEST(Plots, UnwritableDirectoryIsIoError) {
  const auto dir = scratch("blocked");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_plot_data({{"a", {1, 2}}}, dir / "file" / "plots"), IoError);
}

// ---------------------------------------------------------------------------
// Cross-validation

TEST(CrossValidate, SelfComparisonIsNull) {
  const auto world = synthetic::make_world(3, 40, 0, 0.2);
  const auto plan = split_kfold(world.projects, 5, 1);
  const auto b = baseline_builder(anchor_bank());
  const auto r = cross_validate(world.projects, plan, b, b);
  EXPECT_EQ(r.baseline, r.candidate);
  EXPECT_EQ(r.improvement.mmre, 0.0);
  EXPECT_EQ(r.improvement.mdmre, 0.0);
  EXPECT_EQ(r.improvement.pred30, 0.0);
  EXPECT_EQ(r.improvement.pred50, 0.0);
  EXPECT_EQ(r.improvement.mse, 0.0);
  EXPECT_EQ(r.relative_mmre_improvement, 0.0);
  EXPECT_EQ(r.u_statistic, 800.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(CrossValidate, PerfectCandidate) {
  const auto world = synthetic::make_world(4, 30, 0, 0.3);
  const auto plan = split_kfold(world.projects, 3, 9);
  const Builder perfect = [](const std::vector<ProjectRecord>&) -> Predictor {
    return [](const ProjectRecord& p) { return p.actual_effort_pm; };
  };
  const auto r = cross_validate(world.projects, plan, baseline_builder(anchor_bank()), perfect);
  EXPECT_EQ(r.candidate.mmre, 0.0);
  EXPECT_EQ(r.candidate.pred30, 1.0);
  EXPECT_EQ(r.improvement.mmre, r.baseline.mmre);
  EXPECT_EQ(r.relative_mmre_improvement, 1.0);
  EXPECT_EQ(r.predictions.size(), 30u);
  EXPECT_LT(r.p_value, 0.01);
}

TEST(CrossValidate, ReportArithmetic) {
  const auto world = synthetic::make_world(5, 25, 0, 0.3);
  const auto plan = split_kfold(world.projects, 5, 2);
  const Builder halve = [](const std::vector<ProjectRecord>&) -> Predictor {
    return [](const ProjectRecord& p) { return 0.5 * p.actual_effort_pm + 1.0; };
  };
  const auto r = cross_validate(world.projects, plan, baseline_builder(anchor_bank()), halve);
  Vec a, b, c;
  for (const auto& p : r.predictions) {
    a.push_back(p.actual);
    b.push_back(p.baseline);
    c.push_back(p.candidate);
    EXPECT_EQ(p.fold, plan.assignments.at(p.id));
  }
  EXPECT_EQ(r.baseline, compute_metrics(a, b));
  EXPECT_EQ(r.candidate, compute_metrics(a, c));
  EXPECT_EQ(r.improvement.mmre, r.baseline.mmre - r.candidate.mmre);
  EXPECT_EQ(r.improvement.pred30, r.candidate.pred30 - r.baseline.pred30);
  EXPECT_EQ(r.improvement.mse, r.baseline.mse - r.candidate.mse);
  EXPECT_EQ(r.relative_mmre_improvement, (r.baseline.mmre - r.candidate.mmre) / r.baseline.mmre);
  std::size_t total = 0;
  for (const auto& f : r.per_fold) {
    EXPECT_TRUE(f.ok);
    EXPECT_EQ(f.n_train + f.n_test, 25u);
    total += f.n_test;
  }
  EXPECT_EQ(total, 25u);
  Vec rb, rc;
  for (const auto& p : r.predictions) {
    rb.push_back(std::abs(p.actual - p.baseline));
    rc.push_back(std::abs(p.actual - p.candidate));
  }
  EXPECT_EQ(r.u_statistic, oracle::u_by_pairs(rb, rc));
}

TEST(CrossValidate, FailedFoldIsReported) {
  const auto world = synthetic::make_world(6, 20, 0, 0.2);
  const auto plan = split_kfold(world.projects, 4, 3);
  const std::string poison = world.projects[0].id;
  const Builder fragile = [poison](const std::vector<ProjectRecord>& train) -> Predictor {
    for (const auto& p : train) {
      if (p.id == poison) return [](const ProjectRecord& q) { return q.actual_effort_pm; };
    }
    throw Error("poisoned fold");
  };
  const auto r = cross_validate(world.projects, plan, baseline_builder(anchor_bank()), fragile);
  const int bad = plan.assignments.at(poison);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("fold " + std::to_string(bad)), std::string::npos);
  EXPECT_NE(r.warnings[0].find("poisoned fold"), std::string::npos);
  EXPECT_FALSE(r.per_fold[static_cast<std::size_t>(bad)].ok);
  EXPECT_EQ(r.predictions.size(), 15u);
  EXPECT_NE(format_summary(r).find("warning: fold"), std::string::npos);
}

TEST(CrossValidate, ParallelMatchesSequential) {
  const auto world = synthetic::make_world(7, 40, 2, 0.2);
  const auto plan = split_kfold(world.projects, 6, 4);
  const auto cand = trained_builder(anchor_bank(), TrainConfig{15, 0.01, 0.0, 0});
  const auto base = baseline_builder(anchor_bank());
  const auto seq = cross_validate(world.projects, plan, base, cand, {false});
  const auto par = cross_validate(world.projects, plan, base, cand, {true});
  EXPECT_EQ(write_report(seq), write_report(par));
}

TEST(CrossValidate, TrainedBankBeatsAnchorsOnSyntheticData) {
  const auto world = synthetic::make_world(42, 93, 6, 0.05);
  const auto plan = split_kfold(world.projects, 10, 42);
  const auto r = cross_validate(world.projects, plan, baseline_builder(anchor_bank()),
                                trained_builder(anchor_bank(), TrainConfig{100, 0.01, 0.0, 0}), {true});
  EXPECT_GT(r.improvement.mmre, 0.0);
  EXPECT_GT(r.improvement.mdmre, 0.0);
  EXPECT_GT(r.improvement.pred30, 0.0);
  EXPECT_GT(r.improvement.pred50, 0.0);
  EXPECT_GT(r.improvement.mse, 0.0);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(CrossValidate, ReportJsonShape) {
  const auto world = synthetic::make_world(8, 12, 0, 0.2);
  const auto plan = split_kfold(world.projects, 3, 1);
  const auto b = baseline_builder(anchor_bank());
  const auto doc = nlohmann::json::parse(write_report(cross_validate(world.projects, plan, b, b)));
  EXPECT_EQ(doc["format"], "nfseer.report");
  EXPECT_EQ(doc["k"], 3);
  EXPECT_EQ(doc["per_fold"].size(), 3u);
  EXPECT_EQ(doc["predictions"].size(), 12u);
  EXPECT_TRUE(doc["mann_whitney"].contains("p_two_sided"));
  const auto samples = mre_samples(cross_validate(world.projects, plan, b, b));
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].values, samples[1].values);
}

TEST(CrossValidate, UnknownProjectIsError) {
  const auto world = synthetic::make_world(9, 6, 0);
  auto plan = split_kfold(world.projects, 2, 1);
  plan.assignments.erase(world.projects[2].id);
  const auto b = baseline_builder(anchor_bank());
  EXPECT_THROW(cross_validate(world.projects, plan, b, b), ArgumentError);
}
