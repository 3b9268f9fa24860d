#include <nfseer/bank.hpp>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace nfseer;

namespace {

RatingLevel lvl(const char* token) { return parse_rating(token); }

const NfBank& default_bank() {
  static const NfBank bank = init_from_anchors(default_parameter_specs());
  return bank;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<ProjectRecord> random_projects(std::mt19937_64& rng, const std::vector<ParameterSpec>& specs,
                                           std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<ProjectRecord> out;
  for (std::size_t j = 0; j < n; ++j) {
    ProjectRecord p;
    p.id = "p" + std::to_string(j);
    p.size_kloc = 5.0 + 100.0 * unit(rng);
    p.actual_effort_pm = 20.0 + 500.0 * unit(rng);
    for (const auto& s : specs) {
      if (unit(rng) < 0.2) continue;
      const auto idx = std::min(s.anchors.size() - 1, static_cast<std::size_t>(unit(rng) * s.anchors.size()));
      p.ratings[s.name] = s.anchors[idx].level;
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Effort equation

TEST(SeerSem, EffectiveTechnologyExamples) {
  EXPECT_DOUBLE_EQ(effective_technology(5000.0, {{"A", 1.0}, {"B", 1.0}}), 5000.0);
  EXPECT_DOUBLE_EQ(effective_technology(5000.0, {{"A", 2.0}, {"B", 0.5}}), 5000.0);
  EXPECT_NEAR(effective_technology(5000.0, {{"A", 1.2}}), 4166.666666666667, 1e-9);
  EXPECT_THROW(effective_technology(5000.0, {{"A", 0.0}}), DomainError);
  EXPECT_THROW(effective_technology(-1.0, {}), DomainError);
}

TEST(SeerSem, LifecycleEffortExamples) {
  EXPECT_DOUBLE_EQ(lifecycle_effort({100.0, 1.0, 100.0, 1.0}), 1.0);
  const double k1 = lifecycle_effort({50.0, 1.7, 20.0, 1.0});
  const double k2 = lifecycle_effort({100.0, 1.7, 20.0, 1.0});
  EXPECT_NEAR(k2 / k1, 2.29740, 5e-6);
  EXPECT_NEAR(lifecycle_effort({3.0, 2.0, 3.0, 1.0}), 1.31951, 5e-6);
  EXPECT_THROW(lifecycle_effort({0.0, 1.0, 1.0, 1.0}), DomainError);
  EXPECT_THROW(lifecycle_effort({1.0, -1.0, 1.0, 1.0}), DomainError);
}

TEST(SeerSem, DevelopmentEffortExamples) {
  const auto one = development_effort(1.0);
  EXPECT_EQ(one.e_person_years, 0.393469);
  EXPECT_DOUBLE_EQ(one.e_person_months, 12.0 * 0.393469);
  EXPECT_NEAR(development_effort(10.0).e_person_years, 3.93469, 1e-12);
  EXPECT_LT(development_effort(1e-300).e_person_years, 1e-299);
  EXPECT_THROW(development_effort(0.0), DomainError);
}

TEST(SeerSem, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lg(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const SeerInputs in{std::pow(10.0, lg(rng)), std::pow(10.0, lg(rng) / 3.0), std::pow(10.0, lg(rng)), 1.0};
    const double k = lifecycle_effort(in);
    const auto e = development_effort(k);
    EXPECT_EQ(e.e_person_years, kDevelopmentFraction * k);
    EXPECT_NEAR(e.e_person_years / k, kDevelopmentFraction, 4e-16);
    EXPECT_EQ(e.e_person_months, 12.0 * e.e_person_years);
    const double f = 1.0 + std::pow(10.0, lg(rng) - 4.0);
    EXPECT_GT(lifecycle_effort({in.se * f, in.d, in.cte, 1.0}), k);
    EXPECT_GT(lifecycle_effort({in.se, in.d * f, in.cte, 1.0}), k);
    EXPECT_LT(lifecycle_effort({in.se, in.d, in.cte * f, 1.0}), k);
  }
}

TEST(SeerSem, RaisingAnIncreasingMultiplierRaisesEffort) {
  const auto& bank = default_bank();
  ProjectRecord p{"x", "", DevelopmentMode::organic, 40.0, 1.0, {{"MULT", lvl("Nom")}}, {}};
  const double base = estimate(p, bank);
  p.ratings["MULT"] = lvl("Hi");
  EXPECT_GT(estimate(p, bank), base);
  p.ratings["MULT"] = lvl("Nom");
  p.ratings["ACAP"] = lvl("VHi");
  EXPECT_LT(estimate(p, bank), base);
}

TEST(Estimate, ChainedIdentity) {
  NfBank bank = default_bank();
  bank.ctb = 37.5;
  const ProjectRecord p{"id", "", DevelopmentMode::organic, 37.5, 1.0, {}, {}};
  EXPECT_NEAR(estimate(p, bank), 4.721628, 1e-9);
}

TEST(Estimate, MatchesExplicitChaining) {
  const auto specs = default_parameter_specs();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  NfBank bank = default_bank();
  for (int trial = 0; trial < 200; ++trial) {
    bank.ctb = u(rng) * 10.0;
    bank.d = u(rng);
    auto p = random_projects(rng, specs, 1).front();
    std::vector<double> m;
    for (const auto& s : specs) {
      const auto it = p.ratings.find(s.name);
      m.push_back(it == p.ratings.end() ? s.nominal()
                                        : std::max(1e-3, oracle::anfis_layers(bank.submodels.at(s.name),
                                                                              it->second.ordinal())));
    }
    const double want = oracle::effort_pm(p.size_kloc, bank.d, bank.ctb, m);
    EXPECT_LE(rel(estimate(p, bank), want), 1e-9);
  }
}

TEST(Estimate, AllNominalMatchesChaining) {
  const auto& bank = default_bank();
  ProjectRecord p{"nom", "", DevelopmentMode::organic, 12.0, 1.0, {}, {}};
  std::vector<double> m;
  for (const auto& [name, spec] : bank.specs) {
    p.ratings[name] = RatingLevel{};
    m.push_back(oracle::anfis_layers(bank.submodels.at(name), 3.0));
  }
  EXPECT_LE(rel(estimate(p, bank), oracle::effort_pm(12.0, bank.d, bank.ctb, m)), 1e-9);
}

TEST(Estimate, DoublingSizeScalesByPower) {
  const auto& bank = default_bank();
  ProjectRecord p{"a", "", DevelopmentMode::organic, 10.0, 1.0, {{"ACAP", lvl("Hi")}, {"TOOL", lvl("Nom+")}}, {}};
  const double e1 = estimate(p, bank);
  p.size_kloc = 20.0;
  EXPECT_NEAR(estimate(p, bank) / e1, std::pow(2.0, 1.2), 1e-12);
}

TEST(Estimate, ErrorsCarryTheProjectId) {
  const auto& bank = default_bank();
  const ProjectRecord p{"bad-1", "", DevelopmentMode::organic, 0.0, 1.0, {}, {}};
  try {
    estimate(p, bank);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-1"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Sub-model initialization

TEST(Init, ConstantTableIsExact) {
  const ParameterSpec spec{"K", Direction::increases_effort,
                           {{lvl("Low"), 1.0}, {lvl("Nom"), 1.0}, {lvl("Hi"), 1.0}, {lvl("VHi"), 1.0}}};
  const auto [net, history] = init_submodel(spec);
  for (double x = 2.0; x <= 5.0; x += 0.03) EXPECT_NEAR(anfis_eval(net, x), 1.0, 1e-9);
  ASSERT_FALSE(history.empty());
  EXPECT_LT(history.back(), 1e-18);
}

TEST(Init, FiveLevelTableWithinOnePercent) {
  const ParameterSpec spec{"F",
                           Direction::decreases_effort,
                           {{lvl("VLo"), 1.46}, {lvl("Low"), 1.19}, {lvl("Nom"), 1.0}, {lvl("Hi"), 0.86}, {lvl("VHi"), 0.71}}};
  const auto net = init_submodel(spec).first;
  for (const auto& a : spec.anchors) EXPECT_LE(rel(anfis_eval(net, a.level.ordinal()), a.multiplier), 0.01);
  EXPECT_TRUE(monotonicity_violations("F", net, spec.direction).empty());
}

TEST(Init, TwoLevelTableIsExact) {
  const ParameterSpec spec{"T", Direction::increases_effort, {{lvl("Low"), 0.9}, {lvl("Hi"), 1.1}}};
  const auto net = init_submodel(spec).first;
  const double e1 = anfis_eval(net, 2.0) - 0.9, e2 = anfis_eval(net, 4.0) - 1.1;
  EXPECT_LT(e1 * e1 + e2 * e2, 1e-10);
}

TEST(Init, RejectsInvalidTables) {
  EXPECT_THROW(init_submodel({"N", Direction::increases_effort, {{lvl("Low"), 1.1}, {lvl("Hi"), 0.9}}}), SpecError);
  EXPECT_THROW(init_submodel({"N", Direction::increases_effort, {{lvl("Nom"), 1.0}}}), SpecError);
  EXPECT_THROW(init_submodel({"N", Direction::increases_effort, {{lvl("Low"), 0.0}, {lvl("Hi"), 1.0}}}), SpecError);
  EXPECT_THROW(init_submodel({"N", Direction::increases_effort, {{lvl("Hi"), 1.0}, {lvl("Low"), 1.0}}}), SpecError);
  const ParameterSpec ok{"D", Direction::increases_effort, {{lvl("Low"), 0.9}, {lvl("Hi"), 1.1}}};
  EXPECT_THROW(init_from_anchors({ok, ok}), SpecError);
}

TEST(Init, EveryDefaultAnchorWithinOnePercent) {
  const auto specs = default_parameter_specs();
  ASSERT_GE(specs.size(), 18u);
  const auto& bank = default_bank();
  for (const auto& s : specs) {
    for (const auto& a : s.anchors) {
      EXPECT_LE(rel(submodel_multiplier(bank, s.name, a.level.ordinal()), a.multiplier), 0.01)
          << s.name << " " << to_string(a.level);
    }
  }
  EXPECT_TRUE(monotonicity_check(bank).empty());
}

TEST(DefaultSpecs, GeometricLadder) {
  const auto specs = default_parameter_specs();
  const auto acap = std::find_if(specs.begin(), specs.end(), [](const auto& s) { return s.name == "ACAP"; });
  ASSERT_NE(acap, specs.end());
  EXPECT_EQ(acap->direction, Direction::decreases_effort);
  EXPECT_EQ(acap->anchors.front().level, lvl("VLo-"));
  EXPECT_NEAR(*acap->anchor_at(lvl("VLo-")), std::pow(1.08, 2.5), 1e-12);
  EXPECT_EQ(*acap->anchor_at(lvl("Nom")), 1.0);
  const auto mult = std::find_if(specs.begin(), specs.end(), [](const auto& s) { return s.name == "MULT"; });
  ASSERT_NE(mult, specs.end());
  EXPECT_EQ(mult->direction, Direction::increases_effort);
  EXPECT_NEAR(*mult->anchor_at(lvl("XHi")), std::pow(1.08, 3.0), 1e-12);
}

// ---------------------------------------------------------------------------
// Bank evaluation

TEST(BankEvaluate, AnchorsEmptyAndMidway) {
  const auto& bank = default_bank();
  std::map<std::string, double> at_anchors;
  for (const auto& [name, spec] : bank.specs) at_anchors[name] = spec.anchors.back().level.ordinal();
  for (const auto& [name, m] : bank_evaluate(bank, at_anchors)) {
    EXPECT_LE(rel(m, bank.specs.at(name).anchors.back().multiplier), 0.01) << name;
  }
  const auto nominal = bank_evaluate(bank, std::map<std::string, double>{});
  EXPECT_EQ(nominal.size(), bank.specs.size());
  for (const auto& [name, m] : nominal) EXPECT_EQ(m, 1.0);

  const double nom = submodel_multiplier(bank, "MULT", 3.0), hi = submodel_multiplier(bank, "MULT", 4.0);
  const double mid = bank_evaluate(bank, std::map<std::string, RatingLevel>{{"MULT", lvl("Nom+")}}).at("MULT");
  EXPECT_GT(mid, nom);
  EXPECT_LT(mid, hi);
}

TEST(BankEvaluate, Errors) {
  const auto& bank = default_bank();
  EXPECT_THROW(bank_evaluate(bank, std::map<std::string, double>{{"NOPE", 3.0}}), DataError);
  EXPECT_THROW(bank_evaluate(bank, std::map<std::string, double>{{"AEXP", 7.0}}), DomainError);
}

TEST(BankEvaluate, OutputsStayPositive) {
  const auto& bank = default_bank();
  for (const auto& [name, net] : bank.submodels) {
    for (std::size_t k = 0; k < 201; ++k) {
      const double x = net.input_domain.lo + (net.input_domain.hi - net.input_domain.lo) * k / 200.0;
      EXPECT_GT(submodel_multiplier(bank, name, x), 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Monotonicity check

TEST(Monotonicity, ReportsExactlyTheDippingPairs) {
  NfBank bank;
  const ParameterSpec spec{"DIP", Direction::increases_effort, {{lvl("VLo"), 0.5}, {lvl("Low"), 1.0}, {lvl("Nom"), 2.0}}};
  AnfisNet net{{{{0.4, 2.0, 1.0}, {0.0, 1.0}}, {{0.4, 2.0, 2.0}, {0.0, 0.5}}, {{0.4, 2.0, 3.0}, {0.0, 2.0}}},
               {1.0, 3.0}};
  bank.specs.emplace("DIP", spec);
  bank.submodels.emplace("DIP", net);
  std::vector<std::size_t> want;
  double prev = std::max(1e-3, oracle::anfis_layers(net, 1.0));
  for (std::size_t k = 1; k < 101; ++k) {
    const double y = std::max(1e-3, oracle::anfis_layers(net, 1.0 + 2.0 * k / 100.0));
    if (y - prev < -1e-9) want.push_back(k - 1);
    prev = y;
  }
  ASSERT_FALSE(want.empty());
  std::vector<std::size_t> got;
  for (const auto& v : monotonicity_check(bank)) {
    EXPECT_EQ(v.parameter, "DIP");
    got.push_back(v.grid_index);
  }
  EXPECT_EQ(got, want);
}

TEST(Monotonicity, ConstantSubmodelHasNoViolations) {
  NfBank bank;
  bank.specs.emplace("C", ParameterSpec{"C", Direction::decreases_effort, {{lvl("Nom"), 1.0}}});
  bank.submodels.emplace("C", AnfisNet{{{{1.0, 1.0, 3.0}, {0.0, 1.0}}}, {3.0, 3.0}});
  EXPECT_TRUE(monotonicity_check(bank).empty());
}

// ---------------------------------------------------------------------------
// Training

TEST(BankTrain, ZeroEpochsIsIdentity) {
  const auto world = synthetic::make_world(1, 20, 0);
  const auto res = bank_train(default_bank(), world.projects, {0, 0.01, 0.0, 1});
  EXPECT_EQ(res.bank, default_bank());
  EXPECT_TRUE(res.loss_history.empty());
}

TEST(BankTrain, RejectsBadData) {
  auto world = synthetic::make_world(2, 10, 0);
  world.projects[3].actual_effort_pm = 0.0;
  try {
    bank_train(default_bank(), world.projects, {5, 0.01, 0.0, 1});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(world.projects[3].id), std::string::npos);
  }
  EXPECT_THROW(bank_train(default_bank(), synthetic::make_world(2, 1, 0).projects, {5, 0.01, 0.0, 1}),
               ArgumentError);
}

TEST(BankTrain, CtbStepNeverIncreasesLoss) {
  const auto world = synthetic::make_world(3, 60, 0, 0.3);
  const auto res = bank_train(default_bank(), world.projects, {30, 0.01, 0.0, 3});
  ASSERT_EQ(res.ctb_steps.size(), 30u);
  for (const auto& s : res.ctb_steps) EXPECT_LE(s.loss_after, s.loss_before * (1.0 + 1e-12));
}

TEST(BankTrain, CalibrateCtbIsLossOptimal) {
  const auto world = synthetic::make_world(4, 40, 0, 0.4);
  const auto cal = calibrate_ctb(default_bank(), world.projects);
  const double best = bank_loss(cal, world.projects);
  for (double f : {0.9, 0.99, 0.999, 1.001, 1.01, 1.1}) {
    auto moved = cal;
    moved.ctb *= f;
    EXPECT_GT(bank_loss(moved, world.projects), best);
  }
}

TEST(BankTrain, RecoversSyntheticMultipliers) {
  const auto world = synthetic::make_world(42, 93, 6);
  const auto res = bank_train(default_bank(), world.projects, {200, 0.01, 0.0, 42});
  ASSERT_FALSE(res.loss_history.empty());
  EXPECT_LT(res.loss_history.back(), 1e-4);
  EXPECT_LT(synthetic::worst_relative_recovery(res.bank, world.specs), 0.05);
  EXPECT_TRUE(monotonicity_check(res.bank).empty());
}

TEST(BankTrain, InfeasiblePerturbationStaysMonotone) {
  auto world = synthetic::make_world(8, 93, 6);
  // ACAP lowers effort, so inflating effort at ACAP=Hi asks for a bump the
  // declared direction forbids.
  for (auto& p : world.projects) {
    if (p.ratings.at("ACAP") == lvl("Hi")) p.actual_effort_pm *= 1.4;
  }
  const auto res = bank_train(default_bank(), world.projects, {60, 0.01, 0.0, 8});
  EXPECT_TRUE(monotonicity_check(res.bank).empty());
  const auto unconstrained =
      bank_train(default_bank(), world.projects, {60, 0.01, 0.0, 8}, BankTrainOptions{false, 2.0, true});
  EXPECT_LE(res.loss_history.back(), unconstrained.loss_history.front());
}

TEST(BankTrain, Deterministic) {
  const auto world = synthetic::make_world(9, 50, 3, 0.2);
  const TrainConfig cfg{25, 0.01, 0.0, 9};
  const auto a = bank_train(default_bank(), world.projects, cfg);
  const auto b = bank_train(default_bank(), world.projects, cfg);
  EXPECT_EQ(a.bank, b.bank);
  EXPECT_EQ(write_bank(a.bank), write_bank(b.bank));
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(BankGradient, MatchesCentralDifferencesOn20Configs) {
  const auto specs = default_parameter_specs();
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> jit(-0.15, 0.15);
  const double h = 1e-4;
  for (int trial = 0; trial < 20; ++trial) {
    NfBank bank = default_bank();
    bank.ctb = 3.0 + trial;
    for (auto& [name, net] : bank.submodels) {
      for (auto& r : net.rules) {
        r.mf.a *= 1.0 + jit(rng);
        r.mf.b *= 1.0 + jit(rng);
        r.mf.c += 0.1 * jit(rng);
        r.out.r *= 1.0 + 0.1 * jit(rng);
      }
      repair_premises(net);
    }
    const auto projects = random_projects(rng, specs, 12);
    const auto grads = bank_premise_gradients(bank, projects);
    for (const auto& [name, net] : bank.submodels) {
      for (std::size_t i = 0; i < net.size(); ++i) {
        for (int which = 0; which < 3; ++which) {
          const auto shifted = [&](double step) {
            auto moved = bank;
            auto& mf = moved.submodels.at(name).rules[i].mf;
            (which == 0 ? mf.a : which == 1 ? mf.b : mf.c) += step;
            return bank_loss(moved, projects);
          };
          // Fourth-order stencil keeps rounding noise small when the loss is large.
          const double fd = (8.0 * (shifted(h) - shifted(-h)) - (shifted(2 * h) - shifted(-2 * h))) / (12.0 * h);
          const auto& g = grads.at(name)[i];
          const double an = which == 0 ? g.da : which == 1 ? g.db : g.dc;
          EXPECT_LE(std::abs(an - fd), 1e-4 * std::max(std::abs(an), std::abs(fd)) + 1e-7)
              << "trial " << trial << " " << name << " rule " << i << " param " << which;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Persistence

TEST(BankPersistence, RoundTrip) {
  const auto world = synthetic::make_world(12, 30, 0, 0.2);
  const auto trained = bank_train(default_bank(), world.projects, {5, 0.01, 0.0, 12}).bank;
  const auto text = write_bank(trained);
  const auto back = read_bank(text);
  EXPECT_EQ(back, trained);
  EXPECT_EQ(write_bank(back), text);
  EXPECT_THROW(read_bank("[]"), ParseError);
}

TEST(ParameterSpecs, CsvRoundTripAndShippedFile) {
  const auto specs = default_parameter_specs();
  EXPECT_EQ(parse_parameter_specs(format_parameter_specs(specs)), specs);
  EXPECT_EQ(load_parameter_specs(std::string(NFSEER_SOURCE_DIR) + "/data/parameter_specs.csv"), specs);
}

TEST(ParameterSpecs, NonMonotoneFileIsRejected) {
  EXPECT_THROW(parse_parameter_specs("parameter,direction,level,multiplier\n"
                                     "X,increases_effort,Low,1.1\nX,increases_effort,Hi,0.9\n"),
               SpecError);
}
