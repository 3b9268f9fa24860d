// nfseer: convert, train, evaluate and predict with the neuro-fuzzy SEER-SEM
// effort model.

#include <nfseer/nfseer.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace nfseer;

namespace {

struct Paths {
  std::string data;
  std::string format = "seer-csv";
  std::string specs;
  std::string rosetta;
  std::string mapping;
  std::string config;
  std::string out = ".";
  std::string report;
  std::string plots;
  std::string model;
};

struct RunConfig {
  Paths paths;
  SeerConstants constants;
  TrainConfig train{100, 0.01, 0.0, 0};
  BankTrainOptions bank;
  int k = 10;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  bool cocomo81 = false;
  bool parallel = false;
  bool stratify = false;
  std::string residuals = "absolute";
  std::string candidate = "trained";
};

// Values from the config file, applied only where the flag was not given.
void apply_config(RunConfig& rc, const CLI::App& cmd) {
  if (rc.paths.config.empty()) return;
  const auto doc = nlohmann::json::parse(csv::read_file(rc.paths.config));
  const auto given = [&](const char* flag) {
    const auto* opt = cmd.get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  const auto take = [&](const nlohmann::json& obj, const char* key, auto& target, const char* flag) {
    if (obj.contains(key) && (flag == nullptr || !given(flag))) obj.at(key).get_to(target);
  };
  if (doc.contains("seer")) {
    const auto& s = doc.at("seer");
    take(s, "staffing_exponent", rc.constants.staffing_exponent, nullptr);
    take(s, "size_exponent", rc.constants.size_exponent, nullptr);
    take(s, "months_per_year", rc.constants.months_per_year, nullptr);
    take(s, "ctb", rc.constants.default_ctb, nullptr);
    take(s, "d", rc.constants.default_d, nullptr);
  }
  if (doc.contains("train")) {
    const auto& t = doc.at("train");
    take(t, "epochs", rc.train.epochs, "--epochs");
    take(t, "learning_rate", rc.train.learning_rate, "--lr");
    take(t, "tolerance", rc.train.tolerance, nullptr);
    take(t, "shrinkage", rc.bank.shrinkage, nullptr);
    take(t, "enforce_monotone", rc.bank.enforce_monotone, nullptr);
    take(t, "premise_step", rc.bank.premise_step, nullptr);
  }
  if (doc.contains("evaluate")) {
    const auto& e = doc.at("evaluate");
    take(e, "k", rc.k, "--k");
    take(e, "residuals", rc.residuals, "--residuals");
    take(e, "stratify", rc.stratify, nullptr);
  }
  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    // Relative paths are taken from the config file's directory.
    const fs::path base = fs::path(rc.paths.config).parent_path();
    const auto take_path = [&](const char* key, std::string& target, const char* flag) {
      if (!p.contains(key) || given(flag)) return;
      const fs::path value = p.at(key).get<std::string>();
      target = (value.is_absolute() ? value : base / value).string();
    };
    take_path("specs", rc.paths.specs, "--specs");
    take_path("rosetta", rc.paths.rosetta, "--rosetta");
    take_path("mapping", rc.paths.mapping, "--mapping");
  }
}

void require_seed(const RunConfig& rc) {
  if (!rc.seed) throw ArgumentError("--seed is required for this command");
}

fs::path out_dir(const RunConfig& rc) {
  fs::path dir = rc.paths.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  return dir;
}

struct Inputs {
  MappingTable table;
  std::optional<Rosetta> rosetta;
  std::vector<ParameterSpec> specs;
};

Inputs load_inputs(const RunConfig& rc) {
  Inputs in;
  in.table = rc.paths.mapping.empty() ? default_mapping_table() : load_mapping_table(rc.paths.mapping);
  if (!rc.paths.rosetta.empty()) {
    in.rosetta = load_rosetta(rc.paths.rosetta);
  } else if (rc.cocomo81) {
    in.rosetta = default_rosetta();
  }
  in.specs = rc.paths.specs.empty() ? default_parameter_specs(in.table) : load_parameter_specs(rc.paths.specs);
  return in;
}

LoadResult load_data(const RunConfig& rc, const Inputs& in, bool check_roster = true) {
  CocomoOptions opts;
  opts.table = &in.table;
  opts.rosetta = in.rosetta ? &*in.rosetta : nullptr;
  opts.transform.strict = rc.strict;
  std::set<std::string> roster;
  for (const auto& s : in.specs) roster.insert(s.name);
  auto loaded = load_projects(rc.paths.data, parse_data_format(rc.paths.format), opts,
                              check_roster ? &roster : nullptr);
  for (const auto& r : loaded.rejected) {
    std::cerr << "rejected";
    if (r.line) std::cerr << " line " << r.line;
    if (!r.id.empty()) std::cerr << " (" << r.id << ")";
    std::cerr << ": " << r.reason << "\n";
  }
  if (rc.strict && !loaded.rejected.empty()) {
    throw DataError(std::to_string(loaded.rejected.size()) + " record(s) rejected in strict mode");
  }
  return loaded;
}

int cmd_convert(const RunConfig& rc) {
  const auto in = load_inputs(rc);
  const auto loaded = load_data(rc, in);
  const auto dir = out_dir(rc);
  csv::write_file((dir / "projects.csv").string(), format_seer_csv(loaded.records));
  csv::write_file((dir / "transform_log.csv").string(), format_transform_log(loaded.transform_log));
  if (!loaded.rejected.empty()) csv::write_file((dir / "rejected.csv").string(), format_rejections(loaded.rejected));
  std::cout << "converted " << loaded.records.size() << " of " << loaded.input_rows << " record(s); "
            << loaded.transform_log.size() << " log entries\n";
  return 0;
}

NfBank anchor_bank(const RunConfig& rc, const Inputs& in) { return init_from_anchors(in.specs, rc.constants); }

int cmd_train(RunConfig rc) {
  require_seed(rc);
  rc.train.seed = *rc.seed;
  const auto in = load_inputs(rc);
  const auto loaded = load_data(rc, in);
  const auto result = bank_train(anchor_bank(rc, in), loaded.records, rc.train, rc.bank);
  const auto dir = out_dir(rc);
  csv::write_file((dir / "bank.json").string(), write_bank(result.bank));
  std::string history = "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
    history += csv::format_row({std::to_string(e + 1), csv::format_double(result.loss_history[e])});
  }
  csv::write_file((dir / "loss_history.csv").string(), history);
  std::cout << "trained on " << loaded.records.size() << " project(s), " << result.loss_history.size()
            << " epoch(s)\n";
  if (!result.loss_history.empty()) {
    std::cout << "final loss: " << csv::format_double(result.loss_history.back()) << "\n";
  }
  std::cout << "ctb: " << csv::format_double(result.bank.ctb) << "\n";
  return 0;
}

int cmd_evaluate(RunConfig rc) {
  require_seed(rc);
  rc.train.seed = *rc.seed;
  const auto in = load_inputs(rc);
  const auto loaded = load_data(rc, in);
  const auto plan = split_kfold(loaded.records, rc.k, *rc.seed, rc.stratify);
  const auto anchors = anchor_bank(rc, in);
  const Builder base = baseline_builder(anchors);
  Builder cand;
  if (rc.candidate == "trained") {
    cand = trained_builder(anchors, rc.train, rc.bank);
  } else if (rc.candidate == "baseline") {
    cand = base;
  } else {
    throw ArgumentError("--candidate must be 'trained' or 'baseline'");
  }
  CrossValidateOptions options;
  options.parallel = rc.parallel;
  options.residuals = parse_residual_kind(rc.residuals);
  const auto report = cross_validate(loaded.records, plan, base, cand, options);

  const auto dir = out_dir(rc);
  const fs::path report_path = rc.paths.report.empty() ? dir / "report.json" : fs::path(rc.paths.report);
  const fs::path plot_dir = rc.paths.plots.empty() ? dir / "plots" : fs::path(rc.paths.plots);
  csv::write_file(report_path.string(), write_report(report));
  emit_plot_data(mre_samples(report), plot_dir);
  std::cout << format_summary(report);
  return 0;
}

int cmd_predict(const RunConfig& rc) {
  if (rc.paths.model.empty()) throw ArgumentError("--model is required for predict");
  const auto bank = load_bank(rc.paths.model);
  const auto in = load_inputs(rc);
  RunConfig lenient = rc;
  lenient.strict = false;
  const auto loaded = load_data(lenient, in, false);
  std::string out = "id,actual_pm,predicted_pm\n";
  std::string errors = "id,reason\n";
  std::size_t predicted = 0, failed = 0;
  for (const auto& p : loaded.records) {
    try {
      const double e = estimate(p, bank);
      out += csv::format_row({p.id, csv::format_double(p.actual_effort_pm), csv::format_double(e)});
      ++predicted;
    } catch (const Error& ex) {
      ++failed;
      errors += csv::format_row({p.id, ex.what()});
      std::cerr << "not predicted: " << ex.what() << "\n";
    }
  }
  for (const auto& r : loaded.rejected) {
    ++failed;
    errors += csv::format_row({r.id.empty() ? "line " + std::to_string(r.line) : r.id, r.reason});
  }
  const auto dir = out_dir(rc);
  csv::write_file((dir / "predictions.csv").string(), out);
  csv::write_file((dir / "prediction_errors.csv").string(), errors);
  std::cout << "predicted " << predicted << " record(s), " << failed << " flagged\n";
  return rc.strict && failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neuro-fuzzy SEER-SEM software effort estimation"};
  app.require_subcommand(1);
  RunConfig rc;
  std::uint64_t seed = 0;

  const auto common = [&](CLI::App* cmd) {
    cmd->add_option("--data", rc.paths.data, "Project dataset")->required()->check(CLI::ExistingFile);
    cmd->add_option("--format", rc.paths.format, "Dataset format: seer-csv, cocomo-csv or promise-arff")
        ->capture_default_str();
    cmd->add_option("--specs", rc.paths.specs, "Parameter-spec CSV (default: built-in geometric anchors)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--rosetta", rc.paths.rosetta, "COCOMO 81 -> COCOMO II conversion CSV; marks input as COCOMO 81")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--cocomo81", rc.cocomo81, "Input drivers are COCOMO 81; use the built-in conversion table");
    cmd->add_option("--mapping", rc.paths.mapping, "COCOMO -> SEER-SEM rating mapping CSV")
        ->check(CLI::ExistingFile);
    cmd->add_option("--config", rc.paths.config, "JSON configuration; flags override it")->check(CLI::ExistingFile);
    cmd->add_option("--out", rc.paths.out, "Output directory")->capture_default_str();
    cmd->add_flag("--strict", rc.strict, "Fail on any record-level error, including mapping gaps");
  };
  const auto training = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Random seed (required)");
    cmd->add_option("--epochs", rc.train.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--lr", rc.train.learning_rate, "Premise learning rate")->capture_default_str();
    cmd->add_flag("!--no-monotone", rc.bank.enforce_monotone, "Skip the monotone repair after each epoch");
  };

  auto* convert = app.add_subcommand("convert", "Transform COCOMO-rated data into SEER-SEM ratings");
  common(convert);
  auto* train = app.add_subcommand("train", "Train the neuro-fuzzy bank on a dataset");
  common(train);
  training(train);
  auto* evaluate = app.add_subcommand("evaluate", "Cross-validate the trained bank against the baseline");
  common(evaluate);
  training(evaluate);
  evaluate->add_option("--k", rc.k, "Number of folds")->capture_default_str();
  evaluate->add_option("--report", rc.paths.report, "Report file (default: <out>/report.json)");
  evaluate->add_option("--plots", rc.paths.plots, "Plot directory (default: <out>/plots)");
  evaluate->add_option("--candidate", rc.candidate, "Candidate model: trained or baseline")
      ->check(CLI::IsMember({"trained", "baseline"}))
      ->capture_default_str();
  evaluate->add_option("--residuals", rc.residuals, "Residuals for the Mann-Whitney test: absolute or raw")
      ->check(CLI::IsMember({"absolute", "raw"}))
      ->capture_default_str();
  evaluate->add_flag("--parallel", rc.parallel, "Evaluate folds concurrently");
  evaluate->add_flag("--stratify", rc.stratify, "Stratify folds by development mode");
  auto* predict = app.add_subcommand("predict", "Predict effort with a trained bank");
  common(predict);
  predict->add_option("--model", rc.paths.model, "Bank model file")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    if (app.get_subcommands().empty()) {
      std::cout << app.help("", CLI::AppFormatMode::All);
      return 0;
    }
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n";
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    if (cmd->get_option_no_throw("--seed") && cmd->count("--seed")) rc.seed = seed;
    apply_config(rc, *cmd);
    if (cmd == convert) return cmd_convert(rc);
    if (cmd == train) return cmd_train(rc);
    if (cmd == evaluate) return cmd_evaluate(rc);
    return cmd_predict(rc);
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
