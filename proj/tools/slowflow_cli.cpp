// Command-line front end: generate data, train the model variants, evaluate,
// and reproduce the built-in experiments end to end.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slowflow/errors.hpp"
#include "slowflow/experiment.hpp"

namespace exp = slowflow::experiment;

namespace {

struct Overrides {
  std::string out;
  std::string methods;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t epochs = 0;
  std::size_t jobs = 0;
  bool jobs_set = false;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--out", ov.out, "Output directory (overrides config)");
  cmd->add_option("--methods", ov.methods, "Comma-separated methods to run (overrides config)");
  cmd->add_option("--seed", ov.seed, "Single seed (replaces the config's seed list)")
      ->each([&ov](const std::string&) { ov.seed_set = true; });
  cmd->add_option("--epochs", ov.epochs, "Training epochs (overrides config)");
  cmd->add_option("--jobs", ov.jobs, "Parallel training jobs")
      ->each([&ov](const std::string&) { ov.jobs_set = true; });
}

exp::ExperimentConfig apply_overrides(exp::ExperimentConfig cfg, const Overrides& ov) {
  if (!ov.out.empty()) cfg.out_dir = ov.out;
  if (ov.seed_set) cfg.seeds = {ov.seed};
  if (ov.epochs > 0) cfg.training.epochs = ov.epochs;
  if (ov.jobs_set) cfg.jobs = ov.jobs;
  if (!ov.methods.empty()) {
    cfg.methods.clear();
    std::string token;
    for (char c : ov.methods + ",") {
      if (c == ',') {
        if (!token.empty()) {
          const auto m = exp::parse_method(token);
          if (!m) throw slowflow::ContractViolation("unknown method '" + token + "'");
          cfg.methods.push_back(*m);
          token.clear();
        }
      } else {
        token += c;
      }
    }
  }
  return cfg;
}

void print_summary(const exp::RunSummary& summary) {
  std::printf("method,mean,std,n\n");
  for (const auto& a : summary.aggregates)
    std::printf("%s,%.6f,%.6f,%zu\n", a.label.c_str(), a.mean, a.stddev, a.n);
  if (!summary.failures.empty()) {
    std::fprintf(stderr, "failures:\n");
    for (const auto& f : summary.failures) std::fprintf(stderr, "  %s\n", f.c_str());
  }
  std::printf("artifacts: %s\n", summary.out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slowflow: identifiable time-series source separation with slow flows"};
  app.require_subcommand(1);

  std::string config_path;
  std::string experiment_name = "structural";
  std::string traces_dir;
  Overrides ov;

  CLI::App* generate = app.add_subcommand("generate", "Build datasets for every seed");
  generate->add_option("--config", config_path, "Experiment config JSON")->required();
  add_override_flags(generate, ov);

  CLI::App* train = app.add_subcommand("train", "Train model variants on generated datasets");
  train->add_option("--config", config_path, "Experiment config JSON")->required();
  add_override_flags(train, ov);

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score trained models, write reports");
  evaluate->add_option("--config", config_path, "Experiment config JSON")->required();
  add_override_flags(evaluate, ov);

  CLI::App* reproduce =
      app.add_subcommand("reproduce", "Full pipeline with the built-in experiment defaults");
  reproduce->add_option("--experiment", experiment_name, "structural or audio")
      ->check(CLI::IsMember({"structural", "audio"}));
  reproduce->add_option("--config", config_path, "Optional config JSON replacing the defaults");
  add_override_flags(reproduce, ov);

  CLI::App* traces = app.add_subcommand("traces", "Rebuild trace CSVs from run artifacts");
  traces->add_option("--out", traces_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (traces->parsed()) {
      exp::emit_traces(traces_dir);
      return 0;
    }

    exp::ExperimentConfig cfg;
    if (reproduce->parsed()) {
      cfg = config_path.empty()
                ? (experiment_name == "audio" ? exp::default_audio_config()
                                              : exp::default_structural_config())
                : exp::load_config(config_path);
    } else {
      cfg = exp::load_config(config_path);
    }
    cfg = apply_overrides(cfg, ov);
    exp::validate(cfg);

    if (generate->parsed()) {
      exp::generate_stage(cfg);
      std::printf("datasets written under %s\n", cfg.out_dir.c_str());
      return 0;
    }
    if (train->parsed()) {
      exp::train_stage(cfg);
      std::printf("checkpoints written under %s\n", cfg.out_dir.c_str());
      return 0;
    }
    if (evaluate->parsed()) {
      const exp::RunSummary summary = exp::evaluate_stage(cfg);
      print_summary(summary);
      return summary.failures.empty() ? 0 : 2;
    }
    // reproduce
    const exp::RunSummary summary = exp::run_experiment(cfg);
    print_summary(summary);
    return summary.failures.empty() ? 0 : 2;
  } catch (const slowflow::ContractViolation& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const slowflow::DimensionError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
