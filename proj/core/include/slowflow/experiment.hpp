#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slowflow/scoring.hpp"
#include "slowflow/structural.hpp"

namespace slowflow::experiment {

enum class Method { kIca, kFbmIca, kSlowFbm, kSlowFbmIca };

/// Table labels: "ICA", "FBM+ICA", "S-FBM", "S-FBM+ICA".
std::string method_label(Method m);
std::optional<Method> parse_method(const std::string& label);
/// The four methods in table order.
std::vector<Method> all_methods();

struct MixingSettings {
  std::size_t depth = 4;
  std::uint64_t seed = 0;  // combined with the run seed
  /// 0 gives the identity-mixing hook (see make_mixing).
  double sigma_w = 0.8;
};

struct ModelSettings {
  std::size_t couplings = 6;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t window = 256;
  double scale_clamp = 3.0;
};

struct TrainingSettings {
  std::size_t epochs = 300;
  double learning_rate = 1e-3;
  std::size_t batch_windows = 16;
};

struct AudioSettings {
  /// Four WAV paths; empty means "synthesize the bundled stand-in".
  std::vector<std::string> paths;
  std::size_t target_len = 16384;
  std::uint32_t sample_rate = 8000;
  std::uint64_t synth_seed = 424242;
};

/// Full declarative description of one experiment run.
struct ExperimentConfig {
  std::string experiment = "structural";  // "structural" | "audio"
  datagen::StructuralSpec structural = datagen::default_structural_spec(4096, 0);
  AudioSettings audio;
  MixingSettings mixing;
  ModelSettings model;
  TrainingSettings training;
  std::vector<Method> methods = all_methods();
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "runs/out";
  double test_fraction = 0.0;
  std::string ica_fit = "train";  // fit the demixing on "train" rows or "all"
  std::size_t jobs = 0;           // parallel training slots; 0 = auto
};

ExperimentConfig default_structural_config();
ExperimentConfig default_audio_config();

/// Throws ContractViolation with a readable message on any bad field.
void validate(const ExperimentConfig& cfg);

ExperimentConfig config_from_json(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

struct MethodScore {
  Method method;
  std::uint64_t seed = 0;
  double matched_mean = 0.0;
};

struct SeedDiagnostics {
  std::uint64_t seed = 0;
  /// Mean squared increment of the standardized encoded components,
  /// averaged over channels; smaller is slower.
  double slowness_fbm = 0.0;
  double slowness_sfbm = 0.0;
  bool has_fbm = false;
  bool has_sfbm = false;
  /// Independence diagnostic of the S-FBM+ICA estimates.
  double sfbm_ica_max_offdiag = 0.0;
  bool has_sfbm_ica = false;
};

struct RunSummary {
  std::vector<MethodScore> per_seed;
  std::vector<eval::AggregateScore> aggregates;  // table order
  std::vector<SeedDiagnostics> diagnostics;
  std::vector<std::string> failures;  // per-seed failure notes; empty on success
  std::size_t trainings_run = 0;
  std::string out_dir;
};

/// Full pipeline: per seed build the dataset, train the requested model
/// variants, score every method, then write per-seed artifacts, scores.csv,
/// summary.csv and per-seed trace CSVs under cfg.out_dir. Partial results are
/// preserved when a seed fails; failures are listed in the summary and in
/// failure.log.
RunSummary run_experiment(const ExperimentConfig& cfg);

/// Pipeline stages, individually invocable on a run directory. `generate`
/// writes datasets only, `train_models` requires them, `evaluate_run`
/// requires the trained checkpoints.
void generate_stage(const ExperimentConfig& cfg);
void train_stage(const ExperimentConfig& cfg);
RunSummary evaluate_stage(const ExperimentConfig& cfg);

/// Rebuilds the long-format trace CSVs (t,channel,which,value) from stored
/// artifacts. Throws IngestionError listing the absent stage if artifacts are
/// missing.
void emit_traces(const std::string& run_dir);

}  // namespace slowflow::experiment
