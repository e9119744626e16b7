#include "slowflow/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "slowflow/checkpoint.hpp"
#include "slowflow/csvio.hpp"
#include "slowflow/dataset.hpp"
#include "slowflow/diagnostics.hpp"
#include "slowflow/errors.hpp"
#include "slowflow/fastica.hpp"
#include "slowflow/train.hpp"
#include "slowflow/wav.hpp"

namespace slowflow::experiment {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---- labels -------------------------------------------------------------------

std::string method_label(Method m) {
  switch (m) {
    case Method::kIca: return "ICA";
    case Method::kFbmIca: return "FBM+ICA";
    case Method::kSlowFbm: return "S-FBM";
    case Method::kSlowFbmIca: return "S-FBM+ICA";
  }
  return "?";
}

std::optional<Method> parse_method(const std::string& label) {
  std::string up;
  for (char c : label) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "ICA") return Method::kIca;
  if (up == "FBM+ICA") return Method::kFbmIca;
  if (up == "S-FBM" || up == "SFBM") return Method::kSlowFbm;
  if (up == "S-FBM+ICA" || up == "SFBM+ICA") return Method::kSlowFbmIca;
  return std::nullopt;
}

std::vector<Method> all_methods() {
  return {Method::kIca, Method::kFbmIca, Method::kSlowFbm, Method::kSlowFbmIca};
}

// ---- defaults -----------------------------------------------------------------

ExperimentConfig default_structural_config() {
  ExperimentConfig cfg;
  cfg.experiment = "structural";
  cfg.structural = datagen::default_structural_spec(4096, 0);
  cfg.test_fraction = 0.0;
  cfg.seeds = {1, 2, 3, 4, 5};
  cfg.out_dir = "runs/structural";
  return cfg;
}

ExperimentConfig default_audio_config() {
  ExperimentConfig cfg;
  cfg.experiment = "audio";
  cfg.test_fraction = 0.25;  // first 75% trains, the rest evaluates
  cfg.seeds = {1, 2, 3};
  cfg.training.epochs = 200;
  cfg.out_dir = "runs/audio";
  return cfg;
}

// ---- validation ---------------------------------------------------------------

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ContractViolation("config: " + msg); };
  if (cfg.experiment != "structural" && cfg.experiment != "audio")
    fail("experiment must be 'structural' or 'audio'");
  if (cfg.methods.empty()) fail("methods list is empty");
  if (cfg.seeds.empty()) fail("seeds list is empty");
  if (cfg.out_dir.empty()) fail("out_dir is empty");
  if (cfg.model.couplings == 0) fail("model.couplings must be >= 1");
  if (cfg.model.hidden.empty()) fail("model.hidden is empty");
  for (std::size_t h : cfg.model.hidden)
    if (h == 0) fail("model.hidden contains a zero width");
  if (cfg.model.window < 2) fail("model.window must be >= 2");
  if (cfg.model.scale_clamp <= 0) fail("model.scale_clamp must be positive");
  if (cfg.training.epochs == 0) fail("training.epochs must be >= 1");
  if (cfg.training.learning_rate <= 0) fail("training.learning_rate must be positive");
  if (cfg.training.batch_windows == 0) fail("training.batch_windows must be >= 1");
  if (cfg.mixing.depth < 2) fail("mixing.depth must be >= 2");
  if (cfg.mixing.sigma_w < 0) fail("mixing.sigma_w must be >= 0");
  if (cfg.test_fraction < 0.0 || cfg.test_fraction >= 1.0) fail("test_fraction must be in [0,1)");
  if (cfg.ica_fit != "train" && cfg.ica_fit != "all") fail("ica_fit must be 'train' or 'all'");
  if (cfg.experiment == "structural") {
    if (cfg.structural.length < 64) fail("structural.length must be >= 64");
    const auto train_len = static_cast<std::size_t>(
        std::ceil(static_cast<double>(cfg.structural.length) * (1.0 - cfg.test_fraction)));
    if (cfg.model.window > train_len) fail("model.window larger than the train region");
  } else {
    if (!cfg.audio.paths.empty() && cfg.audio.paths.size() != 4)
      fail("audio.paths must list exactly 4 files (or none for the synthetic stand-in)");
    if (cfg.audio.target_len < 4 * cfg.model.window)
      fail("audio.target_len too small for the window length");
  }
  std::vector<bool> seen(4, false);
  for (Method m : cfg.methods) {
    if (seen[static_cast<int>(m)]) fail("duplicate method " + method_label(m));
    seen[static_cast<int>(m)] = true;
  }
}

// ---- json ---------------------------------------------------------------------

namespace {

ordered_json structural_to_json(const datagen::StructuralSpec& s) {
  ordered_json j;
  j["length"] = s.length;
  j["trend_curvature_max"] = s.trend_curvature_max;
  j["season_period"] = s.season_period;
  j["cycle_freq_lo"] = s.cycle_freq_lo;
  j["cycle_freq_hi"] = s.cycle_freq_hi;
  j["cycle_mean_segment"] = s.cycle_mean_segment;
  j["noise_std"] = s.noise_std;
  j["seed"] = s.seed;
  return j;
}

datagen::StructuralSpec structural_from_json(const nlohmann::json& j,
                                             datagen::StructuralSpec base) {
  base.length = j.value("length", base.length);
  base.trend_curvature_max = j.value("trend_curvature_max", base.trend_curvature_max);
  base.season_period = j.value("season_period", base.season_period);
  base.cycle_freq_lo = j.value("cycle_freq_lo", base.cycle_freq_lo);
  base.cycle_freq_hi = j.value("cycle_freq_hi", base.cycle_freq_hi);
  base.cycle_mean_segment = j.value("cycle_mean_segment", base.cycle_mean_segment);
  base.noise_std = j.value("noise_std", base.noise_std);
  base.seed = j.value("seed", base.seed);
  return base;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["experiment"] = cfg.experiment;
  j["structural"] = structural_to_json(cfg.structural);
  j["audio"] = {{"paths", cfg.audio.paths},
                {"target_len", cfg.audio.target_len},
                {"sample_rate", cfg.audio.sample_rate},
                {"synth_seed", cfg.audio.synth_seed}};
  j["mixing"] = {{"depth", cfg.mixing.depth},
                 {"seed", cfg.mixing.seed},
                 {"sigma_w", cfg.mixing.sigma_w}};
  j["model"] = {{"couplings", cfg.model.couplings},
                {"hidden", cfg.model.hidden},
                {"window", cfg.model.window},
                {"scale_clamp", cfg.model.scale_clamp}};
  j["training"] = {{"epochs", cfg.training.epochs},
                   {"learning_rate", cfg.training.learning_rate},
                   {"batch_windows", cfg.training.batch_windows}};
  std::vector<std::string> labels;
  for (Method m : cfg.methods) labels.push_back(method_label(m));
  j["methods"] = labels;
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  j["test_fraction"] = cfg.test_fraction;
  j["ica_fit"] = cfg.ica_fit;
  j["jobs"] = cfg.jobs;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  cfg.experiment = j.value("experiment", cfg.experiment);
  if (cfg.experiment == "audio") {
    const ExperimentConfig audio_defaults = default_audio_config();
    cfg.test_fraction = audio_defaults.test_fraction;
    cfg.seeds = audio_defaults.seeds;
    cfg.training = audio_defaults.training;
    cfg.out_dir = audio_defaults.out_dir;
  }
  if (j.contains("structural"))
    cfg.structural = structural_from_json(j["structural"], cfg.structural);
  if (j.contains("audio")) {
    const auto& a = j["audio"];
    cfg.audio.paths = a.value("paths", cfg.audio.paths);
    cfg.audio.target_len = a.value("target_len", cfg.audio.target_len);
    cfg.audio.sample_rate = a.value("sample_rate", cfg.audio.sample_rate);
    cfg.audio.synth_seed = a.value("synth_seed", cfg.audio.synth_seed);
  }
  if (j.contains("mixing")) {
    const auto& m = j["mixing"];
    cfg.mixing.depth = m.value("depth", cfg.mixing.depth);
    cfg.mixing.seed = m.value("seed", cfg.mixing.seed);
    cfg.mixing.sigma_w = m.value("sigma_w", cfg.mixing.sigma_w);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    cfg.model.couplings = m.value("couplings", cfg.model.couplings);
    cfg.model.hidden = m.value("hidden", cfg.model.hidden);
    cfg.model.window = m.value("window", cfg.model.window);
    cfg.model.scale_clamp = m.value("scale_clamp", cfg.model.scale_clamp);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    cfg.training.epochs = t.value("epochs", cfg.training.epochs);
    cfg.training.learning_rate = t.value("learning_rate", cfg.training.learning_rate);
    cfg.training.batch_windows = t.value("batch_windows", cfg.training.batch_windows);
  }
  if (j.contains("methods")) {
    cfg.methods.clear();
    for (const auto& label : j["methods"]) {
      const auto m = parse_method(label.get<std::string>());
      if (!m) throw ContractViolation("config: unknown method '" + label.get<std::string>() + "'");
      cfg.methods.push_back(*m);
    }
  }
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
  cfg.ica_fit = j.value("ica_fit", cfg.ica_fit);
  cfg.jobs = j.value("jobs", cfg.jobs);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(io::read_text(path));
}

// ---- internals ----------------------------------------------------------------

namespace {

constexpr std::uint64_t kStreamData = 0x10;
constexpr std::uint64_t kStreamMixing = 0x20;
constexpr std::uint64_t kStreamInitFbm = 0x30;
constexpr std::uint64_t kStreamInitSfbm = 0x31;
constexpr std::uint64_t kStreamTrainFbm = 0x40;
constexpr std::uint64_t kStreamTrainSfbm = 0x41;
constexpr std::uint64_t kStreamIca = 0x50;

struct SeedPaths {
  fs::path dir;
  fs::path model_ckpt(bool slow) const {
    return dir / (slow ? "model_sfbm.ckpt" : "model_fbm.ckpt");
  }
  fs::path nll_csv(bool slow) const { return dir / (slow ? "nll_sfbm.csv" : "nll_fbm.csv"); }
  fs::path ica_json() const { return dir / "ica.json"; }
};

SeedPaths seed_paths(const ExperimentConfig& cfg, std::uint64_t seed) {
  return SeedPaths{fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed))};
}

bool needs(const ExperimentConfig& cfg, Method m) {
  return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

bool needs_fbm(const ExperimentConfig& cfg) { return needs(cfg, Method::kFbmIca); }
bool needs_sfbm(const ExperimentConfig& cfg) {
  return needs(cfg, Method::kSlowFbm) || needs(cfg, Method::kSlowFbmIca);
}

/// Audio stand-in assets, written once per run dir.
std::vector<std::string> ensure_audio_assets(const ExperimentConfig& cfg) {
  if (!cfg.audio.paths.empty()) return cfg.audio.paths;
  const fs::path asset_dir = fs::path(cfg.out_dir) / "assets";
  fs::create_directories(asset_dir);
  const Series tracks =
      datagen::synth_instruments(cfg.audio.target_len, cfg.audio.sample_rate, cfg.audio.synth_seed);
  static const char* names[4] = {"pluck.wav", "pad.wav", "percussion.wav", "bass.wav"};
  std::vector<std::string> paths;
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> track = column(tracks, j);
    double peak = 0.0;
    for (double v : track) peak = std::max(peak, std::abs(v));
    if (peak > 0)
      for (double& v : track) v *= 0.95 / peak;
    const fs::path p = asset_dir / names[j];
    datagen::write_wav_pcm16(p.string(), track, cfg.audio.sample_rate);
    paths.push_back(p.string());
  }
  return paths;
}

Series generate_sources(const ExperimentConfig& cfg, std::uint64_t seed,
                        const std::vector<std::string>& audio_paths, std::string* spec_json) {
  if (cfg.experiment == "structural") {
    datagen::StructuralSpec spec = cfg.structural;
    spec.seed = derive_seed(seed ^ cfg.structural.seed, kStreamData);
    if (spec_json) *spec_json = structural_to_json(spec).dump();
    return datagen::gen_structural(spec);
  }
  const datagen::AudioSources audio = datagen::load_audio(audio_paths, cfg.audio.target_len);
  if (spec_json) {
    ordered_json j;
    j["paths"] = audio_paths;
    j["target_len"] = cfg.audio.target_len;
    j["sample_rate"] = cfg.audio.sample_rate;
    j["synth_seed"] = cfg.audio.synth_seed;
    j["warnings"] = audio.warnings;
    *spec_json = j.dump();
  }
  return audio.sources;
}

struct BuiltSeed {
  datagen::MixingModel mixing;
  datagen::Dataset dataset;
};

/// Draws mixings until the observed signal is genuinely nonlinear in the
/// sources (linear residual > 5%); identity-hook mixings skip the check.
BuiltSeed build_seed_dataset(const ExperimentConfig& cfg, std::uint64_t seed,
                             const Series& sources_raw) {
  datagen::MixingOptions opts;
  opts.sigma_w = cfg.mixing.sigma_w;
  const std::uint64_t base = derive_seed(cfg.mixing.seed, seed);
  constexpr std::size_t kMaxNonlinearTries = 20;
  BuiltSeed built;
  for (std::size_t attempt = 0; attempt < kMaxNonlinearTries; ++attempt) {
    built.mixing = datagen::make_mixing(sources_raw.cols(), cfg.mixing.depth,
                                        derive_seed(base, kStreamMixing + attempt), opts);
    built.dataset =
        datagen::build_dataset(sources_raw, built.mixing, cfg.model.window, cfg.test_fraction);
    if (cfg.mixing.sigma_w == 0.0) return built;  // identity hook
    if (datagen::linear_residual_fraction(built.dataset.sources, built.dataset.observed) > 0.05)
      return built;
  }
  throw NumericalError("build_seed_dataset: mixing stayed essentially linear after " +
                       std::to_string(kMaxNonlinearTries) + " draws (seed " +
                       std::to_string(seed) + ")");
}

flows::FlowStack make_seed_model(const ExperimentConfig& cfg, std::uint64_t seed, bool slow,
                                 const Series& train_observed) {
  Rng rng(derive_seed(seed, slow ? kStreamInitSfbm : kStreamInitFbm));
  flows::FlowStack model = flows::make_model(train_observed.cols(), cfg.model.couplings,
                                             cfg.model.hidden, /*with_slow_layer=*/false, rng,
                                             cfg.model.scale_clamp);
  flows::set_norm_from_data(model, train_observed);
  return model;
}

void write_nll_csv(const std::string& path, const flows::TrainReport& report) {
  std::ostringstream out;
  out << "epoch,nll_per_step_per_dim\n";
  for (std::size_t e = 0; e < report.nll_per_epoch.size(); ++e)
    out << (e + 1) << ',' << io::format_exact(report.nll_per_epoch[e]) << "\n";
  io::atomic_write(path, out.str());
}

/// One training unit; saves the checkpoint and the NLL trace.
void train_one(const ExperimentConfig& cfg, const datagen::Dataset& ds, std::uint64_t seed,
               bool slow) {
  flows::FlowStack model = make_seed_model(cfg, seed, slow, ds.train_observed());
  flows::TrainConfig tc;
  tc.epochs = cfg.training.epochs;
  tc.learning_rate = cfg.training.learning_rate;
  tc.batch_windows = cfg.training.batch_windows;
  tc.seed = derive_seed(seed, slow ? kStreamTrainSfbm : kStreamTrainFbm);
  const flows::TrainReport report = flows::train(model, ds.train_windows(), tc, slow);
  if (report.diverged) {
    throw NumericalError("training (" + std::string(slow ? "S-FBM" : "FBM") + ", seed " +
                         std::to_string(seed) + ") diverged: " + report.divergence_note);
  }
  const SeedPaths paths = seed_paths(cfg, seed);
  flows::save_checkpoint(model, paths.model_ckpt(slow).string());
  write_nll_csv(paths.nll_csv(slow).string(), report);
}

struct AffineMap {
  Matrix offset;  // 1 x d
  Matrix demix;   // d x d
};

Series apply_affine(const AffineMap& map, const Series& x) {
  Series centered(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) centered(r, j) = x(r, j) - map.offset(0, j);
  return matmul(centered, transpose(map.demix));
}

ordered_json affine_to_json(const AffineMap& map) {
  ordered_json j;
  j["offset"] = std::vector<double>(map.offset.data(), map.offset.data() + map.offset.size());
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < map.demix.rows(); ++i) {
    rows.emplace_back();
    for (std::size_t c = 0; c < map.demix.cols(); ++c) rows.back().push_back(map.demix(i, c));
  }
  j["demix"] = rows;
  return j;
}

AffineMap affine_from_json(const nlohmann::json& j) {
  AffineMap map;
  const auto off = j.at("offset").get<std::vector<double>>();
  map.offset = Matrix(1, off.size());
  for (std::size_t i = 0; i < off.size(); ++i) map.offset(0, i) = off[i];
  const auto rows = j.at("demix").get<std::vector<std::vector<double>>>();
  map.demix = Matrix(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) map.demix(i, c) = rows[i][c];
  return map;
}

AffineMap ica_map(const ica::IcaSeparation& sep) { return AffineMap{sep.offset, sep.demix.a}; }

/// Mean squared increment of standardized channels, averaged over channels.
double mean_slowness(const Series& z) {
  const Series zs = standardize_columns(z);
  double acc = 0.0;
  for (std::size_t j = 0; j < zs.cols(); ++j) acc += mean_squared_increment(zs, j);
  return acc / static_cast<double>(zs.cols());
}

void write_traces_csv(const std::string& path, std::size_t t0, const Series& truth,
                      const Series* fbm_est, const Series* sfbm_est) {
  std::ostringstream out;
  out << "t,channel,which,value\n";
  auto emit_group = [&](const char* which, const Series& s) {
    // Channel 1 is the slowest (smallest mean squared increment).
    std::vector<std::size_t> order(s.cols());
    for (std::size_t j = 0; j < s.cols(); ++j) order[j] = j;
    std::vector<double> msd(s.cols());
    for (std::size_t j = 0; j < s.cols(); ++j) msd[j] = mean_squared_increment(s, j);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return msd[a] < msd[b]; });
    for (std::size_t c = 0; c < order.size(); ++c) {
      for (std::size_t r = 0; r < s.rows(); ++r) {
        out << (t0 + r) << ',' << (c + 1) << ',' << which << ','
            << io::format_exact(s(r, order[c])) << "\n";
      }
    }
  };
  emit_group("truth", truth);
  if (fbm_est) emit_group("fbm", *fbm_est);
  if (sfbm_est) emit_group("slowfbm", *sfbm_est);
  io::atomic_write(path, out.str());
}

struct SeedEvaluation {
  std::map<Method, double> scores;
  SeedDiagnostics diagnostics;
};

/// Scores every requested method for one seed from on-disk artifacts, writes
/// ica.json and the trace CSV, and returns the numbers.
SeedEvaluation evaluate_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SeedPaths paths = seed_paths(cfg, seed);
  if (!fs::exists(paths.dir / "dataset.csv") || !fs::exists(paths.dir / "manifest.json")) {
    throw IngestionError("seed " + std::to_string(seed) +
                         ": missing dataset artifacts (generate stage)");
  }
  const datagen::Dataset ds = datagen::import_dataset(paths.dir.string()).dataset;
  const std::size_t boundary = ds.boundary;
  const std::size_t fit_end = cfg.ica_fit == "all" ? ds.observed.rows() : boundary;

  const Series eval_truth = ds.eval_sources();
  const std::size_t eval_begin = ds.eval_begin();

  SeedEvaluation ev;
  ev.diagnostics.seed = seed;
  ordered_json ica_json;

  ica::FastIcaOptions ica_opts;

  std::optional<Series> z_fbm;   // full-signal encodings
  std::optional<Series> z_sfbm;
  if (needs_fbm(cfg)) {
    const fs::path ckpt = paths.model_ckpt(false);
    if (!fs::exists(ckpt))
      throw IngestionError("seed " + std::to_string(seed) +
                           ": missing model_fbm.ckpt (train stage)");
    z_fbm = flows::encode(flows::load_checkpoint(ckpt.string()), ds.observed);
  }
  if (needs_sfbm(cfg)) {
    const fs::path ckpt = paths.model_ckpt(true);
    if (!fs::exists(ckpt))
      throw IngestionError("seed " + std::to_string(seed) +
                           ": missing model_sfbm.ckpt (train stage)");
    z_sfbm = flows::encode(flows::load_checkpoint(ckpt.string()), ds.observed);
  }

  auto eval_slice = [&](const Series& s) {
    return boundary < s.rows() ? slice_rows(s, boundary, s.rows()) : s;
  };

  std::optional<Series> est_fbm_ica, est_sfbm_ica;
  for (Method m : all_methods()) {
    if (!needs(cfg, m)) continue;
    switch (m) {
      case Method::kIca: {
        ica_opts.seed = derive_seed(seed, kStreamIca + 0);
        const ica::IcaSeparation sep = ica::ica_separate(
            slice_rows(ds.observed, 0, fit_end), eval_slice(ds.observed), ica_opts);
        ev.scores[m] = eval::score_sources(eval_truth, sep.sources).match.matched_mean;
        ica_json["ica"] = affine_to_json(ica_map(sep));
        break;
      }
      case Method::kFbmIca: {
        ica_opts.seed = derive_seed(seed, kStreamIca + 1);
        const ica::IcaSeparation sep =
            ica::ica_separate(slice_rows(*z_fbm, 0, fit_end), eval_slice(*z_fbm), ica_opts);
        est_fbm_ica = sep.sources;
        ev.scores[m] = eval::score_sources(eval_truth, sep.sources).match.matched_mean;
        ica_json["fbm_ica"] = affine_to_json(ica_map(sep));
        break;
      }
      case Method::kSlowFbm: {
        ev.scores[m] = eval::score_sources(eval_truth, eval_slice(*z_sfbm)).match.matched_mean;
        break;
      }
      case Method::kSlowFbmIca: {
        ica_opts.seed = derive_seed(seed, kStreamIca + 2);
        const ica::IcaSeparation sep =
            ica::ica_separate(slice_rows(*z_sfbm, 0, fit_end), eval_slice(*z_sfbm), ica_opts);
        est_sfbm_ica = sep.sources;
        ev.scores[m] = eval::score_sources(eval_truth, sep.sources).match.matched_mean;
        ica_json["sfbm_ica"] = affine_to_json(ica_map(sep));
        break;
      }
    }
  }

  try {
    if (z_fbm) {
      ev.diagnostics.slowness_fbm = mean_slowness(eval_slice(*z_fbm));
      ev.diagnostics.has_fbm = true;
    }
    if (z_sfbm) {
      ev.diagnostics.slowness_sfbm = mean_slowness(eval_slice(*z_sfbm));
      ev.diagnostics.has_sfbm = true;
    }
    if (est_sfbm_ica) {
      ev.diagnostics.sfbm_ica_max_offdiag =
          ica::lagged_cov_diagnostic(*est_sfbm_ica).max_offdiag;
      ev.diagnostics.has_sfbm_ica = true;
    }
  } catch (const DegenerateInput&) {
    // Diagnostics stay unset on degenerate encodings; scores already tell the story.
  }

  if (!ica_json.empty()) io::atomic_write(paths.ica_json().string(), ica_json.dump(2) + "\n");

  // fbm/slowfbm traces prefer the demixed estimates, falling back to the raw
  // encodings when the ICA variant was not requested.
  const Series* fbm_trace = est_fbm_ica ? &*est_fbm_ica : nullptr;
  std::optional<Series> z_fbm_eval;
  if (!fbm_trace && z_fbm) {
    z_fbm_eval = eval_slice(*z_fbm);
    fbm_trace = &*z_fbm_eval;
  }
  const Series* sfbm_trace = est_sfbm_ica ? &*est_sfbm_ica : nullptr;
  std::optional<Series> z_sfbm_eval;
  if (!sfbm_trace && z_sfbm) {
    z_sfbm_eval = eval_slice(*z_sfbm);
    sfbm_trace = &*z_sfbm_eval;
  }
  write_traces_csv((fs::path(cfg.out_dir) / ("traces_seed_" + std::to_string(seed) + ".csv"))
                       .string(),
                   eval_begin, eval_truth, fbm_trace, sfbm_trace);
  return ev;
}

/// Trace rebuild from stored artifacts only: dataset + checkpoints + the
/// demixing maps saved by the evaluate stage. No refitting.
void traces_from_artifacts(const ExperimentConfig& cfg, std::uint64_t seed) {
  const SeedPaths paths = seed_paths(cfg, seed);
  if (!fs::exists(paths.dir / "dataset.csv"))
    throw IngestionError("seed " + std::to_string(seed) +
                         ": missing dataset.csv (generate stage)");
  const datagen::Dataset ds = datagen::import_dataset(paths.dir.string()).dataset;
  const std::size_t boundary = ds.boundary;
  auto eval_slice = [&](const Series& s) {
    return boundary < s.rows() ? slice_rows(s, boundary, s.rows()) : s;
  };

  nlohmann::json ica_json;
  if (fs::exists(paths.ica_json()))
    ica_json = nlohmann::json::parse(io::read_text(paths.ica_json().string()));

  auto estimate = [&](bool slow, const char* map_key) -> std::optional<Series> {
    const bool wanted = slow ? needs_sfbm(cfg) : needs_fbm(cfg);
    if (!wanted) return std::nullopt;
    const fs::path ckpt = paths.model_ckpt(slow);
    if (!fs::exists(ckpt))
      throw IngestionError("seed " + std::to_string(seed) + ": missing " +
                           ckpt.filename().string() + " (train stage)");
    const Series z = flows::encode(flows::load_checkpoint(ckpt.string()), ds.observed);
    const bool ica_wanted = slow ? needs(cfg, Method::kSlowFbmIca) : needs(cfg, Method::kFbmIca);
    if (!ica_wanted) return eval_slice(z);
    if (!ica_json.contains(map_key))
      throw IngestionError("seed " + std::to_string(seed) + ": missing " + map_key +
                           " demixing in ica.json (evaluate stage)");
    return apply_affine(affine_from_json(ica_json[map_key]), eval_slice(z));
  };

  const std::optional<Series> fbm_trace = estimate(false, "fbm_ica");
  const std::optional<Series> sfbm_trace = estimate(true, "sfbm_ica");
  write_traces_csv((fs::path(cfg.out_dir) / ("traces_seed_" + std::to_string(seed) + ".csv"))
                       .string(),
                   ds.eval_begin(), ds.eval_sources(), fbm_trace ? &*fbm_trace : nullptr,
                   sfbm_trace ? &*sfbm_trace : nullptr);
}

void write_scores_csv(const ExperimentConfig& cfg, const std::vector<MethodScore>& rows) {
  std::ostringstream out;
  out << "method,seed,matched_mean\n";
  for (const auto& r : rows)
    out << method_label(r.method) << ',' << r.seed << ',' << io::format_fixed(r.matched_mean)
        << "\n";
  io::atomic_write((fs::path(cfg.out_dir) / "scores.csv").string(), out.str());
}

void write_summary_csv(const ExperimentConfig& cfg,
                       const std::vector<eval::AggregateScore>& aggs) {
  std::ostringstream out;
  out << "method,mean,std,n\n";
  for (const auto& a : aggs)
    out << a.label << ',' << io::format_fixed(a.mean) << ',' << io::format_fixed(a.stddev) << ','
        << a.n << "\n";
  io::atomic_write((fs::path(cfg.out_dir) / "summary.csv").string(), out.str());
}

}  // namespace

// ---- stages -------------------------------------------------------------------

void generate_stage(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  validate(cfg);
  fs::create_directories(cfg.out_dir);
  if (cfg.experiment == "audio") cfg.audio.paths = ensure_audio_assets(cfg);
  io::atomic_write((fs::path(cfg.out_dir) / "config.json").string(), config_to_json(cfg));

  for (std::uint64_t seed : cfg.seeds) {
    const SeedPaths paths = seed_paths(cfg, seed);
    fs::create_directories(paths.dir);
    std::string spec_json;
    const Series sources_raw = generate_sources(cfg, seed, cfg.audio.paths, &spec_json);
    const BuiltSeed built = build_seed_dataset(cfg, seed, sources_raw);
    datagen::export_dataset(built.dataset, built.mixing, paths.dir.string(), cfg.experiment, seed,
                            spec_json);
  }
}

void train_stage(const ExperimentConfig& cfg) {
  validate(cfg);
  struct Task {
    std::uint64_t seed;
    bool slow;
  };
  std::vector<Task> tasks;
  for (std::uint64_t seed : cfg.seeds) {
    if (needs_fbm(cfg)) tasks.push_back({seed, false});
    if (needs_sfbm(cfg)) tasks.push_back({seed, true});
  }
  if (tasks.empty()) return;

  std::size_t jobs = cfg.jobs ? cfg.jobs : std::thread::hardware_concurrency();
  jobs = std::max<std::size_t>(1, std::min(jobs, tasks.size()));

  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::vector<std::string> failures;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      try {
        const SeedPaths paths = seed_paths(cfg, task.seed);
        const datagen::Dataset ds = datagen::import_dataset(paths.dir.string()).dataset;
        train_one(cfg, ds, task.seed, task.slow);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failures.push_back("seed " + std::to_string(task.seed) + " (" +
                           (task.slow ? "S-FBM" : "FBM") + "): " + e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < jobs; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  if (!failures.empty()) {
    std::string msg = "train stage failures:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw NumericalError(msg);
  }
}

RunSummary evaluate_stage(const ExperimentConfig& cfg) {
  validate(cfg);
  RunSummary summary;
  summary.out_dir = cfg.out_dir;

  std::map<Method, std::vector<double>> per_method;
  for (std::uint64_t seed : cfg.seeds) {
    try {
      const SeedEvaluation ev = evaluate_seed(cfg, seed);
      for (Method m : all_methods()) {
        const auto it = ev.scores.find(m);
        if (it == ev.scores.end()) continue;
        summary.per_seed.push_back({m, seed, it->second});
        per_method[m].push_back(it->second);
      }
      summary.diagnostics.push_back(ev.diagnostics);
    } catch (const std::exception& e) {
      summary.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
    }
  }

  // Stable output order: method-major (table order), then seed.
  std::vector<MethodScore> ordered;
  for (Method m : all_methods())
    for (const auto& row : summary.per_seed)
      if (row.method == m) ordered.push_back(row);
  summary.per_seed = std::move(ordered);

  for (Method m : all_methods()) {
    const auto it = per_method.find(m);
    if (it == per_method.end()) continue;
    summary.aggregates.push_back(eval::aggregate(it->second, method_label(m)));
  }

  write_scores_csv(cfg, summary.per_seed);
  write_summary_csv(cfg, summary.aggregates);

  if (!summary.failures.empty()) {
    std::string log;
    for (const auto& f : summary.failures) log += f + "\n";
    io::atomic_write((fs::path(cfg.out_dir) / "failure.log").string(), log);
  }
  return summary;
}

RunSummary run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  validate(cfg);
  generate_stage(cfg);

  RunSummary summary;
  try {
    train_stage(cfg);
  } catch (const std::exception& e) {
    summary.failures.push_back(e.what());
  }
  RunSummary eval_summary = evaluate_stage(cfg);
  eval_summary.failures.insert(eval_summary.failures.begin(), summary.failures.begin(),
                               summary.failures.end());
  std::size_t trainings = 0;
  if (needs_fbm(cfg)) trainings += cfg.seeds.size();
  if (needs_sfbm(cfg)) trainings += cfg.seeds.size();
  eval_summary.trainings_run = trainings;

  if (!eval_summary.failures.empty()) {
    std::string log;
    for (const auto& f : eval_summary.failures) log += f + "\n";
    io::atomic_write((fs::path(cfg.out_dir) / "failure.log").string(), log);
  }
  return eval_summary;
}

void emit_traces(const std::string& run_dir) {
  const fs::path config_path = fs::path(run_dir) / "config.json";
  if (!fs::exists(config_path))
    throw IngestionError("emit_traces: missing config.json (generate stage) in " + run_dir);
  ExperimentConfig cfg = load_config(config_path.string());
  cfg.out_dir = run_dir;  // the directory may have moved since the run
  for (std::uint64_t seed : cfg.seeds) {
    traces_from_artifacts(cfg, seed);
  }
}

}  // namespace slowflow::experiment
