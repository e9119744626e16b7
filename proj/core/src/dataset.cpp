#include "slowflow/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "slowflow/checkpoint.hpp"
#include "slowflow/csvio.hpp"
#include "slowflow/errors.hpp"

namespace slowflow::datagen {

std::vector<Series> Dataset::train_windows() const {
  std::vector<Series> out;
  for (std::size_t start = 0; start + window <= boundary; start += window) {
    out.push_back(slice_rows(observed, start, start + window));
  }
  return out;
}

Series Dataset::train_observed() const { return slice_rows(observed, 0, boundary); }

Series Dataset::eval_sources() const {
  return boundary < sources.rows() ? slice_rows(sources, boundary, sources.rows()) : sources;
}

Series Dataset::eval_observed() const {
  return boundary < observed.rows() ? slice_rows(observed, boundary, observed.rows()) : observed;
}

Dataset build_dataset(const Series& sources_raw, const MixingModel& mixing, std::size_t window,
                      double test_fraction) {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw ContractViolation("build_dataset: test_fraction must be in [0, 1)");
  if (window < 2) throw ContractViolation("build_dataset: window too small");

  Dataset ds;
  ds.sources = standardize_columns(sources_raw, &ds.source_stats);
  ds.observed = flows::decode(mixing.stack, ds.sources);
  const std::size_t t = ds.sources.rows();
  ds.boundary = t - static_cast<std::size_t>(std::floor(static_cast<double>(t) * test_fraction));
  ds.window = window;
  if (window > ds.boundary)
    throw ContractViolation("build_dataset: window larger than the train region");
  return ds;
}

void export_dataset(const Dataset& ds, const MixingModel& mixing, const std::string& dir,
                    const std::string& kind, std::uint64_t seed, const std::string& spec_json) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  const std::size_t t = ds.sources.rows();
  const std::size_t d = ds.sources.cols();
  std::ostringstream csv;
  csv << "t";
  for (std::size_t j = 0; j < d; ++j) csv << ",src_" << (j + 1);
  for (std::size_t j = 0; j < d; ++j) csv << ",obs_" << (j + 1);
  csv << "\n";
  for (std::size_t r = 0; r < t; ++r) {
    csv << r;
    for (std::size_t j = 0; j < d; ++j) csv << ',' << io::format_exact(ds.sources(r, j));
    for (std::size_t j = 0; j < d; ++j) csv << ',' << io::format_exact(ds.observed(r, j));
    csv << "\n";
  }
  io::atomic_write((fs::path(dir) / "dataset.csv").string(), csv.str());

  flows::save_checkpoint(mixing.stack, (fs::path(dir) / "mixing.ckpt").string());

  nlohmann::json manifest;
  manifest["kind"] = kind;
  manifest["seed"] = seed;
  manifest["spec"] = nlohmann::json::parse(spec_json.empty() ? "{}" : spec_json);
  manifest["boundary"] = ds.boundary;
  manifest["window"] = ds.window;
  manifest["mixing_checkpoint"] = "mixing.ckpt";
  manifest["mixing_logdet_range"] = {mixing.logdet_min, mixing.logdet_max};
  manifest["source_mean"] = std::vector<double>(ds.source_stats.mean.data(),
                                                ds.source_stats.mean.data() + d);
  manifest["source_std"] =
      std::vector<double>(ds.source_stats.std.data(), ds.source_stats.std.data() + d);
  io::atomic_write((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

ImportedDataset import_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  const std::string csv_path = (fs::path(dir) / "dataset.csv").string();

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError("import_dataset: bad manifest " + manifest_path + ": " + e.what());
  }

  ImportedDataset imp;
  imp.kind = manifest.value("kind", "");
  imp.seed = manifest.value("seed", std::uint64_t{0});
  imp.mixing_checkpoint = manifest.value("mixing_checkpoint", "mixing.ckpt");
  imp.dataset.boundary = manifest.at("boundary").get<std::size_t>();
  imp.dataset.window = manifest.at("window").get<std::size_t>();

  const std::string text = io::read_text(csv_path);
  std::istringstream lines(text);
  std::string line;
  if (!std::getline(lines, line)) throw IngestionError("import_dataset: empty " + csv_path);
  const auto header = io::split_csv_line(line);
  if (header.size() < 3 || (header.size() - 1) % 2 != 0)
    throw IngestionError("import_dataset: unexpected header in " + csv_path);
  const std::size_t d = (header.size() - 1) / 2;

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto toks = io::split_csv_line(line);
    if (toks.size() != header.size())
      throw IngestionError("import_dataset: ragged row in " + csv_path);
    for (std::size_t j = 1; j < toks.size(); ++j)
      values.push_back(io::parse_double(toks[j], csv_path));
    ++rows;
  }
  imp.dataset.sources = Series(rows, d);
  imp.dataset.observed = Series(rows, d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      imp.dataset.sources(r, j) = values[r * 2 * d + j];
      imp.dataset.observed(r, j) = values[r * 2 * d + d + j];
    }
  }

  if (manifest.contains("source_mean")) {
    const auto mv = manifest["source_mean"].get<std::vector<double>>();
    const auto sv = manifest["source_std"].get<std::vector<double>>();
    imp.dataset.source_stats.mean = Matrix(1, mv.size());
    imp.dataset.source_stats.std = Matrix(1, sv.size());
    for (std::size_t j = 0; j < mv.size(); ++j) {
      imp.dataset.source_stats.mean(0, j) = mv[j];
      imp.dataset.source_stats.std(0, j) = sv[j];
    }
  }
  return imp;
}

}  // namespace slowflow::datagen
