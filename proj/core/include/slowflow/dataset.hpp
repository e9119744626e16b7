#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slowflow/matrix.hpp"
#include "slowflow/mixing.hpp"

namespace slowflow::datagen {

/// One labeled experiment dataset: standardized ground-truth sources, the
/// nonlinearly mixed observations, and the train/test split.
struct Dataset {
  Series sources;   // T x d, standardized before mixing
  Series observed;  // decode(mixing, sources), exact
  std::size_t boundary = 0;  // first test row; == T when there is no split
  std::size_t window = 0;
  ColumnStats source_stats;  // of the raw sources prior to standardization

  std::vector<Series> train_windows() const;
  Series train_observed() const;
  /// Scoring region: the test rows, or everything when there is no split.
  Series eval_sources() const;
  Series eval_observed() const;
  std::size_t eval_begin() const { return boundary < sources.rows() ? boundary : 0; }
};

/// Standardizes the sources, mixes them, and fixes the split at
/// floor(T * (1 - test_fraction)). The window must fit inside the train
/// region.
Dataset build_dataset(const Series& sources_raw, const MixingModel& mixing, std::size_t window,
                      double test_fraction);

/// Writes dataset.csv (t,src_1..src_d,obs_1..obs_d, exact decimals),
/// manifest.json and mixing.ckpt under dir. spec_json is the generator spec,
/// already serialized.
void export_dataset(const Dataset& ds, const MixingModel& mixing, const std::string& dir,
                    const std::string& kind, std::uint64_t seed, const std::string& spec_json);

struct ImportedDataset {
  Dataset dataset;
  std::string kind;
  std::uint64_t seed = 0;
  std::string mixing_checkpoint;
};

/// Reads back what export_dataset wrote.
ImportedDataset import_dataset(const std::string& dir);

}  // namespace slowflow::datagen
