#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mam/basis.hpp"
#include "mam/bilevel.hpp"
#include "mam/datagen.hpp"

namespace mam::cli {

/// Synthetic data protocol. Corruption knobs other than the intrinsic noise
/// law touch only the training portion; meta and test stay clean.
struct GeneratorConfig {
  std::size_t n = 200;
  std::size_t p = 100;
  NoiseKind noise = NoiseKind::B;  // regression only
  double outlier_r1 = 0.0;         // regression: share of train targets shifted
  double outlier_mean = 100.0;
  double outlier_var = 100.0;
  double flip_r1 = 0.0;  // classification: share of train labels flipped
  double r2 = 0.0;       // classification: negative share of train, 0 = natural
  double r3 = 0.0;       // share of train rows with t(2) feature noise
  std::array<double, 3> ratios{3.0, 1.0, 1.0};
  bool clean_meta = true;
  bool gaussian_eval_labels = true;  // regression: meta/test labels f* + N(0,1)
  bool balanced_eval = true;         // classification with r2: meta/test 50/50
  std::size_t pool_factor = 5;       // classification with r2: pool = factor * n
};

struct CsvSource {
  std::string path;
  std::string target = "y";
};

struct CurveConfig {
  std::size_t resolution = 201;
  std::optional<double> loss_max;  // default: largest training loss in the bundle
};

struct ExperimentConfig {
  Task task = Task::regression;
  GeneratorConfig generator;
  std::optional<CsvSource> csv;
  BasisKind basis = BasisKind::bspline_cubic;
  std::size_t d = 6;
  TrainConfig train;
  std::vector<double> lambda_grid{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  std::size_t repeats = 5;
  std::uint64_t seed_base = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency
  std::string output_dir = "mam_out";
  CurveConfig curves;

  /// Checks everything that does not depend on loaded data.
  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& g);
void from_json(const nlohmann::json& j, GeneratorConfig& g);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Reads and validates a config file; unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);

}  // namespace mam::cli
