#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "mam/basis.hpp"
#include "mam/bilevel.hpp"
#include "mam/datagen.hpp"
#include "mam/eval.hpp"

namespace mam::cli {

/// Train/meta/test sets for one repeat of the synthetic protocol.
Split generate_split(const ExperimentConfig& cfg, std::uint64_t seed);

/// Split from a CSV file (load_csv + random 3:1:1 style partition).
Split load_split(const ExperimentConfig& cfg, std::uint64_t seed);

struct RunOutcome {
  BasisSpec basis;
  TrainResult result;
  RunMetrics metrics;
};

/// Fits the basis on the train part, trains, and scores the test part.
RunOutcome run_experiment(const Split& split, const ExperimentConfig& cfg,
                          const TrainConfig& train_cfg);

RunMetrics score(const Split& split, const BasisSpec& basis, const AdditiveParams& beta,
                 const WeightNetParams& theta, const TrainConfig& train_cfg);

/// Model bundle: basis, coefficients, weight net and the resolved config.
nlohmann::json make_bundle(const ExperimentConfig& cfg, const BasisSpec& basis,
                           const AdditiveParams& beta, const WeightNetParams& theta,
                           std::optional<double> train_loss_max = std::nullopt);

struct Bundle {
  ExperimentConfig config;
  BasisSpec basis;
  AdditiveParams beta;
  WeightNetParams theta;
  std::optional<double> train_loss_max;  // largest per-sample training loss at the end
};

Bundle read_bundle(const std::filesystem::path& path);

/// Grid of (loss, V(loss)) rows, `resolution` points over [0, loss_max].
void write_weight_curve(std::ostream& os, const WeightNetParams& theta, double loss_max,
                        std::size_t resolution);

struct SweepRow {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunMetrics metrics;
};

/// lambda grid x repeats; runs execute on `threads` workers, rows come back in
/// grid order regardless of completion order.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// One row per lambda: run counts and mean / sample sd of each metric over
/// successful runs.
void write_sweep_summary(std::ostream& os, const std::vector<SweepRow>& rows);

/// Writes `content` to dir/name, creating dir; throws ConfigError on failure.
void write_text(const std::filesystem::path& dir, const std::string& name,
                const std::string& content);

}  // namespace mam::cli
