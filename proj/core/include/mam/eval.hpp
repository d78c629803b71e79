#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mam/weightnet.hpp"

namespace mam {

double mse(std::span<const double> pred, std::span<const double> y);
double accuracy(std::span<const double> pred_labels, std::span<const double> y);

/// Binary macro-F1 over classes {0, 1}; a class with no predicted and no true
/// members contributes F1 = 0.
double macro_f1(std::span<const double> pred_labels, std::span<const double> y);

struct SelectionScore {
  double asp = 0.0;  // mean recall of the true support
  double fsr = 0.0;  // mean share of irrelevant coordinates selected
};

SelectionScore asp(std::span<const std::vector<std::size_t>> selected_runs,
                   std::span<const std::size_t> true_support, std::size_t p);

struct WeightAudit {
  double mean_clean = 0.0;
  std::optional<double> mean_corrupt;
};

WeightAudit weight_audit(const WeightNetParams& theta, std::span<const double> losses,
                         std::span<const std::uint8_t> flags);

/// Hard labels from probabilities: 1 iff prob >= 0.5.
std::vector<double> hard_labels(std::span<const double> probs);

struct RunMetrics {
  double mse_vs_labels = 0.0;
  std::optional<double> mse_vs_fstar;
  std::optional<double> accuracy;
  std::optional<double> macro_f1;
  std::vector<std::size_t> selected;  // 0-based
  std::optional<double> asp;
  std::optional<double> false_selection_rate;
  double mean_weight_clean = 0.0;
  std::optional<double> mean_weight_corrupt;
  double wall_time = 0.0;  // seconds; not part of the JSON form

  /// Header matching csv_row(): lambda,seed,status, then the metric columns.
  static const char* csv_header();
  std::string csv_row(double lambda, std::uint64_t seed) const;
};

/// JSON form; `selected` is written 1-based. wall_time is omitted so the
/// object is reproducible byte for byte.
void to_json(nlohmann::json& j, const RunMetrics& m);
void from_json(const nlohmann::json& j, RunMetrics& m);

}  // namespace mam
