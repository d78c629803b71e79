#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mam/matrix.hpp"
#include "mam/model.hpp"
#include "mam/rng.hpp"

namespace mam {

/// Per-sample corruption flags (bit mask).
namespace corruption {
inline constexpr std::uint8_t clean = 0;
inline constexpr std::uint8_t label = 1;    // y perturbed: flipped, outlier, heavy noise component
inline constexpr std::uint8_t feature = 2;  // x perturbed
}  // namespace corruption

struct Dataset {
  Matrix x;
  std::vector<double> y;
  std::vector<std::uint8_t> corrupted;
  Task task = Task::regression;
  std::optional<std::vector<std::size_t>> true_support;  // 0-based
  std::optional<std::vector<double>> f_star;

  std::size_t size() const { return y.size(); }
  std::size_t dim() const { return x.cols(); }
  std::size_t corrupted_count() const;

  /// Throws ConfigError when lengths or labels are inconsistent.
  void validate() const;

  /// Rows `indices`, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
};

enum class NoiseKind { gauss, A, B, C };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

/// Component functions f_1 .. f_8 of the synthetic regression target.
double component_f(int j, double u);

/// One draw of the given noise law:
///   gauss: N(0,1)
///   A:     0.8 N(-2,1) + 0.2 N(8,1)
///   B:     0.8 N(0,1)  + 0.2 N(20,1)
///   C:     Student-t, 2 degrees of freedom
double sample_noise(NoiseKind kind, Rng& rng);

/// y = sum_{j<8} f_j(x_j) + noise with x ~ U(0,1)^p. For the mixtures A and B
/// exactly round(0.2 n) samples take the minority component; those are
/// flagged `corruption::label`.
Dataset gen_regression(std::size_t n, std::size_t p, NoiseKind noise, std::uint64_t seed);

/// x_ij = (W_ij + U_i) / 2, y = 1 iff (x_1 - .5)^2 + (x_2 - .5)^2 - 0.08 > 0.
Dataset gen_classification(std::size_t n, std::size_t p, std::uint64_t seed);

/// Flips exactly round(r1 n) labels of a classification set.
Dataset corrupt_labels(const Dataset& ds, double r1, Rng& rng);

/// Adds N(mean, var) to exactly round(r1 n) regression targets.
Dataset inject_outliers(const Dataset& ds, double r1, double mean, double var, Rng& rng);

/// Adds independent t(2) noise to every coordinate of round(r3 n) rows.
Dataset corrupt_features(const Dataset& ds, double r3, Rng& rng);

/// Subsamples so that class 0 makes up fraction r2 of the result. With
/// `n_out`, the result has exactly n_out rows (round(r2 n_out) negatives);
/// otherwise it is the largest such subset.
Dataset make_imbalanced(const Dataset& ds, double r2, Rng& rng,
                        std::optional<std::size_t> n_out = std::nullopt);

/// Replaces regression labels by f_star + N(0,1) and clears corruption flags.
Dataset relabel_gaussian(const Dataset& ds, Rng& rng);

/// Largest-remainder split sizes for the given ratios.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios);

struct Split {
  Dataset train;
  Dataset meta;
  Dataset test;
};

/// Random disjoint train/meta/test partition. With clean_meta the meta part
/// is drawn only from unflagged rows.
Split split(const Dataset& ds, const std::array<double, 3>& ratios, Rng& rng, bool clean_meta);

/// Generic ingestion: numeric CSV with a header; every column except
/// `target_column` becomes a feature, min-max rescaled to [0, 1].
Dataset load_csv(const std::filesystem::path& path, std::string_view target_column, Task task);

/// Artifact format: header x1..xp,y,flag[,f_star]; values written exactly.
void write_dataset_csv(std::ostream& os, const Dataset& ds);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset_csv(const std::filesystem::path& path, Task task);

}  // namespace mam
