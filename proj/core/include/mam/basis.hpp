#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mam/matrix.hpp"

namespace mam {

enum class BasisKind { bspline_cubic, trig_orthonormal };

std::string_view to_string(BasisKind kind);
BasisKind parse_basis_kind(std::string_view name);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Interval&) const = default;
};

/// Per-coordinate basis family. Coordinate j maps x_j to the d values
/// psi_{j1}(x_j) ... psi_{jd}(x_j).
///
/// For cubic B-splines the knot vector of coordinate j is clamped:
/// four copies of domain[j].lo, the interior knots knots[j] (d - 4 of them),
/// then four copies of domain[j].hi. The trig family ignores knots.
struct BasisSpec {
  BasisKind kind = BasisKind::bspline_cubic;
  std::size_t d = 0;
  std::size_t p = 0;
  std::vector<Interval> domain;
  std::vector<std::vector<double>> knots;
  std::vector<double> sup_norm;

  std::size_t width() const { return p * d; }

  /// Throws ConfigError when a structural invariant is broken.
  void validate() const;

  bool operator==(const BasisSpec&) const = default;
};

/// Features laid out block-by-coordinate: column j*d + k holds psi_{jk}(x_ij).
struct FeatureMatrix {
  std::size_t p = 0;
  std::size_t d = 0;
  Matrix values;

  std::size_t rows() const { return values.rows(); }
  std::span<const double> row(std::size_t i) const { return values.row(i); }
};

/// Fits domains, quantile knots and grid sup-norms from training inputs.
BasisSpec fit_basis(const Matrix& x_train, std::size_t d,
                    BasisKind kind = BasisKind::bspline_cubic);

/// Evaluates the d basis functions of coordinate j at x (clamped to the domain).
void eval_coordinate(const BasisSpec& spec, std::size_t j, double x, std::span<double> out);

std::vector<double> transform(const BasisSpec& spec, std::span<const double> x);
FeatureMatrix transform_batch(const BasisSpec& spec, const Matrix& x);

/// Type-7 (linear interpolation) empirical quantile of an unsorted sample.
double empirical_quantile(std::vector<double> values, double q);

void to_json(nlohmann::json& j, const BasisSpec& spec);
void from_json(const nlohmann::json& j, BasisSpec& spec);

}  // namespace mam
