#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mam/basis.hpp"
#include "mam/matrix.hpp"

namespace mam {

enum class Task { regression, classification };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

/// Coefficients beta: p blocks of d, flattened in the same order as a
/// FeatureMatrix row.
struct AdditiveParams {
  std::size_t p = 0;
  std::size_t d = 0;
  std::vector<double> beta;

  static AdditiveParams zeros(std::size_t p, std::size_t d) {
    return {p, d, std::vector<double>(p * d, 0.0)};
  }
  static AdditiveParams from_matrix(const Matrix& blocks);

  std::size_t size() const { return beta.size(); }
  std::span<double> block(std::size_t j) { return std::span<double>(beta).subspan(j * d, d); }
  std::span<const double> block(std::size_t j) const {
    return std::span<const double>(beta).subspan(j * d, d);
  }
  Matrix to_matrix() const;

  bool operator==(const AdditiveParams&) const = default;
};

struct PenaltyConfig {
  double lambda = 0.0;
  std::vector<double> tau;
  double eps_norm = 1e-8;

  void validate(std::size_t p) const;
};

/// f(x) = <psi, beta>.
double predict(const AdditiveParams& params, std::span<const double> psi);

/// f_j(x_j) = sum_k beta_jk psi_jk(x_j), one entry per coordinate.
std::vector<double> component_values(const AdditiveParams& params, std::span<const double> psi);

double sigmoid(double z);

/// P(y = 1 | x) under the logistic link.
double predict_proba(const AdditiveParams& params, std::span<const double> psi);

struct LossValue {
  double loss = 0.0;
  double grad = 0.0;  // derivative with respect to the prediction
};

LossValue squared_loss(double y, double yhat);

/// Negative log-likelihood log(1 + e^m) - y m for y in {0, 1}.
LossValue logistic_loss(double y, double margin);

LossValue task_loss(Task task, double y, double f);

std::vector<double> block_norms(const AdditiveParams& params);

/// lambda * sum_j tau_j ||beta_j||_2, unsmoothed.
double group_penalty(const AdditiveParams& params, const PenaltyConfig& cfg);

/// lambda * sum_j tau_j sqrt(||beta_j||^2 + eps^2), whose gradient is penalty_subgrad.
double smoothed_group_penalty(const AdditiveParams& params, const PenaltyConfig& cfg);

/// Block j: lambda tau_j beta_j / sqrt(||beta_j||^2 + eps_norm^2). Returned as p x d.
Matrix penalty_subgrad(const AdditiveParams& params, const PenaltyConfig& cfg);

/// Group soft-thresholding, the proximal map of step * group_penalty.
AdditiveParams block_prox(const AdditiveParams& params, const PenaltyConfig& cfg, double step);

/// Coordinates whose block norm exceeds kappa_select times the largest block norm.
std::vector<std::size_t> selected_set(const AdditiveParams& params, double kappa_select);

/// Smallest tau_j for which the selection-consistency bound excludes an
/// irrelevant coordinate j:
///   regression:     sqrt(d) (f_inf + S) ||psi_j||_inf / lambda
///   classification: 2 sqrt(d) ||psi_j||_inf / lambda
std::vector<double> tau_bound(const BasisSpec& spec, double lambda, double output_bound,
                              double f_inf, Task task);

/// Writes "coordinate,u,f" rows: f_j evaluated on a uniform grid of the
/// coordinate's domain for each requested (0-based) coordinate.
void write_component_csv(std::ostream& os, const BasisSpec& spec, const AdditiveParams& params,
                         std::span<const std::size_t> coordinates, std::size_t resolution);

void to_json(nlohmann::json& j, const AdditiveParams& params);
void from_json(const nlohmann::json& j, AdditiveParams& params);

}  // namespace mam
