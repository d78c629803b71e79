#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mam/basis.hpp"
#include "mam/datagen.hpp"
#include "mam/error.hpp"
#include "mam/model.hpp"
#include "mam/rng.hpp"
#include "mam/weightnet.hpp"

namespace mam {

/// Optimizer knobs for the bilevel training loop.
///
/// Step sizes follow eta_beta(t) = eta_beta0 * min(1, c1 / t) and
/// eta_theta(t) = eta_theta0 * min(1, c2 / sqrt(t)); unset c1, c2 default to
/// T / 2 and sqrt(T) / 2.
struct TrainConfig {
  std::size_t iterations = 3000;  // T
  std::size_t batch = 64;         // b, shared by the train and meta samplers
  double eta_beta0 = 0.1;
  double eta_theta0 = 0.01;
  std::optional<double> c1;
  std::optional<double> c2;
  double c3 = 1.0;  // only used for the lambda * tau <= c3 / T compliance report
  double lambda = 1e-3;
  std::vector<double> tau;  // empty means tau_j = 1
  double eps_norm = 1e-8;
  bool prox_mode = false;
  bool frozen_weights = false;  // V == 1: plain sparse additive model
  std::uint64_t seed = 0;
  Task task = Task::regression;
  std::size_t hidden = 100;
  std::size_t log_every = 10;
  double kappa_select = 1e-2;

  double c1_value() const;
  double c2_value() const;
  PenaltyConfig penalty() const { return {lambda, tau, eps_norm}; }

  /// Checks ranges against the train / meta sizes and input dimension p.
  void validate(std::size_t n_train, std::size_t n_meta, std::size_t p) const;

  /// lambda * max_j tau_j <= c3 / T.
  bool lower_level_compliant() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

struct StepSizes {
  double beta = 0.0;
  double theta = 0.0;
};

/// Step sizes for iteration t >= 1.
StepSizes step_sizes(std::size_t t, const TrainConfig& cfg);

/// b distinct indices from [0, n_items), increasing order.
std::vector<std::size_t> minibatch(Rng& rng, std::size_t n_items, std::size_t b);

/// A dataset already mapped through the basis.
struct Samples {
  FeatureMatrix psi;
  std::vector<double> y;
  std::vector<std::uint8_t> corrupted;

  std::size_t size() const { return y.size(); }
};

Samples make_samples(const BasisSpec& spec, const Dataset& ds);

/// Per-sample quantities of one train batch at the current beta.
struct BatchTerms {
  std::vector<std::size_t> index;
  std::vector<double> loss;
  std::vector<double> weight;
  Matrix grad;  // row i: gradient of sample i's loss with respect to beta
};

struct VirtualStep {
  AdditiveParams beta_hat;
  BatchTerms terms;
};

struct MetaStep {
  WeightNetParams theta;
  std::vector<double> hypergrad;  // d/dtheta of the meta loss at beta_hat(theta), flat order
  double meta_loss = 0.0;         // meta batch loss at beta_hat
  double meta_grad_beta_sq = 0.0; // ||d meta loss / d beta at beta_hat||^2
};

/// beta_hat = beta - eta_beta [ mean_i V(L_i; theta) grad L_i(beta) + smoothed penalty gradient ].
VirtualStep virtual_update(const AdditiveParams& beta, const WeightNetParams& theta,
                           const Samples& train, std::span<const std::size_t> batch,
                           double eta_beta, const TrainConfig& cfg);

/// One descent step of theta on the one-step-unrolled meta objective.
MetaStep meta_update(const WeightNetParams& theta, const AdditiveParams& beta,
                     const AdditiveParams& beta_hat, const Samples& meta,
                     std::span<const std::size_t> meta_batch, const BatchTerms& terms,
                     double eta_theta, double eta_beta, const TrainConfig& cfg);

/// Same step as virtual_update but with the updated weight net; in prox mode
/// the penalty is applied with block_prox after the weighted gradient step.
AdditiveParams actual_update(const AdditiveParams& beta, const WeightNetParams& theta_new,
                             const Samples& train, std::span<const std::size_t> batch,
                             double eta_beta, const TrainConfig& cfg);

struct HistoryRow {
  std::size_t iteration = 0;  // 1-based
  double train_loss = 0.0;
  double meta_loss = 0.0;
  double grad_theta_sq = 0.0;
  double meta_grad_beta_sq = 0.0;
  double mean_weight_clean = 0.0;
  std::optional<double> mean_weight_corrupt;
  std::vector<double> block_norms;

  bool operator==(const HistoryRow&) const = default;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;

  /// Columns: iteration,train_loss,meta_loss,grad_theta_sq,meta_grad_beta_sq,
  /// mean_weight_clean,mean_weight_corrupt,norm_1..norm_p
  void write_csv(std::ostream& os) const;

  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  AdditiveParams beta;
  WeightNetParams theta;
  TrainHistory history;
};

/// Raised when a loss becomes non-finite; carries the history logged so far.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, TrainHistory history);
  std::size_t iteration() const { return iteration_; }
  const TrainHistory& history() const { return history_; }

 private:
  std::size_t iteration_;
  TrainHistory history_;
};

/// Runs the bilevel loop for cfg.iterations steps from beta = 0 and the
/// seeded weight net. Deterministic given cfg.seed.
TrainResult train(const TrainConfig& cfg, const Samples& train_set, const Samples& meta_set);

/// Per-sample losses of `params` on every sample of `set`.
std::vector<double> sample_losses(const AdditiveParams& params, const Samples& set, Task task);

/// Predictions f(x_i) for every sample.
std::vector<double> predictions(const AdditiveParams& params, const FeatureMatrix& psi);

}  // namespace mam
