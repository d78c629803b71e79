#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace mam {

/// Parameters of the weighting network
///   V(L) = sigmoid( sum_h w2[h] * tanh(w1[h] * L + b1[h]) + b2 ),
/// a one-input, one-output MLP with a single tanh hidden layer.
struct WeightNetParams {
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;

  static WeightNetParams zeros(std::size_t hidden);

  std::size_t hidden() const { return w1.size(); }
  std::size_t size() const { return 3 * hidden() + 1; }

  /// Flat order: w1, b1, w2, b2.
  std::vector<double> flatten() const;
  static WeightNetParams unflatten(std::size_t hidden, std::span<const double> flat);

  bool operator==(const WeightNetParams&) const = default;
};

/// Activations kept from a forward pass for the matching backward pass.
struct WeightNetCache {
  double loss = 0.0;
  std::vector<double> hidden;  // tanh activations
  double output = 0.0;         // V itself
};

struct WeightNetForward {
  double weight = 0.0;
  WeightNetCache cache;
};

/// W1, W2 ~ N(0, 0.01^2) from a generator seeded with `seed`; biases zero.
WeightNetParams init_weightnet(std::size_t hidden, std::uint64_t seed);

WeightNetForward v_forward(const WeightNetParams& theta, double loss);

/// Forward pass without keeping the cache.
double v_weight(const WeightNetParams& theta, double loss);

/// dV/dtheta, shaped like theta.
WeightNetParams v_grad_theta(const WeightNetParams& theta, double loss,
                             const WeightNetCache& cache);

void to_json(nlohmann::json& j, const WeightNetParams& theta);
void from_json(const nlohmann::json& j, WeightNetParams& theta);

}  // namespace mam
