#include "mam/weightnet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mam/error.hpp"
#include "mam/model.hpp"
#include "mam/rng.hpp"

namespace mam {
namespace {

constexpr double kInitStd = 0.01;

void check_shape(const WeightNetParams& theta) {
  const std::size_t h = theta.hidden();
  if (h == 0 || theta.b1.size() != h || theta.w2.size() != h) {
    throw std::invalid_argument("weight net parameter arrays are inconsistent");
  }
}

}  // namespace

WeightNetParams WeightNetParams::zeros(std::size_t hidden) {
  return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0),
          std::vector<double>(hidden, 0.0), 0.0};
}

std::vector<double> WeightNetParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.insert(flat.end(), w1.begin(), w1.end());
  flat.insert(flat.end(), b1.begin(), b1.end());
  flat.insert(flat.end(), w2.begin(), w2.end());
  flat.push_back(b2);
  return flat;
}

WeightNetParams WeightNetParams::unflatten(std::size_t hidden, std::span<const double> flat) {
  if (flat.size() != 3 * hidden + 1) {
    throw std::invalid_argument("weight net flat vector has wrong length");
  }
  WeightNetParams theta;
  theta.w1.assign(flat.begin(), flat.begin() + hidden);
  theta.b1.assign(flat.begin() + hidden, flat.begin() + 2 * hidden);
  theta.w2.assign(flat.begin() + 2 * hidden, flat.begin() + 3 * hidden);
  theta.b2 = flat[3 * hidden];
  return theta;
}

WeightNetParams init_weightnet(std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("weight net hidden width must be >= 1");
  Rng rng(seed);
  WeightNetParams theta = WeightNetParams::zeros(hidden);
  for (double& w : theta.w1) w = gaussian(rng, 0.0, kInitStd);
  for (double& w : theta.w2) w = gaussian(rng, 0.0, kInitStd);
  return theta;
}

WeightNetForward v_forward(const WeightNetParams& theta, double loss) {
  check_shape(theta);
  if (!std::isfinite(loss)) throw std::invalid_argument("weight net input is not finite");
  WeightNetForward out;
  out.cache.loss = loss;
  out.cache.hidden.resize(theta.hidden());
  double z = theta.b2;
  for (std::size_t h = 0; h < theta.hidden(); ++h) {
    const double a = std::tanh(theta.w1[h] * loss + theta.b1[h]);
    out.cache.hidden[h] = a;
    z += theta.w2[h] * a;
  }
  out.weight = sigmoid(z);
  out.cache.output = out.weight;
  return out;
}

double v_weight(const WeightNetParams& theta, double loss) {
  return v_forward(theta, loss).weight;
}

WeightNetParams v_grad_theta(const WeightNetParams& theta, double loss,
                             const WeightNetCache& cache) {
  check_shape(theta);
  if (cache.hidden.size() != theta.hidden() || cache.loss != loss) {
    throw std::invalid_argument("weight net cache does not match this forward pass");
  }
  const double dz = cache.output * (1.0 - cache.output);
  WeightNetParams g = WeightNetParams::zeros(theta.hidden());
  g.b2 = dz;
  for (std::size_t h = 0; h < theta.hidden(); ++h) {
    const double a = cache.hidden[h];
    g.w2[h] = dz * a;
    const double da = dz * theta.w2[h] * (1.0 - a * a);
    g.b1[h] = da;
    g.w1[h] = da * loss;
  }
  return g;
}

void to_json(nlohmann::json& j, const WeightNetParams& theta) {
  j = nlohmann::json{{"hidden", theta.hidden()},
                     {"hidden_activation", "tanh"},
                     {"output_activation", "sigmoid"},
                     {"w1", theta.w1},
                     {"b1", theta.b1},
                     {"w2", theta.w2},
                     {"b2", theta.b2}};
}

void from_json(const nlohmann::json& j, WeightNetParams& theta) {
  try {
    theta.w1 = j.at("w1").get<std::vector<double>>();
    theta.b1 = j.at("b1").get<std::vector<double>>();
    theta.w2 = j.at("w2").get<std::vector<double>>();
    theta.b2 = j.at("b2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed weight net: ") + e.what());
  }
  if (theta.hidden() == 0 || theta.b1.size() != theta.hidden() ||
      theta.w2.size() != theta.hidden()) {
    throw ConfigError("malformed weight net: inconsistent hidden width");
  }
}

}  // namespace mam
