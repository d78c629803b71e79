#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mam/rng.hpp"

namespace oracle {

Quadrature gauss_legendre(std::size_t n) {
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    q.nodes[i] = x;
    q.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

double quantile_type7(std::vector<double> values, double q) {
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

namespace {

double basis_rec(const std::vector<double>& t, std::size_t i, std::size_t k, double u, bool right_end) {
  if (k == 0) {
    if (right_end) return (t[i] < u && u <= t[i + 1]) ? 1.0 : 0.0;
    return (t[i] <= u && u < t[i + 1]) ? 1.0 : 0.0;
  }
  double out = 0.0;
  const double den1 = t[i + k] - t[i];
  if (den1 > 0.0) out += (u - t[i]) / den1 * basis_rec(t, i, k - 1, u, right_end);
  const double den2 = t[i + k + 1] - t[i + 1];
  if (den2 > 0.0) out += (t[i + k + 1] - u) / den2 * basis_rec(t, i + 1, k - 1, u, right_end);
  return out;
}

double sigmoid_naive(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::vector<double> bspline_recursive(double lo, double hi, const std::vector<double>& interior,
                                      double u) {
  std::vector<double> t(4, lo);
  t.insert(t.end(), interior.begin(), interior.end());
  t.insert(t.end(), 4, hi);
  const std::size_t d = interior.size() + 4;
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = basis_rec(t, i, 3, u, u >= hi);
  return out;
}

std::vector<double> central_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = xp[k];
    xp[k] = orig + h;
    const double fp = f(xp);
    xp[k] = orig - h;
    const double fm = f(xp);
    xp[k] = orig;
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double naive_logistic(double y, double m) { return std::log(1.0 + std::exp(m)) - y * m; }

double weight_net(std::span<const double> theta, double loss) {
  const std::size_t h = (theta.size() - 1) / 3;
  double z = theta[3 * h];
  for (std::size_t k = 0; k < h; ++k) z += theta[2 * h + k] * std::tanh(theta[k] * loss + theta[h + k]);
  return sigmoid_naive(z);
}

double unrolled_meta_objective(const UnrolledInstance& inst, std::span<const double> theta) {
  const std::size_t width = inst.p * inst.d;
  auto predict = [&](const std::vector<double>& psi, const std::vector<double>& beta) {
    double s = 0.0;
    for (std::size_t k = 0; k < width; ++k) s += psi[k] * beta[k];
    return s;
  };
  auto loss_and_slope = [&](double y, double f, double& loss, double& slope) {
    if (inst.logistic) {
      loss = naive_logistic(y, f);
      slope = sigmoid_naive(f) - y;
    } else {
      loss = (f - y) * (f - y);
      slope = 2.0 * (f - y);
    }
  };

  const std::size_t b = inst.y_train.size();
  std::vector<double> step(width, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    double loss = 0.0;
    double slope = 0.0;
    loss_and_slope(inst.y_train[i], predict(inst.psi_train[i], inst.beta), loss, slope);
    const double v = weight_net(theta, loss);
    for (std::size_t k = 0; k < width; ++k) step[k] += v * slope * inst.psi_train[i][k] / static_cast<double>(b);
  }
  for (std::size_t j = 0; j < inst.p; ++j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < inst.d; ++k) sq += inst.beta[j * inst.d + k] * inst.beta[j * inst.d + k];
    const double denom = std::sqrt(sq + inst.eps_norm * inst.eps_norm);
    for (std::size_t k = 0; k < inst.d; ++k) step[j * inst.d + k] += inst.lambda * inst.beta[j * inst.d + k] / denom;
  }
  std::vector<double> beta_hat(width);
  for (std::size_t k = 0; k < width; ++k) beta_hat[k] = inst.beta[k] - inst.eta_beta * step[k];

  double total = 0.0;
  for (std::size_t j = 0; j < inst.y_meta.size(); ++j) {
    double loss = 0.0;
    double slope = 0.0;
    loss_and_slope(inst.y_meta[j], predict(inst.psi_meta[j], beta_hat), loss, slope);
    total += loss;
  }
  return total / static_cast<double>(inst.y_meta.size());
}

std::vector<std::vector<double>> plain_minibatch_gd(const std::vector<std::vector<double>>& psi,
                                                    const std::vector<double>& y,
                                                    std::size_t n_meta, std::size_t batch,
                                                    std::size_t iterations, double eta0,
                                                    double c1, std::uint64_t seed) {
  const std::size_t n = y.size();
  const std::size_t width = psi.front().size();
  std::vector<double> beta(width, 0.0);
  std::vector<std::vector<double>> path;
  mam::Rng rng(seed);
  for (std::size_t t = 1; t <= iterations; ++t) {
    const double eta = eta0 * std::min(1.0, c1 / static_cast<double>(t));
    const auto idx = mam::sample_without_replacement(rng, n, batch);
    (void)mam::sample_without_replacement(rng, n_meta, batch);
    std::vector<double> acc(width, 0.0);
    for (std::size_t i : idx) {
      double f = 0.0;
      for (std::size_t k = 0; k < width; ++k) f += psi[i][k] * beta[k];
      for (std::size_t k = 0; k < width; ++k) acc[k] += 2.0 * (f - y[i]) * psi[i][k];
    }
    for (std::size_t k = 0; k < width; ++k) {
      beta[k] = beta[k] - eta * (acc[k] / static_cast<double>(batch));
    }
    path.push_back(beta);
  }
  return path;
}

}  // namespace oracle
