#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mam/error.hpp"
#include "mam/weightnet.hpp"
#include "oracles.hpp"

namespace {

using namespace mam;

WeightNetParams random_theta(std::size_t hidden, std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> g(0.0, sd);
  auto theta = WeightNetParams::zeros(hidden);
  for (double& v : theta.w1) v = g(rng);
  for (double& v : theta.b1) v = g(rng);
  for (double& v : theta.w2) v = g(rng);
  theta.b2 = g(rng);
  return theta;
}

TEST(InitWeightnet, NearHalfAndDeterministic) {
  for (std::size_t h : {1u, 7u, 100u}) {
    const auto theta = init_weightnet(h, 42);
    EXPECT_NEAR(v_weight(theta, 0.0), 0.5, 0.02);
    EXPECT_EQ(theta, init_weightnet(h, 42));
    EXPECT_EQ(theta.b2, 0.0);
    for (double b : theta.b1) EXPECT_EQ(b, 0.0);
  }
  EXPECT_EQ(init_weightnet(100, 0).size(), 301u);
  EXPECT_EQ(init_weightnet(100, 0).flatten().size(), 301u);
  EXPECT_NE(init_weightnet(10, 1), init_weightnet(10, 2));
  EXPECT_THROW(init_weightnet(0, 0), ConfigError);
}

TEST(VForward, HandValues) {
  EXPECT_EQ(v_weight(WeightNetParams::zeros(5), 123.0), 0.5);
  const WeightNetParams unit{{1.0}, {0.0}, {1.0}, 0.0};
  EXPECT_EQ(v_weight(unit, 0.0), 0.5);
  EXPECT_NEAR(v_weight(unit, 1.0), 0.6816997421945262, 1e-12);
  EXPECT_THROW(v_forward(unit, NAN), std::invalid_argument);
}

TEST(VForward, MatchesOracleAndStaysInUnitInterval) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> exponent(-3.0, 6.0);
  for (int r = 0; r < 10000; ++r) {
    const auto theta = random_theta(4, rng, 2.0);
    const double loss = std::pow(10.0, exponent(rng));
    const double v = v_weight(theta, loss);
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
    if (r % 50 == 0) EXPECT_NEAR(v, oracle::weight_net(theta.flatten(), loss), 1e-14);
  }
}

TEST(VForward, LipschitzInLoss) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int r = 0; r < 200; ++r) {
    const auto theta = random_theta(6, rng, 1.0);
    double n1 = 0.0, n2 = 0.0;
    for (double w : theta.w1) n1 += w * w;
    for (double w : theta.w2) n2 += w * w;
    const double c = std::sqrt(n1) * std::sqrt(n2) / 4.0;
    const double l = u(rng);
    const double h = 1e-3;
    EXPECT_LE(std::abs(v_weight(theta, l + h) - v_weight(theta, l)), c * h + 1e-15);
  }
}

TEST(VGradTheta, AtZero) {
  const auto theta = WeightNetParams::zeros(3);
  const auto fwd = v_forward(theta, 2.0);
  const auto g = v_grad_theta(theta, 2.0, fwd.cache);
  EXPECT_EQ(g.b2, 0.25);
  for (double v : g.w2) EXPECT_EQ(v, 0.0);
}

TEST(VGradTheta, KilledWhenOutputWeightsVanish) {
  std::mt19937_64 rng(3);
  auto theta = random_theta(4, rng, 1.0);
  for (double& w : theta.w2) w = 0.0;
  const auto g = v_grad_theta(theta, 1.7, v_forward(theta, 1.7).cache);
  for (double v : g.b1) EXPECT_EQ(v, 0.0);
  for (double v : g.w1) EXPECT_EQ(v, 0.0);
}

TEST(VGradTheta, MatchesCentralDifference) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> loss_dist(0.0, 5.0);
  for (int r = 0; r < 50; ++r) {
    const auto theta = random_theta(5, rng, 0.8);
    const double loss = loss_dist(rng);
    const auto g = v_grad_theta(theta, loss, v_forward(theta, loss).cache).flatten();
    const auto fd = oracle::central_gradient(
        [&](std::span<const double> t) { return oracle::weight_net(t, loss); }, theta.flatten(),
        1e-6);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double scale = std::max({std::abs(g[k]), std::abs(fd[k]), 1e-4});
      EXPECT_LE(std::abs(g[k] - fd[k]) / scale, 1e-5) << "component " << k;
    }
  }
}

TEST(VGradTheta, RejectsMismatchedCache) {
  const auto theta = init_weightnet(3, 0);
  const auto fwd = v_forward(theta, 1.0);
  EXPECT_THROW(v_grad_theta(theta, 2.0, fwd.cache), std::invalid_argument);
  EXPECT_THROW(v_grad_theta(init_weightnet(4, 0), 1.0, fwd.cache), std::invalid_argument);
}

TEST(WeightNetParams, FlattenRoundTripAndJson) {
  std::mt19937_64 rng(5);
  const auto theta = random_theta(6, rng, 1.0);
  EXPECT_EQ(WeightNetParams::unflatten(6, theta.flatten()), theta);
  const nlohmann::json j = theta;
  EXPECT_EQ(j.get<WeightNetParams>(), theta);
  nlohmann::json bad = j;
  bad["w2"].erase(0);
  EXPECT_THROW(bad.get<WeightNetParams>(), ConfigError);
}

}  // namespace
