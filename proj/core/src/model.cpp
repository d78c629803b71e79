#include "mam/model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "mam/error.hpp"
#include "mam/io.hpp"

namespace mam {
namespace {

void check_width(const AdditiveParams& params, std::span<const double> psi) {
  if (psi.size() != params.size()) {
    throw std::invalid_argument("dimension mismatch: psi has " + std::to_string(psi.size()) +
                                " entries, beta has " + std::to_string(params.size()));
  }
}

double tau_of(const PenaltyConfig& cfg, std::size_t j) {
  return cfg.tau.empty() ? 1.0 : cfg.tau[j];
}

}  // namespace

std::string_view to_string(Task task) {
  return task == Task::regression ? "regression" : "classification";
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::regression;
  if (name == "classification") return Task::classification;
  throw ConfigError("unknown task: " + std::string(name));
}

AdditiveParams AdditiveParams::from_matrix(const Matrix& blocks) {
  AdditiveParams out = zeros(blocks.rows(), blocks.cols());
  std::copy(blocks.flat().begin(), blocks.flat().end(), out.beta.begin());
  return out;
}

Matrix AdditiveParams::to_matrix() const {
  Matrix m(p, d);
  std::copy(beta.begin(), beta.end(), m.flat().begin());
  return m;
}

void PenaltyConfig::validate(std::size_t p) const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(eps_norm > 0.0)) throw ConfigError("eps_norm must be > 0");
  if (!tau.empty() && tau.size() != p) {
    throw ConfigError("tau has " + std::to_string(tau.size()) + " entries, expected " +
                      std::to_string(p));
  }
  for (double t : tau) {
    if (!(t >= 0.0)) throw ConfigError("tau entries must be >= 0");
  }
}

double predict(const AdditiveParams& params, std::span<const double> psi) {
  check_width(params, psi);
  return dot(psi, params.beta);
}

std::vector<double> component_values(const AdditiveParams& params, std::span<const double> psi) {
  check_width(params, psi);
  std::vector<double> f(params.p);
  for (std::size_t j = 0; j < params.p; ++j) {
    f[j] = dot(psi.subspan(j * params.d, params.d), params.block(j));
  }
  return f;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_proba(const AdditiveParams& params, std::span<const double> psi) {
  return sigmoid(predict(params, psi));
}

LossValue squared_loss(double y, double yhat) {
  const double r = yhat - y;
  return {r * r, 2.0 * r};
}

LossValue logistic_loss(double y, double margin) {
  if (y != 0.0 && y != 1.0) {
    throw std::invalid_argument("logistic loss needs a label in {0, 1}");
  }
  // log(1 + e^m) = max(m, 0) + log1p(e^{-|m|})
  const double softplus = std::max(margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
  return {softplus - y * margin, sigmoid(margin) - y};
}

LossValue task_loss(Task task, double y, double f) {
  return task == Task::regression ? squared_loss(y, f) : logistic_loss(y, f);
}

std::vector<double> block_norms(const AdditiveParams& params) {
  std::vector<double> norms(params.p);
  for (std::size_t j = 0; j < params.p; ++j) norms[j] = std::sqrt(squared_norm(params.block(j)));
  return norms;
}

double group_penalty(const AdditiveParams& params, const PenaltyConfig& cfg) {
  double total = 0.0;
  const auto norms = block_norms(params);
  for (std::size_t j = 0; j < params.p; ++j) total += tau_of(cfg, j) * norms[j];
  return cfg.lambda * total;
}

double smoothed_group_penalty(const AdditiveParams& params, const PenaltyConfig& cfg) {
  const double eps2 = cfg.eps_norm * cfg.eps_norm;
  double total = 0.0;
  for (std::size_t j = 0; j < params.p; ++j) {
    total += tau_of(cfg, j) * std::sqrt(squared_norm(params.block(j)) + eps2);
  }
  return cfg.lambda * total;
}

Matrix penalty_subgrad(const AdditiveParams& params, const PenaltyConfig& cfg) {
  Matrix g(params.p, params.d);
  const double eps2 = cfg.eps_norm * cfg.eps_norm;
  for (std::size_t j = 0; j < params.p; ++j) {
    const auto b = params.block(j);
    const double scale = cfg.lambda * tau_of(cfg, j) / std::sqrt(squared_norm(b) + eps2);
    for (std::size_t k = 0; k < params.d; ++k) g(j, k) = scale * b[k];
  }
  return g;
}

AdditiveParams block_prox(const AdditiveParams& params, const PenaltyConfig& cfg, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("block_prox: step must be > 0");
  AdditiveParams out = params;
  for (std::size_t j = 0; j < params.p; ++j) {
    auto b = out.block(j);
    const double norm = std::sqrt(squared_norm(b));
    const double threshold = step * cfg.lambda * tau_of(cfg, j);
    const double shrink = norm > threshold ? 1.0 - threshold / norm : 0.0;
    for (double& v : b) v *= shrink;
  }
  return out;
}

std::vector<std::size_t> selected_set(const AdditiveParams& params, double kappa_select) {
  if (!(kappa_select > 0.0 && kappa_select < 1.0)) {
    throw std::invalid_argument("kappa_select must lie in (0, 1)");
  }
  const auto norms = block_norms(params);
  const double top = norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
  std::vector<std::size_t> out;
  if (top == 0.0) return out;
  for (std::size_t j = 0; j < norms.size(); ++j) {
    if (norms[j] > kappa_select * top) out.push_back(j);
  }
  return out;
}

std::vector<double> tau_bound(const BasisSpec& spec, double lambda, double output_bound,
                              double f_inf, Task task) {
  if (!(lambda > 0.0)) throw std::invalid_argument("tau_bound: lambda must be > 0");
  const double root_d = std::sqrt(static_cast<double>(spec.d));
  std::vector<double> tau(spec.p);
  for (std::size_t j = 0; j < spec.p; ++j) {
    if (task == Task::regression) {
      if (output_bound < 0.0 || f_inf < 0.0) {
        throw std::invalid_argument("tau_bound: S and f_inf must be >= 0");
      }
      tau[j] = root_d * (f_inf + output_bound) * spec.sup_norm[j] / lambda;
    } else {
      tau[j] = 2.0 * root_d * spec.sup_norm[j] / lambda;
    }
  }
  return tau;
}

void write_component_csv(std::ostream& os, const BasisSpec& spec, const AdditiveParams& params,
                         std::span<const std::size_t> coordinates, std::size_t resolution) {
  if (resolution < 2) throw ConfigError("component grid needs at least 2 points");
  if (spec.p != params.p || spec.d != params.d) {
    throw std::invalid_argument("basis and coefficients disagree on p or d");
  }
  std::vector<double> psi(spec.d);
  os << "coordinate,u,f\n";
  for (std::size_t j : coordinates) {
    const auto& iv = spec.domain.at(j);
    for (std::size_t g = 0; g < resolution; ++g) {
      const double t = static_cast<double>(g) / static_cast<double>(resolution - 1);
      const double u = iv.lo + t * (iv.hi - iv.lo);
      eval_coordinate(spec, j, u, psi);
      os << (j + 1) << ',' << format_double(u) << ',' << format_double(dot(psi, params.block(j)))
         << '\n';
    }
  }
}

void to_json(nlohmann::json& j, const AdditiveParams& params) {
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t b = 0; b < params.p; ++b) {
    const auto blk = params.block(b);
    blocks.push_back(std::vector<double>(blk.begin(), blk.end()));
  }
  j = nlohmann::json{{"p", params.p}, {"d", params.d}, {"blocks", blocks}};
}

void from_json(const nlohmann::json& j, AdditiveParams& params) {
  try {
    params = AdditiveParams::zeros(j.at("p").get<std::size_t>(), j.at("d").get<std::size_t>());
    const auto& blocks = j.at("blocks");
    if (blocks.size() != params.p) throw ConfigError("coefficient block count != p");
    for (std::size_t b = 0; b < params.p; ++b) {
      const auto values = blocks.at(b).get<std::vector<double>>();
      if (values.size() != params.d) throw ConfigError("coefficient block length != d");
      std::copy(values.begin(), values.end(), params.block(b).begin());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed coefficients: ") + e.what());
  }
}

}  // namespace mam
