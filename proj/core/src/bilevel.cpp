#include "mam/bilevel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <string>

#include "mam/io.hpp"

namespace mam {
namespace {

// Offset so the weight-net initialisation and the batch sampler draw from
// unrelated streams even though both derive from cfg.seed.
constexpr std::uint64_t kThetaSeedOffset = 0x9E3779B97F4A7C15ULL;

std::size_t effective_batch(const TrainConfig& cfg, std::size_t n, std::size_t m) {
  return std::min({cfg.batch, n, m});
}

double sample_weight(const WeightNetParams& theta, double loss, const TrainConfig& cfg) {
  return cfg.frozen_weights ? 1.0 : v_weight(theta, loss);
}

// Loss and beta-gradient of every batch member at `beta`; weights left empty.
BatchTerms batch_terms(const AdditiveParams& beta, const Samples& set,
                       std::span<const std::size_t> batch, Task task) {
  BatchTerms terms;
  terms.index.assign(batch.begin(), batch.end());
  terms.loss.resize(batch.size());
  terms.grad = Matrix(batch.size(), beta.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto psi = set.psi.row(batch[i]);
    const auto lv = task_loss(task, set.y[batch[i]], predict(beta, psi));
    terms.loss[i] = lv.loss;
    auto g = terms.grad.row(i);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = lv.grad * psi[k];
  }
  return terms;
}

// beta - eta * [ (1/b) sum_i w_i g_i + penalty term ], the shared body of the
// virtual and the actual update.
AdditiveParams weighted_step(const AdditiveParams& beta, const BatchTerms& terms, double eta,
                             const TrainConfig& cfg, bool use_prox) {
  const std::size_t width = beta.size();
  std::vector<double> acc(width, 0.0);
  for (std::size_t i = 0; i < terms.loss.size(); ++i) {
    const auto g = terms.grad.row(i);
    const double w = terms.weight[i];
    for (std::size_t k = 0; k < width; ++k) acc[k] += w * g[k];
  }
  const double b = static_cast<double>(terms.loss.size());

  AdditiveParams out = beta;
  const PenaltyConfig pen = cfg.penalty();
  if (use_prox) {
    for (std::size_t k = 0; k < width; ++k) out.beta[k] = beta.beta[k] - eta * (acc[k] / b);
    if (eta > 0.0) out = block_prox(out, pen, eta);
    return out;
  }
  const Matrix sub = penalty_subgrad(beta, pen);
  const auto s = sub.flat();
  for (std::size_t k = 0; k < width; ++k) {
    out.beta[k] = beta.beta[k] - eta * (acc[k] / b + s[k]);
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

HistoryRow make_row(std::size_t iteration, const AdditiveParams& beta,
                    const WeightNetParams& theta, const BatchTerms& terms, const MetaStep& meta,
                    const Samples& train_set, const TrainConfig& cfg) {
  HistoryRow row;
  row.iteration = iteration;
  row.train_loss = mean_of(terms.loss);
  row.meta_loss = meta.meta_loss;
  row.grad_theta_sq = squared_norm(meta.hypergrad);
  row.meta_grad_beta_sq = meta.meta_grad_beta_sq;

  double clean_sum = 0.0;
  double corrupt_sum = 0.0;
  std::size_t clean_n = 0;
  std::size_t corrupt_n = 0;
  const auto losses = sample_losses(beta, train_set, cfg.task);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double w = sample_weight(theta, losses[i], cfg);
    if (train_set.corrupted[i] != corruption::clean) {
      corrupt_sum += w;
      ++corrupt_n;
    } else {
      clean_sum += w;
      ++clean_n;
    }
  }
  row.mean_weight_clean = clean_n > 0 ? clean_sum / static_cast<double>(clean_n) : 0.0;
  if (corrupt_n > 0) row.mean_weight_corrupt = corrupt_sum / static_cast<double>(corrupt_n);
  row.block_norms = block_norms(beta);
  return row;
}

// Meta loss and gradient at beta_hat over the meta batch.
void meta_objective(const AdditiveParams& beta_hat, const Samples& meta,
                    std::span<const std::size_t> meta_batch, Task task, double& loss,
                    std::vector<double>& grad) {
  grad.assign(beta_hat.size(), 0.0);
  loss = 0.0;
  for (std::size_t j : meta_batch) {
    const auto psi = meta.psi.row(j);
    const auto lv = task_loss(task, meta.y[j], predict(beta_hat, psi));
    loss += lv.loss;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += lv.grad * psi[k];
  }
  const double inv = 1.0 / static_cast<double>(meta_batch.size());
  loss *= inv;
  for (double& g : grad) g *= inv;
}

}  // namespace

double TrainConfig::c1_value() const {
  return c1.value_or(static_cast<double>(iterations) / 2.0);
}

double TrainConfig::c2_value() const {
  return c2.value_or(std::sqrt(static_cast<double>(iterations)) / 2.0);
}

void TrainConfig::validate(std::size_t n_train, std::size_t n_meta, std::size_t p) const {
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  if (n_train == 0 || n_meta == 0) throw ConfigError("train and meta sets must be non-empty");
  if (!(eta_beta0 > 0.0) || !(eta_theta0 > 0.0)) throw ConfigError("step sizes must be > 0");
  if (iterations > 0 && (!(c1_value() > 0.0) || !(c2_value() > 0.0))) {
    throw ConfigError("schedule constants c1, c2 must be > 0");
  }
  if (hidden == 0) throw ConfigError("weight net hidden width must be >= 1");
  if (log_every == 0) throw ConfigError("log_every must be >= 1");
  if (!(kappa_select > 0.0 && kappa_select < 1.0)) {
    throw ConfigError("kappa_select must lie in (0, 1)");
  }
  penalty().validate(p);
}

bool TrainConfig::lower_level_compliant() const {
  const double tau_max = tau.empty() ? 1.0 : *std::max_element(tau.begin(), tau.end());
  return lambda * tau_max <= c3 / static_cast<double>(std::max<std::size_t>(iterations, 1));
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"T", cfg.iterations},
                     {"batch", cfg.batch},
                     {"eta_beta0", cfg.eta_beta0},
                     {"eta_theta0", cfg.eta_theta0},
                     {"c1", cfg.c1_value()},
                     {"c2", cfg.c2_value()},
                     {"c3", cfg.c3},
                     {"lambda", cfg.lambda},
                     {"tau", cfg.tau},
                     {"eps_norm", cfg.eps_norm},
                     {"prox_mode", cfg.prox_mode},
                     {"frozen_weights", cfg.frozen_weights},
                     {"seed", cfg.seed},
                     {"task", to_string(cfg.task)},
                     {"hidden", cfg.hidden},
                     {"log_every", cfg.log_every},
                     {"kappa_select", cfg.kappa_select}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  static const std::set<std::string> known = {
      "T",   "batch",     "eta_beta0",      "eta_theta0", "c1",   "c2",
      "c3",  "lambda",    "tau",            "eps_norm",   "prox_mode",
      "frozen_weights", "seed", "task", "hidden", "log_every", "kappa_select"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown train config key: " + key);
  }
  try {
    if (j.contains("T")) cfg.iterations = j.at("T").get<std::size_t>();
    if (j.contains("batch")) cfg.batch = j.at("batch").get<std::size_t>();
    if (j.contains("eta_beta0")) cfg.eta_beta0 = j.at("eta_beta0").get<double>();
    if (j.contains("eta_theta0")) cfg.eta_theta0 = j.at("eta_theta0").get<double>();
    if (j.contains("c1") && !j.at("c1").is_null()) cfg.c1 = j.at("c1").get<double>();
    if (j.contains("c2") && !j.at("c2").is_null()) cfg.c2 = j.at("c2").get<double>();
    if (j.contains("c3")) cfg.c3 = j.at("c3").get<double>();
    if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
    if (j.contains("tau") && !j.at("tau").is_null()) {
      cfg.tau = j.at("tau").get<std::vector<double>>();
    }
    if (j.contains("eps_norm")) cfg.eps_norm = j.at("eps_norm").get<double>();
    if (j.contains("prox_mode")) cfg.prox_mode = j.at("prox_mode").get<bool>();
    if (j.contains("frozen_weights")) cfg.frozen_weights = j.at("frozen_weights").get<bool>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("task")) cfg.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::size_t>();
    if (j.contains("log_every")) cfg.log_every = j.at("log_every").get<std::size_t>();
    if (j.contains("kappa_select")) cfg.kappa_select = j.at("kappa_select").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
}

StepSizes step_sizes(std::size_t t, const TrainConfig& cfg) {
  if (t == 0) throw std::invalid_argument("step_sizes: t must be >= 1");
  const double td = static_cast<double>(t);
  return {cfg.eta_beta0 * std::min(1.0, cfg.c1_value() / td),
          cfg.eta_theta0 * std::min(1.0, cfg.c2_value() / std::sqrt(td))};
}

std::vector<std::size_t> minibatch(Rng& rng, std::size_t n_items, std::size_t b) {
  if (b == 0 || b > n_items) {
    throw std::invalid_argument("minibatch: need 1 <= b <= n_items (b = " + std::to_string(b) +
                                ", n_items = " + std::to_string(n_items) + ")");
  }
  return sample_without_replacement(rng, n_items, b);
}

Samples make_samples(const BasisSpec& spec, const Dataset& ds) {
  return {transform_batch(spec, ds.x), ds.y, ds.corrupted};
}

std::vector<double> predictions(const AdditiveParams& params, const FeatureMatrix& psi) {
  std::vector<double> out(psi.rows());
  for (std::size_t i = 0; i < psi.rows(); ++i) out[i] = predict(params, psi.row(i));
  return out;
}

std::vector<double> sample_losses(const AdditiveParams& params, const Samples& set, Task task) {
  std::vector<double> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    out[i] = task_loss(task, set.y[i], predict(params, set.psi.row(i))).loss;
  }
  return out;
}

VirtualStep virtual_update(const AdditiveParams& beta, const WeightNetParams& theta,
                           const Samples& train, std::span<const std::size_t> batch,
                           double eta_beta, const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("virtual_update: empty batch");
  VirtualStep out;
  out.terms = batch_terms(beta, train, batch, cfg.task);
  if (!all_finite(out.terms.loss)) throw Error("non-finite training loss");
  out.terms.weight.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.terms.weight[i] = sample_weight(theta, out.terms.loss[i], cfg);
  }
  // The penalty gradient is always the smoothed one here: beta_hat must stay
  // differentiable in theta for the meta step.
  out.beta_hat = weighted_step(beta, out.terms, eta_beta, cfg, /*use_prox=*/false);
  return out;
}

MetaStep meta_update(const WeightNetParams& theta, const AdditiveParams& beta,
                     const AdditiveParams& beta_hat, const Samples& meta,
                     std::span<const std::size_t> meta_batch, const BatchTerms& terms,
                     double eta_theta, double eta_beta, const TrainConfig& cfg) {
  if (meta_batch.empty()) throw std::invalid_argument("meta_update: empty meta batch");
  if (beta.size() != beta_hat.size() || terms.grad.cols() != beta.size() ||
      meta.psi.values.cols() != beta.size()) {
    throw std::invalid_argument("meta_update: gradient dimensions do not match beta");
  }
  MetaStep out;
  std::vector<double> meta_grad;
  meta_objective(beta_hat, meta, meta_batch, cfg.task, out.meta_loss, meta_grad);
  out.meta_grad_beta_sq = squared_norm(meta_grad);
  out.hypergrad.assign(theta.size(), 0.0);
  if (cfg.frozen_weights) {
    out.theta = theta;
    return out;
  }

  // d meta / d theta = -(eta_beta / b) sum_i G_i dV_i/dtheta with
  // G_i = < mean meta gradient at beta_hat, train gradient of sample i at beta >.
  for (std::size_t i = 0; i < terms.loss.size(); ++i) {
    const double g_i = dot(meta_grad, terms.grad.row(i));
    const auto fwd = v_forward(theta, terms.loss[i]);
    const auto dv = v_grad_theta(theta, terms.loss[i], fwd.cache).flatten();
    for (std::size_t k = 0; k < dv.size(); ++k) out.hypergrad[k] += g_i * dv[k];
  }
  const double scale = -eta_beta / static_cast<double>(terms.loss.size());
  for (double& h : out.hypergrad) h *= scale;

  auto flat = theta.flatten();
  for (std::size_t k = 0; k < flat.size(); ++k) flat[k] -= eta_theta * out.hypergrad[k];
  out.theta = WeightNetParams::unflatten(theta.hidden(), flat);
  return out;
}

AdditiveParams actual_update(const AdditiveParams& beta, const WeightNetParams& theta_new,
                             const Samples& train, std::span<const std::size_t> batch,
                             double eta_beta, const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("actual_update: empty batch");
  BatchTerms terms = batch_terms(beta, train, batch, cfg.task);
  if (!all_finite(terms.loss)) throw Error("non-finite training loss");
  terms.weight.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    terms.weight[i] = sample_weight(theta_new, terms.loss[i], cfg);
  }
  return weighted_step(beta, terms, eta_beta, cfg, cfg.prox_mode);
}

DivergenceError::DivergenceError(std::size_t iteration, TrainHistory history)
    : Error("training diverged at iteration " + std::to_string(iteration)),
      iteration_(iteration),
      history_(std::move(history)) {}

TrainResult train(const TrainConfig& cfg, const Samples& train_set, const Samples& meta_set) {
  const std::size_t n = train_set.size();
  const std::size_t m = meta_set.size();
  const std::size_t p = train_set.psi.p;
  cfg.validate(n, m, p);
  if (meta_set.psi.p != p || meta_set.psi.d != train_set.psi.d) {
    throw ConfigError("train and meta sets use different bases");
  }

  TrainResult res{AdditiveParams::zeros(p, train_set.psi.d),
                  init_weightnet(cfg.hidden, cfg.seed + kThetaSeedOffset), {}};
  const std::size_t b = effective_batch(cfg, n, m);
  Rng rng(cfg.seed);

  for (std::size_t t = 1; t <= cfg.iterations; ++t) {
    const StepSizes eta = step_sizes(t, cfg);
    const auto train_batch = minibatch(rng, n, b);
    const auto meta_batch = minibatch(rng, m, b);

    VirtualStep vs;
    try {
      vs = virtual_update(res.beta, res.theta, train_set, train_batch, eta.beta, cfg);
    } catch (const Error&) {
      throw DivergenceError(t, std::move(res.history));
    }
    MetaStep ms = meta_update(res.theta, res.beta, vs.beta_hat, meta_set, meta_batch, vs.terms,
                              eta.theta, eta.beta, cfg);
    if (!std::isfinite(ms.meta_loss) || !all_finite(ms.hypergrad)) {
      throw DivergenceError(t, std::move(res.history));
    }

    // Actual update: same per-sample terms at beta, reweighted by the new net.
    BatchTerms& terms = vs.terms;
    for (std::size_t i = 0; i < terms.loss.size(); ++i) {
      terms.weight[i] = sample_weight(ms.theta, terms.loss[i], cfg);
    }
    res.beta = weighted_step(res.beta, terms, eta.beta, cfg, cfg.prox_mode);
    res.theta = std::move(ms.theta);
    if (!all_finite(res.beta.beta)) throw DivergenceError(t, std::move(res.history));

    if (t % cfg.log_every == 0 || t == cfg.iterations || t == 1) {
      res.history.rows.push_back(make_row(t, res.beta, res.theta, terms, ms, train_set, cfg));
    }
  }
  return res;
}

void TrainHistory::write_csv(std::ostream& os) const {
  const std::size_t p = rows.empty() ? 0 : rows.front().block_norms.size();
  os << "iteration,train_loss,meta_loss,grad_theta_sq,meta_grad_beta_sq,mean_weight_clean,"
        "mean_weight_corrupt";
  for (std::size_t j = 0; j < p; ++j) os << ",norm_" << (j + 1);
  os << '\n';
  for (const auto& r : rows) {
    os << r.iteration << ',' << format_double(r.train_loss) << ',' << format_double(r.meta_loss)
       << ',' << format_double(r.grad_theta_sq) << ',' << format_double(r.meta_grad_beta_sq)
       << ',' << format_double(r.mean_weight_clean) << ',';
    if (r.mean_weight_corrupt) os << format_double(*r.mean_weight_corrupt);
    for (double v : r.block_norms) os << ',' << format_double(v);
    os << '\n';
  }
}

}  // namespace mam
