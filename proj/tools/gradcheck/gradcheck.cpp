#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "mam/basis.hpp"
#include "mam/bilevel.hpp"
#include "mam/rng.hpp"

namespace mam::gradcheck {
namespace {

Samples random_samples(const BasisSpec& spec, const Matrix& x, Task task, Rng& rng) {
  Samples s{transform_batch(spec, x), std::vector<double>(x.rows()),
            std::vector<std::uint8_t>(x.rows(), 0)};
  for (double& y : s.y) {
    y = task == Task::regression ? gaussian(rng, 0.0, 2.0) : (uniform01(rng) < 0.5 ? 0.0 : 1.0);
  }
  return s;
}

double inf_norm(const std::vector<double>& v, std::size_t first, std::size_t count) {
  double m = 0.0;
  for (std::size_t k = first; k < first + count; ++k) m = std::max(m, std::abs(v[k]));
  return m;
}

}  // namespace

Report check_instance(const Options& opt) {
  Rng rng(opt.seed);
  const std::size_t rows = opt.batch + opt.meta_batch;
  Matrix x(rows, opt.p);
  for (double& v : x.flat()) v = uniform01(rng);
  const BasisSpec spec = fit_basis(x, opt.d, BasisKind::bspline_cubic);

  Matrix x_train(0, opt.p);
  Matrix x_meta(0, opt.p);
  for (std::size_t i = 0; i < rows; ++i) (i < opt.batch ? x_train : x_meta).push_row(x.row(i));
  const Samples train = random_samples(spec, x_train, opt.task, rng);
  const Samples meta = random_samples(spec, x_meta, opt.task, rng);

  AdditiveParams beta = AdditiveParams::zeros(opt.p, opt.d);
  for (double& b : beta.beta) b = gaussian(rng, 0.0, 0.5);
  WeightNetParams theta = WeightNetParams::zeros(opt.hidden);
  auto flat_theta = theta.flatten();
  for (double& t : flat_theta) t = gaussian(rng, 0.0, opt.theta_scale);
  theta = WeightNetParams::unflatten(opt.hidden, flat_theta);

  TrainConfig cfg;
  cfg.task = opt.task;
  cfg.lambda = opt.lambda;
  cfg.hidden = opt.hidden;

  std::vector<std::size_t> train_idx(opt.batch);
  std::vector<std::size_t> meta_idx(opt.meta_batch);
  std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  std::iota(meta_idx.begin(), meta_idx.end(), std::size_t{0});

  // Analytic direction: theta_new - theta from one meta step.
  const VirtualStep vs = virtual_update(beta, theta, train, train_idx, opt.eta_beta, cfg);
  const MetaStep ms = meta_update(theta, beta, vs.beta_hat, meta, meta_idx, vs.terms,
                                  opt.eta_theta, opt.eta_beta, cfg);
  const auto new_flat = ms.theta.flatten();
  std::vector<double> analytic(flat_theta.size());
  for (std::size_t k = 0; k < analytic.size(); ++k) analytic[k] = new_flat[k] - flat_theta[k];
  if (opt.inject_sign_flip) {
    for (double& a : analytic) a = -a;
  }

  // Finite-difference direction: -eta_theta * d/dtheta meta_loss(beta_hat(theta)).
  auto objective = [&](const std::vector<double>& flat) {
    const auto th = WeightNetParams::unflatten(opt.hidden, flat);
    const VirtualStep v = virtual_update(beta, th, train, train_idx, opt.eta_beta, cfg);
    double total = 0.0;
    for (std::size_t j : meta_idx) {
      total += task_loss(opt.task, meta.y[j], predict(v.beta_hat, meta.psi.row(j))).loss;
    }
    return total / static_cast<double>(meta_idx.size());
  };
  std::vector<double> fd(flat_theta.size());
  std::vector<double> probe = flat_theta;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + opt.fd_step;
    const double up = objective(probe);
    probe[k] = orig - opt.fd_step;
    const double down = objective(probe);
    probe[k] = orig;
    fd[k] = -opt.eta_theta * (up - down) / (2.0 * opt.fd_step);
  }

  Report report;
  report.task = opt.task;
  report.seed = opt.seed;
  const std::size_t h = opt.hidden;
  const struct {
    const char* name;
    std::size_t first;
    std::size_t count;
  } layout[] = {{"w1", 0, h}, {"b1", h, h}, {"w2", 2 * h, h}, {"b2", 3 * h, 1}};
  std::vector<double> diff(fd.size());
  for (std::size_t k = 0; k < fd.size(); ++k) diff[k] = analytic[k] - fd[k];
  for (const auto& blk : layout) {
    BlockError e;
    e.name = blk.name;
    e.max_abs_error = inf_norm(diff, blk.first, blk.count);
    const double scale =
        std::max(inf_norm(analytic, blk.first, blk.count), inf_norm(fd, blk.first, blk.count));
    e.rel_error = scale > 0.0 ? e.max_abs_error / scale : 0.0;
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.blocks.push_back(e);
  }
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

void print_report(std::ostream& os, const Report& report) {
  char line[160];
  for (const auto& b : report.blocks) {
    std::snprintf(line, sizeof line, "  %-3s max_abs_error=%.3e rel_error=%.3e\n", b.name.c_str(),
                  b.max_abs_error, b.rel_error);
    os << line;
  }
  std::snprintf(line, sizeof line, "seed=%llu task=%s max_rel_error=%.3e %s\n",
                static_cast<unsigned long long>(report.seed),
                std::string(to_string(report.task)).c_str(), report.max_rel_error,
                report.passed ? "ok" : "FAILED");
  os << line;
}

}  // namespace mam::gradcheck
