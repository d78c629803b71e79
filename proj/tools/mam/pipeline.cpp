#include "pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "mam/error.hpp"
#include "mam/io.hpp"

namespace mam::cli {
namespace {

using json = nlohmann::json;

// Split and corruption draws use a stream unrelated to the generator's.
constexpr std::uint64_t kSplitStream = 0x5851F42D4C957F2DULL;

Dataset random_rows(const Dataset& ds, std::size_t count, Rng& rng) {
  if (count > ds.size()) {
    throw ConfigError("need " + std::to_string(count) + " rows, only " +
                      std::to_string(ds.size()) + " available");
  }
  return ds.subset(sample_without_replacement(rng, ds.size(), count));
}

Dataset corrupt_train(const Dataset& train, const ExperimentConfig& cfg, Rng& rng) {
  const auto& g = cfg.generator;
  Dataset out = train;
  if (cfg.task == Task::regression && g.outlier_r1 > 0.0) {
    out = inject_outliers(out, g.outlier_r1, g.outlier_mean, g.outlier_var, rng);
  }
  if (cfg.task == Task::classification && g.flip_r1 > 0.0) {
    out = corrupt_labels(out, g.flip_r1, rng);
  }
  if (g.r3 > 0.0) out = corrupt_features(out, g.r3, rng);
  return out;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::optional<double> sd_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  if (v.size() == 1) return 0.0;
  const double m = *mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

Split generate_split(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto& g = cfg.generator;
  Rng rng(seed ^ kSplitStream);
  Split s;
  if (cfg.task == Task::regression) {
    const Dataset ds = gen_regression(g.n, g.p, g.noise, seed);
    s = split(ds, g.ratios, rng, g.clean_meta);
    if (g.gaussian_eval_labels) {
      s.meta = relabel_gaussian(s.meta, rng);
      s.test = relabel_gaussian(s.test, rng);
    }
  } else if (g.r2 > 0.0) {
    // Imbalanced protocol: draw a larger pool, partition it, then subsample
    // each part to its target size and class mix.
    const auto sizes = split_sizes(g.n, g.ratios);
    const Dataset pool = gen_classification(g.pool_factor * g.n, g.p, seed);
    const Split parts = split(pool, g.ratios, rng, false);
    s.train = make_imbalanced(parts.train, g.r2, rng, sizes[0]);
    s.meta = g.balanced_eval ? make_imbalanced(parts.meta, 0.5, rng, sizes[1])
                             : random_rows(parts.meta, sizes[1], rng);
    s.test = g.balanced_eval ? make_imbalanced(parts.test, 0.5, rng, sizes[2])
                             : random_rows(parts.test, sizes[2], rng);
  } else {
    s = split(gen_classification(g.n, g.p, seed), g.ratios, rng, g.clean_meta);
  }
  s.train = corrupt_train(s.train, cfg, rng);
  return s;
}

Split load_split(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.csv) throw ConfigError("no CSV source configured");
  const Dataset ds = load_csv(cfg.csv->path, cfg.csv->target, cfg.task);
  Rng rng(seed ^ kSplitStream);
  Split s = split(ds, cfg.generator.ratios, rng, cfg.generator.clean_meta);
  s.train = corrupt_train(s.train, cfg, rng);
  return s;
}

RunMetrics score(const Split& split, const BasisSpec& basis, const AdditiveParams& beta,
                 const WeightNetParams& theta, const TrainConfig& train_cfg) {
  RunMetrics m;
  const FeatureMatrix psi_test = transform_batch(basis, split.test.x);
  const std::vector<double> f = predictions(beta, psi_test);
  if (train_cfg.task == Task::regression) {
    m.mse_vs_labels = mse(f, split.test.y);
    if (split.test.f_star) m.mse_vs_fstar = mse(f, *split.test.f_star);
  } else {
    std::vector<double> prob(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) prob[i] = sigmoid(f[i]);
    m.mse_vs_labels = mse(prob, split.test.y);
    const auto labels = hard_labels(prob);
    m.accuracy = accuracy(labels, split.test.y);
    m.macro_f1 = macro_f1(labels, split.test.y);
  }
  m.selected = selected_set(beta, train_cfg.kappa_select);
  if (split.train.true_support && !split.train.true_support->empty()) {
    const std::vector<std::vector<std::size_t>> runs{m.selected};
    const auto sel = asp(runs, *split.train.true_support, beta.p);
    m.asp = sel.asp;
    m.false_selection_rate = sel.fsr;
  }

  const Samples train = make_samples(basis, split.train);
  const bool any_corrupt = split.train.corrupted_count() > 0;
  if (train_cfg.frozen_weights) {
    m.mean_weight_clean = 1.0;
    if (any_corrupt) m.mean_weight_corrupt = 1.0;
  } else if (split.train.corrupted_count() < split.train.size()) {
    const auto audit =
        weight_audit(theta, sample_losses(beta, train, train_cfg.task), split.train.corrupted);
    m.mean_weight_clean = audit.mean_clean;
    m.mean_weight_corrupt = audit.mean_corrupt;
  }
  return m;
}

RunOutcome run_experiment(const Split& split, const ExperimentConfig& cfg,
                          const TrainConfig& train_cfg) {
  RunOutcome out;
  out.basis = fit_basis(split.train.x, cfg.d, cfg.basis);
  const Samples train = make_samples(out.basis, split.train);
  const Samples meta = make_samples(out.basis, split.meta);
  const auto start = std::chrono::steady_clock::now();
  out.result = mam::train(train_cfg, train, meta);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  out.metrics = score(split, out.basis, out.result.beta, out.result.theta, train_cfg);
  out.metrics.wall_time = elapsed.count();
  return out;
}

json make_bundle(const ExperimentConfig& cfg, const BasisSpec& basis, const AdditiveParams& beta,
                 const WeightNetParams& theta, std::optional<double> train_loss_max) {
  json j{{"format", "mam-model"}, {"version", 1}, {"config", cfg},
         {"basis", basis},        {"beta", beta}, {"theta", theta}};
  j["train_loss_max"] = train_loss_max ? json(*train_loss_max) : json(nullptr);
  return j;
}

Bundle read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open model bundle " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("model bundle " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "mam-model") {
    throw ConfigError(path.string() + " is not a model bundle");
  }
  Bundle b;
  try {
    b.config = j.at("config").get<ExperimentConfig>();
    b.basis = j.at("basis").get<BasisSpec>();
    b.beta = j.at("beta").get<AdditiveParams>();
    b.theta = j.at("theta").get<WeightNetParams>();
    if (j.contains("train_loss_max") && !j.at("train_loss_max").is_null()) {
      b.train_loss_max = j.at("train_loss_max").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError("corrupt model bundle: " + std::string(e.what()));
  }
  if (b.beta.p != b.basis.p || b.beta.d != b.basis.d) {
    throw ConfigError("corrupt model bundle: coefficients do not match the basis");
  }
  return b;
}

void write_weight_curve(std::ostream& os, const WeightNetParams& theta, double loss_max,
                        std::size_t resolution) {
  if (resolution < 2) throw ConfigError("curve resolution must be >= 2");
  if (!(loss_max > 0.0)) throw ConfigError("curve loss_max must be > 0");
  os << "loss,weight\n";
  for (std::size_t g = 0; g < resolution; ++g) {
    const double loss = loss_max * static_cast<double>(g) / static_cast<double>(resolution - 1);
    os << format_double(loss) << ',' << format_double(v_weight(theta, loss)) << '\n';
  }
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg) {
  std::vector<SweepRow> rows;
  for (double lambda : cfg.lambda_grid) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      SweepRow row;
      row.lambda = lambda;
      row.seed = cfg.seed_base + r;
      rows.push_back(row);
    }
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < rows.size(); k = next++) {
      SweepRow& row = rows[k];
      try {
        const Split s = cfg.csv ? load_split(cfg, row.seed) : generate_split(cfg, row.seed);
        TrainConfig tc = cfg.train;
        tc.lambda = row.lambda;
        tc.seed = row.seed;
        row.metrics = run_experiment(s, cfg, tc).metrics;
        row.ok = true;
      } catch (const DivergenceError& e) {
        row.error = "diverged";
      } catch (const std::exception& e) {
        row.error = "error";
      }
    }
  };
  std::size_t threads = cfg.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, rows.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << RunMetrics::csv_header() << '\n';
  for (const auto& r : rows) {
    if (r.ok) {
      os << r.metrics.csv_row(r.lambda, r.seed) << '\n';
    } else {
      os << format_double(r.lambda) << ',' << r.seed << ',' << r.error << ",,,,,,,,,\n";
    }
  }
}

void write_sweep_summary(std::ostream& os, const std::vector<SweepRow>& rows) {
  using Getter = std::function<std::optional<double>(const RunMetrics&)>;
  const std::vector<std::pair<const char*, Getter>> metrics = {
      {"mse_vs_labels", [](const RunMetrics& m) { return std::optional<double>(m.mse_vs_labels); }},
      {"mse_vs_fstar", [](const RunMetrics& m) { return m.mse_vs_fstar; }},
      {"accuracy", [](const RunMetrics& m) { return m.accuracy; }},
      {"macro_f1", [](const RunMetrics& m) { return m.macro_f1; }},
      {"asp", [](const RunMetrics& m) { return m.asp; }},
      {"false_selection_rate", [](const RunMetrics& m) { return m.false_selection_rate; }},
      {"mean_weight_clean",
       [](const RunMetrics& m) { return std::optional<double>(m.mean_weight_clean); }},
      {"mean_weight_corrupt", [](const RunMetrics& m) { return m.mean_weight_corrupt; }},
  };
  os << "lambda,runs,ok";
  for (const auto& [name, _] : metrics) os << ',' << name << "_mean," << name << "_sd";
  os << '\n';

  std::vector<double> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.lambda) == order.end()) order.push_back(r.lambda);
  }
  for (double lambda : order) {
    std::size_t runs = 0;
    std::size_t ok = 0;
    std::vector<std::vector<double>> values(metrics.size());
    for (const auto& r : rows) {
      if (r.lambda != lambda) continue;
      ++runs;
      if (!r.ok) continue;
      ++ok;
      for (std::size_t k = 0; k < metrics.size(); ++k) {
        if (auto v = metrics[k].second(r.metrics)) values[k].push_back(*v);
      }
    }
    os << format_double(lambda) << ',' << runs << ',' << ok;
    for (const auto& v : values) os << ',' << cell(mean_of(v)) << ',' << cell(sd_of(v));
    os << '\n';
  }
}

void write_text(const std::filesystem::path& dir, const std::string& name,
                const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + (dir / name).string());
  out << content;
  if (!out) throw ConfigError("failed writing " + (dir / name).string());
}

}  // namespace mam::cli
