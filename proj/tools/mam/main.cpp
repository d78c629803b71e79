#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "gradcheck.hpp"
#include "mam/bilevel.hpp"
#include "mam/error.hpp"
#include "mam/io.hpp"
#include "pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mam;
using namespace mam::cli;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitVerification = 4;

// Flag overrides; anything left unset keeps the config file's value.
struct Overrides {
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::string> task;
  std::optional<std::size_t> n;
  std::optional<std::size_t> p;
  std::optional<std::string> noise;
  std::optional<double> r1;
  std::optional<double> r2;
  std::optional<double> r3;
  std::optional<std::string> csv;
  std::optional<std::string> target;
  std::optional<std::string> basis;
  std::optional<std::size_t> d;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> batch;
  std::optional<double> eta_beta;
  std::optional<double> eta_theta;
  std::optional<double> lambda;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> log_every;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::uint64_t> data_seed;
  bool prox = false;
  bool frozen = false;
};

void add_data_flags(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config_path, "JSON config (a gen manifest also works)");
  app->add_option("-o,--output-dir", o.output_dir, "Output directory");
  app->add_option("--task", o.task, "regression | classification");
  app->add_option("--n", o.n, "Generated sample count");
  app->add_option("--p", o.p, "Input dimension");
  app->add_option("--noise", o.noise, "Regression noise: gauss | A | B | C");
  app->add_option("--r1", o.r1, "Outlier share (regression) or flipped-label share (classification)");
  app->add_option("--r2", o.r2, "Negative-class share of the training set");
  app->add_option("--r3", o.r3, "Share of training rows with t(2) feature noise");
  app->add_option("--csv", o.csv, "Load data from a CSV file instead of generating it");
  app->add_option("--target", o.target, "Target column of --csv");
  app->add_option("--data-seed", o.data_seed, "Seed for generation and splitting");
}

void add_train_flags(CLI::App* app, Overrides& o) {
  app->add_option("--basis", o.basis, "bspline_cubic | trig_orthonormal");
  app->add_option("-d,--d", o.d, "Basis functions per coordinate");
  app->add_option("-T,--iterations", o.iterations, "Training iterations");
  app->add_option("-b,--batch", o.batch, "Mini-batch size");
  app->add_option("--eta-beta", o.eta_beta, "Initial coefficient step size");
  app->add_option("--eta-theta", o.eta_theta, "Initial weight-net step size");
  app->add_option("--lambda", o.lambda, "Group penalty strength");
  app->add_option("--hidden", o.hidden, "Weight-net hidden units");
  app->add_option("--log-every", o.log_every, "History logging interval");
  app->add_option("--seed", o.train_seed, "Training seed");
  app->add_flag("--prox", o.prox, "Proximal group-lasso steps instead of the smoothed penalty");
  app->add_flag("--frozen", o.frozen, "Freeze all weights at 1 (plain sparse additive model)");
}

struct Loaded {
  ExperimentConfig cfg;
  std::optional<std::uint64_t> manifest_seed;
};

Loaded load_base(const std::string& path) {
  Loaded out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  if (j.is_object() && j.value("format", "") == "mam-manifest") {
    try {
      out.cfg = j.at("config").get<ExperimentConfig>();
      out.manifest_seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw ConfigError("malformed manifest " + path + ": " + e.what());
    }
  } else {
    out.cfg = j.get<ExperimentConfig>();
  }
  return out;
}

void apply(const Overrides& o, ExperimentConfig& c) {
  if (o.task) {
    c.task = parse_task(*o.task);
    c.train.task = c.task;
  }
  auto& g = c.generator;
  if (o.n) g.n = *o.n;
  if (o.p) g.p = *o.p;
  if (o.noise) g.noise = parse_noise_kind(*o.noise);
  if (o.r1) (c.task == Task::regression ? g.outlier_r1 : g.flip_r1) = *o.r1;
  if (o.r2) g.r2 = *o.r2;
  if (o.r3) g.r3 = *o.r3;
  if (o.csv) c.csv = CsvSource{*o.csv, o.target.value_or("y")};
  if (o.target && c.csv) c.csv->target = *o.target;
  if (o.basis) c.basis = parse_basis_kind(*o.basis);
  if (o.d) c.d = *o.d;
  auto& t = c.train;
  if (o.iterations) t.iterations = *o.iterations;
  if (o.batch) t.batch = *o.batch;
  if (o.eta_beta) t.eta_beta0 = *o.eta_beta;
  if (o.eta_theta) t.eta_theta0 = *o.eta_theta;
  if (o.lambda) t.lambda = *o.lambda;
  if (o.hidden) t.hidden = *o.hidden;
  if (o.log_every) t.log_every = *o.log_every;
  if (o.train_seed) t.seed = *o.train_seed;
  if (o.prox) t.prox_mode = true;
  if (o.frozen) t.frozen_weights = true;
  if (const char* env = std::getenv("MAM_OUTPUT_DIR"); env && *env) c.output_dir = env;
  if (o.output_dir) c.output_dir = *o.output_dir;
}

ExperimentConfig resolve(const Overrides& o, std::optional<std::uint64_t>* manifest_seed = nullptr) {
  Loaded base = load_base(o.config_path);
  apply(o, base.cfg);
  base.cfg.validate();
  if (manifest_seed) *manifest_seed = base.manifest_seed;
  return base.cfg;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string to_csv(const Dataset& ds) {
  std::ostringstream os;
  write_dataset_csv(os, ds);
  return os.str();
}

int cmd_gen(const Overrides& o) {
  std::optional<std::uint64_t> manifest_seed;
  const ExperimentConfig cfg = resolve(o, &manifest_seed);
  const std::uint64_t seed = o.data_seed.value_or(manifest_seed.value_or(cfg.seed_base));
  const Split s = cfg.csv ? load_split(cfg, seed) : generate_split(cfg, seed);
  const fs::path dir = cfg.output_dir;
  write_text(dir, "train.csv", to_csv(s.train));
  write_text(dir, "meta.csv", to_csv(s.meta));
  write_text(dir, "test.csv", to_csv(s.test));
  json manifest{
      {"format", "mam-manifest"},
      {"version", 1},
      {"config", cfg},
      {"seed", seed},
      {"sizes", {{"train", s.train.size()}, {"meta", s.meta.size()}, {"test", s.test.size()}}},
      {"corrupted",
       {{"train", s.train.corrupted_count()},
        {"meta", s.meta.corrupted_count()},
        {"test", s.test.corrupted_count()}}},
      {"files", {{"train", "train.csv"}, {"meta", "meta.csv"}, {"test", "test.csv"}}}};
  if (s.train.true_support) {
    std::vector<std::size_t> support;
    for (std::size_t j : *s.train.true_support) support.push_back(j + 1);
    manifest["true_support"] = support;
  }
  write_text(dir, "manifest.json", dump(manifest));
  std::cout << "wrote " << s.train.size() << '/' << s.meta.size() << '/' << s.test.size()
            << " rows to " << dir.string() << '\n';
  return 0;
}

// Reads a directory written by `gen`. The manifest's config is the base
// unless --config names another file.
Split read_generated(const fs::path& dir, Overrides o, ExperimentConfig& cfg, std::uint64_t& seed) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw ConfigError("no manifest.json in " + dir.string());
  std::optional<std::uint64_t> mseed;
  if (o.config_path.empty()) o.config_path = manifest.string();
  cfg = resolve(o, &mseed);
  json m;
  try {
    std::ifstream in(manifest);
    m = json::parse(in);
    seed = mseed.value_or(m.at("seed").get<std::uint64_t>());
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + manifest.string() + ": " + e.what());
  }
  Split s;
  s.train = read_dataset_csv(dir / "train.csv", cfg.task);
  s.meta = read_dataset_csv(dir / "meta.csv", cfg.task);
  s.test = read_dataset_csv(dir / "test.csv", cfg.task);
  if (m.contains("true_support")) {
    std::vector<std::size_t> support;
    for (std::size_t j : m.at("true_support").get<std::vector<std::size_t>>()) {
      if (j == 0 || j > s.train.dim()) throw ConfigError("manifest true_support out of range");
      support.push_back(j - 1);
    }
    s.train.true_support = s.meta.true_support = s.test.true_support = support;
  }
  if (s.meta.corrupted_count() != 0) {
    throw ConfigError("meta set in " + dir.string() + " contains rows flagged as corrupted");
  }
  return s;
}

int cmd_train(const Overrides& o, const std::string& data_dir) {
  ExperimentConfig cfg;
  std::uint64_t data_seed = 0;
  Split s;
  if (!data_dir.empty()) {
    s = read_generated(data_dir, o, cfg, data_seed);
  } else {
    cfg = resolve(o);
    data_seed = o.data_seed.value_or(cfg.seed_base);
    s = cfg.csv ? load_split(cfg, data_seed) : generate_split(cfg, data_seed);
  }
  const fs::path dir = cfg.output_dir;
  RunOutcome run;
  try {
    run = run_experiment(s, cfg, cfg.train);
  } catch (const DivergenceError& e) {
    std::ostringstream hist;
    e.history().write_csv(hist);
    write_text(dir, "history.csv", hist.str());
    throw;
  }
  const Samples train = make_samples(run.basis, s.train);
  double loss_max = 0.0;
  for (double l : sample_losses(run.result.beta, train, cfg.task)) loss_max = std::max(loss_max, l);

  std::ostringstream hist;
  run.result.history.write_csv(hist);
  write_text(dir, "history.csv", hist.str());
  write_text(dir, "model.json",
             dump(make_bundle(cfg, run.basis, run.result.beta, run.result.theta, loss_max)));
  const json metrics{{"config", cfg}, {"data_seed", data_seed}, {"metrics", run.metrics}};
  write_text(dir, "metrics.json", dump(metrics));
  write_text(dir, "timing.json", dump(json{{"wall_time", run.metrics.wall_time}}));
  std::cout << run.metrics.csv_row(cfg.train.lambda, cfg.train.seed) << '\n';
  return 0;
}

int cmd_sweep(const Overrides& o, const std::vector<double>& grid,
              std::optional<std::size_t> repeats, std::optional<std::size_t> threads) {
  Loaded base = load_base(o.config_path);
  apply(o, base.cfg);
  if (!grid.empty()) base.cfg.lambda_grid = grid;
  if (repeats) base.cfg.repeats = *repeats;
  if (threads) base.cfg.threads = *threads;
  if (o.data_seed) base.cfg.seed_base = *o.data_seed;
  const ExperimentConfig& cfg = base.cfg;
  cfg.validate();

  const auto rows = run_sweep(cfg);
  std::ostringstream csv;
  std::ostringstream summary;
  write_sweep_csv(csv, rows);
  write_sweep_summary(summary, rows);
  const fs::path dir = cfg.output_dir;
  write_text(dir, "sweep.csv", csv.str());
  write_text(dir, "sweep_summary.csv", summary.str());
  write_text(dir, "sweep_config.json", dump(json(cfg)));
  std::size_t ok = 0;
  for (const auto& r : rows) ok += r.ok ? 1 : 0;
  std::cout << ok << '/' << rows.size() << " runs succeeded; results in " << dir.string() << '\n';
  return ok == 0 ? kExitDivergence : 0;
}

int cmd_gradcheck(gradcheck::Options opt, const std::string& task, std::size_t instances) {
  const std::vector<Task> tasks =
      task == "both" ? std::vector<Task>{Task::regression, Task::classification}
                     : std::vector<Task>{parse_task(task)};
  bool all = true;
  double worst = 0.0;
  const std::uint64_t seed0 = opt.seed;
  for (Task t : tasks) {
    for (std::size_t k = 0; k < instances; ++k) {
      opt.task = t;
      opt.seed = seed0 + k;
      const auto report = gradcheck::check_instance(opt);
      gradcheck::print_report(std::cout, report);
      all = all && report.passed;
      worst = std::max(worst, report.max_rel_error);
    }
  }
  std::cout << "max_rel_error=" << format_double(worst) << (all ? " PASSED" : " FAILED") << '\n';
  return all ? 0 : kExitVerification;
}

int cmd_curves(const std::string& model, std::optional<std::string> out,
               std::optional<std::size_t> resolution, std::optional<double> loss_max) {
  const Bundle b = read_bundle(model);
  const std::size_t res = resolution.value_or(b.config.curves.resolution);
  const double lmax = loss_max.value_or(
      b.config.curves.loss_max.value_or(b.train_loss_max.value_or(10.0)));
  fs::path dir = out ? fs::path(*out) : fs::path(model).parent_path();
  if (const char* env = std::getenv("MAM_OUTPUT_DIR"); !out && env && *env) dir = env;

  std::ostringstream weight;
  write_weight_curve(weight, b.theta, lmax, res);
  std::vector<std::size_t> coords = selected_set(b.beta, b.config.train.kappa_select);
  if (coords.empty()) {
    for (std::size_t j = 0; j < b.beta.p; ++j) coords.push_back(j);
  }
  std::ostringstream comp;
  write_component_csv(comp, b.basis, b.beta, coords, res);
  write_text(dir, "weight_curve.csv", weight.str());
  write_text(dir, "components.csv", comp.str());
  std::cout << "wrote weight_curve.csv and components.csv (" << coords.size()
            << " coordinates) to " << (dir.empty() ? std::string(".") : dir.string()) << '\n';
  return 0;
}

int cmd_eval(const std::string& model, const std::string& data, std::optional<std::string> out) {
  const Bundle b = read_bundle(model);
  Split s;
  s.test = read_dataset_csv(data, b.config.task);
  if (s.test.dim() != b.basis.p) {
    throw ConfigError("data has " + std::to_string(s.test.dim()) + " features, model expects " +
                      std::to_string(b.basis.p));
  }
  s.train = s.test;
  const RunMetrics m = score(s, b.basis, b.beta, b.theta, b.config.train);
  const json result{{"config", b.config}, {"data", data}, {"metrics", m}};
  if (out) write_text(*out, "eval.json", dump(result));
  std::cout << dump(result["metrics"]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta additive model: sparse additive models with learned sample weights"};
  app.require_subcommand(1);

  Overrides gen_o;
  auto* gen = app.add_subcommand("gen", "Generate train/meta/test CSVs and a manifest");
  add_data_flags(gen, gen_o);

  Overrides train_o;
  std::string data_dir;
  auto* train = app.add_subcommand("train", "Train one model and write its artifacts");
  add_data_flags(train, train_o);
  add_train_flags(train, train_o);
  train->add_option("--data", data_dir, "Directory written by `gen`");

  Overrides sweep_o;
  std::vector<double> grid;
  std::optional<std::size_t> repeats;
  std::optional<std::size_t> threads;
  auto* sweep = app.add_subcommand("sweep", "Lambda grid x repeated seeds");
  add_data_flags(sweep, sweep_o);
  add_train_flags(sweep, sweep_o);
  sweep->add_option("--lambda-grid", grid, "Lambda values")->delimiter(',');
  sweep->add_option("-R,--repeats", repeats, "Seeds per lambda");
  sweep->add_option("-j,--threads", threads, "Worker threads (0 = all cores)");

  gradcheck::Options gc;
  std::string gc_task = "both";
  std::size_t gc_instances = 1;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the meta gradient");
  grad->add_option("--task", gc_task, "regression | classification | both");
  grad->add_option("--seed", gc.seed, "First instance seed");
  grad->add_option("--instances", gc_instances, "Instances per task");
  grad->add_option("--p", gc.p, "Input dimension");
  grad->add_option("--d", gc.d, "Basis size");
  grad->add_option("--batch", gc.batch, "Train batch");
  grad->add_option("--meta-batch", gc.meta_batch, "Meta batch");
  grad->add_option("--hidden", gc.hidden, "Weight-net hidden units");
  grad->add_option("--fd-step", gc.fd_step, "Central difference step");
  grad->add_option("--tolerance", gc.tolerance, "Maximum relative error");
  grad->add_flag("--inject-sign-flip", gc.inject_sign_flip, "Negate the analytic update");

  std::string curves_model;
  std::optional<std::string> curves_out;
  std::optional<std::size_t> curves_res;
  std::optional<double> curves_lmax;
  auto* curves = app.add_subcommand("curves", "Export weight and component curves from a model");
  curves->add_option("-m,--model", curves_model, "model.json")->required();
  curves->add_option("-o,--output-dir", curves_out, "Output directory (default: model's)");
  curves->add_option("--resolution", curves_res, "Grid points");
  curves->add_option("--loss-max", curves_lmax, "Upper end of the loss grid");

  std::string eval_model;
  std::string eval_data;
  std::optional<std::string> eval_out;
  auto* eval = app.add_subcommand("eval", "Score a model on a dataset CSV");
  eval->add_option("-m,--model", eval_model, "model.json")->required();
  eval->add_option("--data", eval_data, "Dataset CSV written by `gen`")->required();
  eval->add_option("-o,--output-dir", eval_out, "Also write eval.json here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_gen(gen_o);
    if (*train) return cmd_train(train_o, data_dir);
    if (*sweep) return cmd_sweep(sweep_o, grid, repeats, threads);
    if (*grad) return cmd_gradcheck(gc, gc_task, gc_instances);
    if (*curves) return cmd_curves(curves_model, curves_out, curves_res, curves_lmax);
    if (*eval) return cmd_eval(eval_model, eval_data, eval_out);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
