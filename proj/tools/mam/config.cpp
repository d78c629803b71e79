#include "config.hpp"

#include <fstream>
#include <set>

#include "mam/error.hpp"

namespace mam::cli {
namespace {

using json = nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key in " + where + ": " + key);
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_fraction(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!csv) {
    const auto& g = generator;
    if (g.n == 0) throw ConfigError("generator.n must be >= 1");
    if (task == Task::regression && g.p < 8) throw ConfigError("regression generator needs p >= 8");
    if (task == Task::classification && g.p < 2) {
      throw ConfigError("classification generator needs p >= 2");
    }
    check_fraction(g.outlier_r1, "generator.outlier_r1");
    check_fraction(g.flip_r1, "generator.flip_r1");
    check_fraction(g.r3, "generator.r3");
    if (!(g.r2 >= 0.0 && g.r2 < 1.0)) throw ConfigError("generator.r2 must lie in [0, 1)");
    if (!(g.outlier_var >= 0.0)) throw ConfigError("generator.outlier_var must be >= 0");
    for (double r : g.ratios) {
      if (!(r > 0.0)) throw ConfigError("generator.ratios must be positive");
    }
    if (g.pool_factor == 0) throw ConfigError("generator.pool_factor must be >= 1");
  }
  if (d == 0) throw ConfigError("basis.d must be >= 1");
  if (basis == BasisKind::bspline_cubic && d < 4) throw ConfigError("cubic B-splines need d >= 4");
  if (train.task != task) throw ConfigError("train.task disagrees with task");
  if (lambda_grid.empty()) throw ConfigError("lambda_grid must not be empty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw ConfigError("lambda_grid entries must be >= 0");
  }
  if (repeats == 0) throw ConfigError("repeats must be >= 1");
  if (curves.resolution < 2) throw ConfigError("curves.resolution must be >= 2");
  if (curves.loss_max && !(*curves.loss_max > 0.0)) {
    throw ConfigError("curves.loss_max must be > 0");
  }
}

void to_json(json& j, const GeneratorConfig& g) {
  j = json{{"n", g.n},
           {"p", g.p},
           {"noise", to_string(g.noise)},
           {"outlier_r1", g.outlier_r1},
           {"outlier_mean", g.outlier_mean},
           {"outlier_var", g.outlier_var},
           {"flip_r1", g.flip_r1},
           {"r2", g.r2},
           {"r3", g.r3},
           {"ratios", g.ratios},
           {"clean_meta", g.clean_meta},
           {"gaussian_eval_labels", g.gaussian_eval_labels},
           {"balanced_eval", g.balanced_eval},
           {"pool_factor", g.pool_factor}};
}

void from_json(const json& j, GeneratorConfig& g) {
  reject_unknown(j,
                 {"n", "p", "noise", "outlier_r1", "outlier_mean", "outlier_var", "flip_r1", "r2",
                  "r3", "ratios", "clean_meta", "gaussian_eval_labels", "balanced_eval",
                  "pool_factor"},
                 "generator");
  read_if(j, "n", g.n);
  read_if(j, "p", g.p);
  if (j.contains("noise")) g.noise = parse_noise_kind(j.at("noise").get<std::string>());
  read_if(j, "outlier_r1", g.outlier_r1);
  read_if(j, "outlier_mean", g.outlier_mean);
  read_if(j, "outlier_var", g.outlier_var);
  read_if(j, "flip_r1", g.flip_r1);
  read_if(j, "r2", g.r2);
  read_if(j, "r3", g.r3);
  read_if(j, "ratios", g.ratios);
  read_if(j, "clean_meta", g.clean_meta);
  read_if(j, "gaussian_eval_labels", g.gaussian_eval_labels);
  read_if(j, "balanced_eval", g.balanced_eval);
  read_if(j, "pool_factor", g.pool_factor);
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"task", to_string(c.task)},
           {"generator", c.generator},
           {"basis", {{"kind", to_string(c.basis)}, {"d", c.d}}},
           {"train", c.train},
           {"lambda_grid", c.lambda_grid},
           {"repeats", c.repeats},
           {"seed_base", c.seed_base},
           {"threads", c.threads},
           {"output_dir", c.output_dir},
           {"curves",
            {{"resolution", c.curves.resolution},
             {"loss_max", c.curves.loss_max ? json(*c.curves.loss_max) : json(nullptr)}}}};
  j["data"] = c.csv ? json{{"csv", c.csv->path}, {"target", c.csv->target}} : json(nullptr);
}

void from_json(const json& j, ExperimentConfig& c) {
  reject_unknown(j,
                 {"task", "generator", "data", "basis", "train", "lambda_grid", "repeats",
                  "seed_base", "threads", "output_dir", "curves"},
                 "config");
  try {
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    c.train.task = c.task;
    if (j.contains("generator")) c.generator = j.at("generator").get<GeneratorConfig>();
    if (j.contains("data") && !j.at("data").is_null()) {
      const auto& d = j.at("data");
      reject_unknown(d, {"csv", "target"}, "data");
      CsvSource src;
      src.path = d.at("csv").get<std::string>();
      read_if(d, "target", src.target);
      c.csv = src;
    }
    if (j.contains("basis")) {
      const auto& b = j.at("basis");
      reject_unknown(b, {"kind", "d"}, "basis");
      if (b.contains("kind")) c.basis = parse_basis_kind(b.at("kind").get<std::string>());
      read_if(b, "d", c.d);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      from_json(t, c.train);
      if (t.contains("task") && c.train.task != c.task) {
        throw ConfigError("train.task disagrees with task");
      }
      c.train.task = c.task;
    }
    read_if(j, "lambda_grid", c.lambda_grid);
    read_if(j, "repeats", c.repeats);
    read_if(j, "seed_base", c.seed_base);
    read_if(j, "threads", c.threads);
    read_if(j, "output_dir", c.output_dir);
    if (j.contains("curves")) {
      const auto& cv = j.at("curves");
      reject_unknown(cv, {"resolution", "loss_max"}, "curves");
      read_if(cv, "resolution", c.curves.resolution);
      if (cv.contains("loss_max") && !cv.at("loss_max").is_null()) {
        c.curves.loss_max = cv.at("loss_max").get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

}  // namespace mam::cli
