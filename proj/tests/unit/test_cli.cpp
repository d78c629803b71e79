#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "gradcheck.hpp"
#include "mam/error.hpp"
#include "pipeline.hpp"

namespace {

using namespace mam;
using namespace mam::cli;
namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string golden(const std::string& name) { return read_file(fs::path(MAM_GOLDEN_DIR) / name); }

ExperimentConfig tiny_regression() {
  ExperimentConfig cfg;
  cfg.generator.n = 60;
  cfg.generator.p = 10;
  cfg.d = 5;
  cfg.train.iterations = 30;
  cfg.train.batch = 8;
  cfg.train.hidden = 8;
  cfg.train.eta_beta0 = 0.02;
  cfg.train.eta_theta0 = 1e-3;
  cfg.lambda_grid = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  cfg.repeats = 5;
  cfg.threads = 2;
  return cfg;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

TEST(Config, DefaultLayoutIsGolden) {
  EXPECT_EQ(nlohmann::json(ExperimentConfig{}).dump(2) + "\n", golden("config_default.json"));
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  const auto cfg = tiny_regression();
  const nlohmann::json j = cfg;
  EXPECT_EQ(nlohmann::json(j.get<ExperimentConfig>()), j);

  nlohmann::json bad = j;
  bad["colour"] = "blue";
  EXPECT_THROW(bad.get<ExperimentConfig>(), ConfigError);
  bad = j;
  bad["generator"]["noise"] = "D";
  EXPECT_THROW(bad.get<ExperimentConfig>(), ConfigError);
  bad = j;
  bad["generator"]["sigma"] = 1.0;
  EXPECT_THROW(bad.get<ExperimentConfig>(), ConfigError);
}

TEST(Config, LoadFromFile) {
  const fs::path path = fs::temp_directory_path() / "mam_cli_cfg.json";
  std::ofstream(path) << R"({"task": "classification", "generator": {"n": 100, "p": 4}})";
  const auto cfg = load_config(path.string());
  EXPECT_EQ(cfg.task, Task::classification);
  EXPECT_EQ(cfg.train.task, Task::classification);
  EXPECT_EQ(cfg.generator.n, 100u);
  std::ofstream(path) << "{not json";
  EXPECT_THROW(load_config(path.string()), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/mam.json"), ConfigError);
}

TEST(Config, ValidateRejects) {
  auto cfg = tiny_regression();
  cfg.lambda_grid.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_regression();
  cfg.generator.p = 7;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_regression();
  cfg.generator.outlier_r1 = 1.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_regression();
  cfg.d = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_NO_THROW(tiny_regression().validate());
}

TEST(GenerateSplit, RegressionSizesAndCleanEvaluation) {
  auto cfg = tiny_regression();
  cfg.generator.n = 200;
  cfg.generator.p = 100;
  cfg.generator.outlier_r1 = 0.2;
  const auto s = generate_split(cfg, 3);
  EXPECT_EQ(s.train.size(), 120u);
  EXPECT_EQ(s.meta.size(), 40u);
  EXPECT_EQ(s.test.size(), 40u);
  EXPECT_EQ(s.meta.corrupted_count(), 0u);
  EXPECT_EQ(s.test.corrupted_count(), 0u);
  EXPECT_GE(s.train.corrupted_count(), 24u);
  const auto again = generate_split(cfg, 3);
  EXPECT_EQ(again.train.y, s.train.y);
  EXPECT_EQ(again.test.x, s.test.x);
}

TEST(GenerateSplit, ImbalancedClassification) {
  ExperimentConfig cfg;
  cfg.task = Task::classification;
  cfg.train.task = Task::classification;
  cfg.generator.n = 500;
  cfg.generator.p = 4;
  cfg.generator.r2 = 0.05;
  const auto s = generate_split(cfg, 4);
  EXPECT_EQ(s.train.size(), 300u);
  std::size_t neg = 0;
  for (double y : s.train.y) neg += y == 0.0;
  EXPECT_EQ(neg, 15u);
  std::size_t meta_neg = 0;
  for (double y : s.meta.y) meta_neg += y == 0.0;
  EXPECT_EQ(2 * meta_neg, s.meta.size());
}

TEST(Pipeline, FrozenRunIsDeterministicAndAudited) {
  auto cfg = tiny_regression();
  cfg.generator.outlier_r1 = 0.2;
  cfg.train.frozen_weights = true;
  const auto s = generate_split(cfg, 5);
  const auto a = run_experiment(s, cfg, cfg.train);
  const auto b = run_experiment(s, cfg, cfg.train);
  EXPECT_EQ(nlohmann::json(a.metrics), nlohmann::json(b.metrics));
  EXPECT_EQ(a.result.beta, b.result.beta);
  EXPECT_EQ(a.metrics.mean_weight_clean, 1.0);
  ASSERT_TRUE(a.metrics.mean_weight_corrupt);
  EXPECT_EQ(*a.metrics.mean_weight_corrupt, 1.0);
  EXPECT_TRUE(a.metrics.mse_vs_fstar);
  EXPECT_TRUE(a.metrics.asp);
}

TEST(Bundle, RoundTrip) {
  auto cfg = tiny_regression();
  const auto s = generate_split(cfg, 6);
  const auto run = run_experiment(s, cfg, cfg.train);
  const fs::path dir = fs::temp_directory_path() / "mam_cli_bundle";
  write_text(dir, "model.json",
             make_bundle(cfg, run.basis, run.result.beta, run.result.theta, 2.5).dump(2));
  const auto b = read_bundle(dir / "model.json");
  EXPECT_EQ(b.beta, run.result.beta);
  EXPECT_EQ(b.theta, run.result.theta);
  EXPECT_EQ(b.train_loss_max, 2.5);
  EXPECT_EQ(nlohmann::json(b.config), nlohmann::json(cfg));

  auto j = nlohmann::json::parse(read_file(dir / "model.json"));
  j["format"] = "other";
  write_text(dir, "bad.json", j.dump());
  EXPECT_THROW(read_bundle(dir / "bad.json"), ConfigError);
  write_text(dir, "trunc.json", read_file(dir / "model.json").substr(0, 50));
  EXPECT_THROW(read_bundle(dir / "trunc.json"), ConfigError);
}

TEST(Curves, UntrainedNetIsFlatAndGolden) {
  std::ostringstream os;
  write_weight_curve(os, WeightNetParams::zeros(3), 2.0, 5);
  EXPECT_EQ(os.str(), golden("weight_curve_zero.csv"));
  std::ostringstream big;
  write_weight_curve(big, init_weightnet(10, 1), 7.0, 33);
  EXPECT_EQ(lines(big.str()).size(), 34u);
  EXPECT_THROW(write_weight_curve(big, WeightNetParams::zeros(3), 2.0, 1), ConfigError);
}

TEST(Curves, ZeroCoefficientsGiveZeroComponents) {
  Matrix x(40, 2);
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 0) = i / 39.0;
    x(i, 1) = (i * 7 % 40) / 39.0;
  }
  const auto spec = fit_basis(x, 5);
  std::ostringstream os;
  const std::vector<std::size_t> coords{1};
  write_component_csv(os, spec, AdditiveParams::zeros(2, 5), coords, 11);
  const auto ls = lines(os.str());
  ASSERT_EQ(ls.size(), 12u);
  EXPECT_EQ(ls[0], "coordinate,u,f");
  for (std::size_t k = 1; k < ls.size(); ++k) {
    const auto c = cells(ls[k]);
    EXPECT_EQ(c[0], "2");
    EXPECT_EQ(std::stod(c[2]), 0.0);
  }
}

TEST(Sweep, CountsOrderAndSummary) {
  const auto cfg = tiny_regression();
  const auto rows = run_sweep(cfg);
  ASSERT_EQ(rows.size(), 35u);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_EQ(rows[k].lambda, cfg.lambda_grid[k / 5]);
    EXPECT_EQ(rows[k].seed, k % 5);
    EXPECT_TRUE(rows[k].ok) << rows[k].error;
  }
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  EXPECT_EQ(lines(csv.str()).size(), 36u);

  std::ostringstream summary;
  write_sweep_summary(summary, rows);
  const auto ls = lines(summary.str());
  ASSERT_EQ(ls.size(), 8u);
  const auto header = cells(ls[0]);
  ASSERT_EQ(header[3], "mse_vs_labels_mean");
  for (std::size_t g = 0; g < 7; ++g) {
    const auto c = cells(ls[g + 1]);
    EXPECT_EQ(c[1], "5");
    EXPECT_EQ(c[2], "5");
    double mean = 0.0;
    for (std::size_t r = 0; r < 5; ++r) mean += rows[g * 5 + r].metrics.mse_vs_labels / 5.0;
    double ss = 0.0;
    for (std::size_t r = 0; r < 5; ++r) {
      const double dv = rows[g * 5 + r].metrics.mse_vs_labels - mean;
      ss += dv * dv;
    }
    EXPECT_NEAR(std::stod(c[3]), mean, 1e-12 * std::max(1.0, mean));
    EXPECT_NEAR(std::stod(c[4]), std::sqrt(ss / 4.0), 1e-10 * std::max(1.0, mean));
  }

  auto one_thread = cfg;
  one_thread.threads = 1;
  one_thread.lambda_grid = {1e-3};
  const auto serial = run_sweep(one_thread);
  EXPECT_EQ(nlohmann::json(serial[2].metrics), nlohmann::json(rows[3 * 5 + 2].metrics));
}

TEST(Sweep, FailedRowsAndGoldenSummary) {
  std::vector<SweepRow> rows(3);
  rows[0].lambda = rows[1].lambda = 0.1;
  rows[1].seed = 1;
  rows[0].ok = rows[1].ok = true;
  rows[0].metrics.mse_vs_labels = 1.0;
  rows[1].metrics.mse_vs_labels = 3.0;
  rows[0].metrics.mean_weight_clean = rows[1].metrics.mean_weight_clean = 0.5;
  rows[2].lambda = 1.0;
  rows[2].error = "diverged";
  std::ostringstream csv, summary;
  write_sweep_csv(csv, rows);
  write_sweep_summary(summary, rows);
  EXPECT_EQ(csv.str(), golden("sweep_rows.csv"));
  EXPECT_EQ(summary.str(), golden("sweep_summary.csv"));
}

TEST(Gradcheck, DefaultPassesAndSignFlipFails) {
  for (Task task : {Task::regression, Task::classification}) {
    gradcheck::Options opt;
    opt.task = task;
    const auto ok = gradcheck::check_instance(opt);
    EXPECT_TRUE(ok.passed) << ok.max_rel_error;
    ASSERT_EQ(ok.blocks.size(), 4u);
    EXPECT_EQ(ok.blocks[0].name, "w1");
    opt.inject_sign_flip = true;
    const auto bad = gradcheck::check_instance(opt);
    EXPECT_FALSE(bad.passed);
    EXPECT_GT(bad.max_rel_error, 1.0);
    std::ostringstream os;
    gradcheck::print_report(os, bad);
    EXPECT_NE(os.str().find("b2"), std::string::npos);
  }
}

}  // namespace
