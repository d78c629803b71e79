#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "mam/datagen.hpp"
#include "mam/error.hpp"

namespace {

using namespace mam;
namespace fs = std::filesystem;

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path path = fs::temp_directory_path() / ("mam_datagen_" + name);
  std::ofstream(path) << content;
  return path;
}

TEST(ComponentF, Values) {
  EXPECT_EQ(component_f(2, 1.0), 8.0);
  EXPECT_EQ(component_f(1, 0.0), 0.0);
  EXPECT_NEAR(component_f(8, 0.5), -5.0, 1e-15);
  EXPECT_NEAR(component_f(4, 0.0), 6.0, 1e-15);
  EXPECT_NEAR(component_f(6, 0.4), 2.0, 1e-15);
  EXPECT_THROW(component_f(0, 0.5), std::out_of_range);
  EXPECT_THROW(component_f(9, 0.5), std::out_of_range);
}

TEST(SampleNoise, GaussVariance) {
  Rng rng(1);
  double s = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double e = sample_noise(NoiseKind::gauss, rng);
    s += e;
    s2 += e * e;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(SampleNoise, MixtureTailShare) {
  Rng rng(2);
  int above = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) above += sample_noise(NoiseKind::A, rng) > 3.0;
  EXPECT_NEAR(static_cast<double>(above) / n, 0.2, 0.02);
}

TEST(SampleNoise, StudentMedian) {
  Rng rng(3);
  std::vector<double> v(100000);
  for (double& e : v) e = sample_noise(NoiseKind::C, rng);
  std::nth_element(v.begin(), v.begin() + 50000, v.end());
  EXPECT_NEAR(v[50000], 0.0, 0.05);
}

TEST(GenRegression, NoiseMeans) {
  for (auto [kind, mean, tol] : {std::tuple{NoiseKind::A, 0.0, 0.05}, std::tuple{NoiseKind::B, 4.0, 0.1}}) {
    const auto ds = gen_regression(100000, 8, kind, 4);
    double s = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) s += ds.y[i] - (*ds.f_star)[i];
    EXPECT_NEAR(s / ds.size(), mean, tol);
    EXPECT_EQ(ds.corrupted_count(), 20000u);
  }
}

TEST(GenRegression, StructureAndDeterminism) {
  const auto ds = gen_regression(300, 12, NoiseKind::gauss, 5);
  EXPECT_EQ(ds.size(), 300u);
  EXPECT_EQ(ds.dim(), 12u);
  EXPECT_EQ(*ds.true_support, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(ds.corrupted_count(), 0u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double f = 0.0;
    for (int j = 1; j <= 8; ++j) f += component_f(j, ds.x(i, j - 1));
    EXPECT_EQ((*ds.f_star)[i], f);
    for (double v : ds.x.row(i)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
  }
  const auto again = gen_regression(300, 12, NoiseKind::gauss, 5);
  EXPECT_EQ(ds.x, again.x);
  EXPECT_EQ(ds.y, again.y);
  EXPECT_NE(gen_regression(300, 12, NoiseKind::gauss, 6).y, ds.y);
  EXPECT_THROW(gen_regression(10, 7, NoiseKind::gauss, 0), ConfigError);
}

TEST(GenClassification, Rule) {
  const auto ds = gen_classification(2000, 5, 7);
  EXPECT_EQ(*ds.true_support, (std::vector<std::size_t>{0, 1}));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double f = (ds.x(i, 0) - 0.5) * (ds.x(i, 0) - 0.5) +
                     (ds.x(i, 1) - 0.5) * (ds.x(i, 1) - 0.5) - 0.08;
    EXPECT_EQ(ds.y[i], f <= 0.0 ? 0.0 : 1.0);
  }
  EXPECT_THROW(gen_classification(10, 1, 0), ConfigError);
}

TEST(GenClassification, PlugInPoints) {
  // The score is a fixed function of the first two coordinates.
  auto score = [](double a, double b) { return (a - 0.5) * (a - 0.5) + (b - 0.5) * (b - 0.5) - 0.08; };
  EXPECT_NEAR(score(0.5, 0.5), -0.08, 1e-15);
  EXPECT_NEAR(score(0.8, 0.5), 0.01, 1e-15);
}

TEST(GenClassification, ClassShareStableAcrossSeeds) {
  std::vector<double> shares;
  for (std::uint64_t seed : {10u, 11u, 12u}) {
    const auto ds = gen_classification(100000, 2, seed);
    double ones = 0.0;
    for (double y : ds.y) ones += y;
    shares.push_back(ones / ds.size());
  }
  const auto [lo, hi] = std::minmax_element(shares.begin(), shares.end());
  EXPECT_LE(*hi - *lo, 0.01);
}

TEST(CorruptLabels, Counts) {
  const auto ds = gen_classification(200, 3, 13);
  Rng rng(1);
  EXPECT_EQ(corrupt_labels(ds, 0.0, rng).y, ds.y);
  const auto all = corrupt_labels(ds, 1.0, rng);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(all.y[i], 1.0 - ds.y[i]);
  const auto some = corrupt_labels(ds, 0.3, rng);
  EXPECT_EQ(some.corrupted_count(), 60u);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    changed += some.y[i] != ds.y[i];
    EXPECT_EQ(some.y[i] != ds.y[i], some.corrupted[i] != 0);
  }
  EXPECT_EQ(changed, 60u);
  EXPECT_THROW(corrupt_labels(gen_regression(20, 8, NoiseKind::gauss, 0), 0.1, rng), ConfigError);
}

TEST(InjectOutliers, CountAndShift) {
  const auto ds = gen_regression(20000, 8, NoiseKind::gauss, 14);
  Rng rng(2);
  EXPECT_EQ(inject_outliers(ds, 0.0, 100.0, 100.0, rng).y, ds.y);
  const auto out = inject_outliers(ds, 0.25, 100.0, 100.0, rng);
  EXPECT_EQ(out.corrupted_count(), 5000u);
  double shift_sum = 0.0, clean_sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double delta = out.y[i] - ds.y[i];
    if (out.corrupted[i]) {
      shift_sum += delta;
    } else {
      clean_sum += std::abs(delta);
    }
  }
  EXPECT_NEAR(shift_sum / 5000.0, 100.0, 1.0);
  EXPECT_EQ(clean_sum, 0.0);
  EXPECT_THROW(inject_outliers(gen_classification(20, 2, 0), 0.1, 1.0, 1.0, rng), ConfigError);
}

TEST(CorruptFeatures, CountAndUnclamped) {
  const auto ds = gen_regression(400, 10, NoiseKind::gauss, 15);
  Rng rng(3);
  EXPECT_EQ(corrupt_features(ds, 0.0, rng).x, ds.x);
  const auto out = corrupt_features(ds, 0.1, rng);
  EXPECT_EQ(out.corrupted_count(), 40u);
  EXPECT_EQ(out.y, ds.y);
  bool outside = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool row_changed = !std::equal(out.x.row(i).begin(), out.x.row(i).end(), ds.x.row(i).begin());
    EXPECT_EQ(row_changed, out.corrupted[i] == corruption::feature);
    for (double v : out.x.row(i)) outside = outside || v < 0.0 || v > 1.0;
  }
  EXPECT_TRUE(outside);
}

TEST(MakeImbalanced, Counts) {
  const auto pool = gen_classification(6000, 4, 16);
  Rng rng(4);
  const auto out = make_imbalanced(pool, 0.05, rng, 2000);
  std::size_t neg = 0;
  for (double y : out.y) neg += y == 0.0;
  EXPECT_EQ(out.size(), 2000u);
  EXPECT_EQ(neg, 100u);

  const auto whole = make_imbalanced(pool, 0.5, rng);
  std::size_t wneg = 0;
  for (double y : whole.y) wneg += y == 0.0;
  EXPECT_EQ(2 * wneg, whole.size());

  EXPECT_THROW(make_imbalanced(pool, 0.0, rng), ConfigError);
  EXPECT_THROW(make_imbalanced(pool, 0.05, rng, 1000000), ConfigError);
}

TEST(Split, SizesByLargestRemainder) {
  EXPECT_EQ(split_sizes(100, {3, 1, 1}), (std::array<std::size_t, 3>{60, 20, 20}));
  EXPECT_EQ(split_sizes(200, {3, 1, 1}), (std::array<std::size_t, 3>{120, 40, 40}));
  // 7 * (0.6, 0.2, 0.2) = (4.2, 1.4, 1.4): one extra row, tie goes to the lower index.
  EXPECT_EQ(split_sizes(7, {3, 1, 1}), (std::array<std::size_t, 3>{4, 2, 1}));
  EXPECT_EQ(split_sizes(2, {1, 1, 1}), (std::array<std::size_t, 3>{1, 1, 0}));
  EXPECT_THROW(split_sizes(10, {1, 0, 1}), ConfigError);
}

TEST(Split, PartitionsRows) {
  for (std::size_t n : {5u, 37u, 101u}) {
    auto ds = gen_regression(n, 8, NoiseKind::gauss, n);
    for (std::size_t i = 0; i < n; ++i) ds.y[i] = static_cast<double>(i);  // row identity
    Rng rng(n);
    const auto s = split(ds, {3, 1, 1}, rng, false);
    const auto sizes = split_sizes(n, {3, 1, 1});
    EXPECT_EQ(s.train.size(), sizes[0]);
    EXPECT_EQ(s.meta.size(), sizes[1]);
    EXPECT_EQ(s.test.size(), sizes[2]);
    std::set<double> seen;
    for (const Dataset* part : {&s.train, &s.meta, &s.test}) {
      for (double y : part->y) EXPECT_TRUE(seen.insert(y).second);
    }
    EXPECT_EQ(seen.size(), n);
  }
}

TEST(Split, CleanMetaFeasibility) {
  auto ds = gen_regression(100, 8, NoiseKind::gauss, 17);
  for (std::size_t i = 0; i < 50; ++i) ds.corrupted[i] = corruption::label;
  Rng rng(5);
  const auto s = split(ds, {3, 1, 1}, rng, true);
  EXPECT_EQ(s.meta.corrupted_count(), 0u);
  EXPECT_EQ(s.meta.size(), 20u);

  for (std::size_t i = 0; i < 81; ++i) ds.corrupted[i] = corruption::label;
  EXPECT_THROW(split(ds, {3, 1, 1}, rng, true), ConfigError);
  ds.corrupted[80] = corruption::clean;
  EXPECT_NO_THROW(split(ds, {3, 1, 1}, rng, true));
}

TEST(RelabelGaussian, ClearsLabelFlags) {
  const auto ds = gen_regression(500, 8, NoiseKind::B, 18);
  Rng rng(6);
  const auto out = relabel_gaussian(ds, rng);
  EXPECT_EQ(out.corrupted_count(), 0u);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.y[i] - (*out.f_star)[i];
  EXPECT_NEAR(s / out.size(), 0.0, 0.2);
}

TEST(LoadCsv, HandWrittenFile) {
  const auto path = temp_file("two.csv", "a,y,b\n1,5,10\n3,7,30\n");
  const auto ds = load_csv(path, "y", Task::regression);
  ASSERT_EQ(ds.size(), 2u);
  ASSERT_EQ(ds.dim(), 2u);
  EXPECT_EQ(ds.y, (std::vector<double>{5.0, 7.0}));
  EXPECT_EQ(ds.x(0, 0), 0.0);
  EXPECT_EQ(ds.x(1, 0), 1.0);
  EXPECT_EQ(ds.x(0, 1), 0.0);
  EXPECT_EQ(ds.x(1, 1), 1.0);
  EXPECT_EQ(ds.corrupted_count(), 0u);
}

TEST(LoadCsv, HeaderOnlyIsEmpty) {
  const auto ds = load_csv(temp_file("empty.csv", "a,b,y\n"), "y", Task::regression);
  EXPECT_EQ(ds.size(), 0u);
  EXPECT_EQ(ds.dim(), 2u);
}

TEST(LoadCsv, Errors) {
  auto message = [](const fs::path& p, const char* target) {
    try {
      load_csv(p, target, Task::regression);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(temp_file("bad1.csv", "a,y\n1,2\n3,x\n"), "y").find("row 3, column 2"),
            std::string::npos);
  EXPECT_NE(message(temp_file("bad2.csv", "a,y\n1,2,3\n"), "y").find("ragged row 2"),
            std::string::npos);
  EXPECT_NE(message(temp_file("bad3.csv", "a,b\n1,2\n"), "y").find("missing column"),
            std::string::npos);
  EXPECT_THROW(load_csv(temp_file("bad4.csv", "a,y\n1,0.5\n"), "y", Task::classification),
               ConfigError);
}

TEST(DatasetCsv, RoundTrip) {
  Rng rng(7);
  auto ds = gen_regression(50, 9, NoiseKind::B, 19);
  ds = corrupt_features(ds, 0.1, rng);
  const auto path = fs::temp_directory_path() / "mam_datagen_roundtrip.csv";
  write_dataset_csv(path, ds);
  const auto back = read_dataset_csv(path, Task::regression);
  EXPECT_EQ(back.x, ds.x);
  EXPECT_EQ(back.y, ds.y);
  EXPECT_EQ(back.corrupted, ds.corrupted);
  EXPECT_EQ(back.f_star, ds.f_star);

  const auto cls = gen_classification(30, 3, 20);
  const auto cpath = fs::temp_directory_path() / "mam_datagen_roundtrip_cls.csv";
  write_dataset_csv(cpath, cls);
  const auto cback = read_dataset_csv(cpath, Task::classification);
  EXPECT_EQ(cback.x, cls.x);
  EXPECT_EQ(cback.y, cls.y);
}

}  // namespace
