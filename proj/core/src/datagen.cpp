#include "mam/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "mam/error.hpp"
#include "mam/io.hpp"

namespace mam {
namespace {

constexpr std::size_t kInformative = 8;
constexpr double kMixtureMinorShare = 0.2;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

void check_fraction(double r, const char* name) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1]");
  }
}

std::vector<std::size_t> support_prefix(std::size_t k) {
  std::vector<std::size_t> s(k);
  std::iota(s.begin(), s.end(), std::size_t{0});
  return s;
}

double classification_score(std::span<const double> x) {
  return (x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.5) * (x[1] - 0.5) - 0.08;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col,
                  const std::filesystem::path& path) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && *(last - 1) == ' ') --last;
  const auto res = std::from_chars(first, last, v);
  if (first == last || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw ConfigError(path.string() + ": non-numeric cell at row " + std::to_string(row) +
                      ", column " + std::to_string(col) + ": '" + cell + "'");
  }
  return v;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

RawCsv read_raw_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  RawCsv raw;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": missing header row");
  raw.header = split_csv_line(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != raw.header.size()) {
      throw ConfigError(path.string() + ": ragged row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(raw.header.size()));
    }
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) values[c] = parse_cell(cells[c], row, c + 1, path);
    raw.rows.push_back(std::move(values));
  }
  return raw;
}

std::size_t column_index(const RawCsv& raw, std::string_view name,
                         const std::filesystem::path& path) {
  const auto it = std::find(raw.header.begin(), raw.header.end(), name);
  if (it == raw.header.end()) {
    throw ConfigError(path.string() + ": missing column '" + std::string(name) + "'");
  }
  return static_cast<std::size_t>(it - raw.header.begin());
}

}  // namespace

std::size_t Dataset::corrupted_count() const {
  return static_cast<std::size_t>(
      std::count_if(corrupted.begin(), corrupted.end(),
                    [](std::uint8_t f) { return f != corruption::clean; }));
}

void Dataset::validate() const {
  if (x.rows() != y.size() || corrupted.size() != y.size()) {
    throw ConfigError("dataset arrays have inconsistent lengths");
  }
  if (f_star && f_star->size() != y.size()) throw ConfigError("f_star length mismatch");
  if (task == Task::classification) {
    for (double v : y) {
      if (v != 0.0 && v != 1.0) throw ConfigError("classification labels must be 0 or 1");
    }
  }
  if (true_support) {
    for (std::size_t j : *true_support) {
      if (j >= dim()) throw ConfigError("true support index out of range");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.task = task;
  out.true_support = true_support;
  out.x = Matrix(0, dim());
  out.y.reserve(indices.size());
  out.corrupted.reserve(indices.size());
  if (f_star) out.f_star.emplace();
  for (std::size_t i : indices) {
    out.x.push_row(x.row(i));
    out.y.push_back(y[i]);
    out.corrupted.push_back(corrupted[i]);
    if (f_star) out.f_star->push_back((*f_star)[i]);
  }
  return out;
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gauss:
      return "gauss";
    case NoiseKind::A:
      return "A";
    case NoiseKind::B:
      return "B";
    case NoiseKind::C:
      return "C";
  }
  return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "gauss") return NoiseKind::gauss;
  if (name == "A") return NoiseKind::A;
  if (name == "B") return NoiseKind::B;
  if (name == "C") return NoiseKind::C;
  throw ConfigError("unknown noise kind: " + std::string(name) + " (expected gauss, A, B or C)");
}

double component_f(int j, double u) {
  switch (j) {
    case 1:
      return -2.0 * std::sin(2.0 * u);
    case 2:
      return 8.0 * u * u;
    case 3:
      return 7.0 * std::sin(u) / (2.0 - std::sin(u));
    case 4:
      return 6.0 * std::exp(-u);
    case 5:
      return u * u * u + 1.5 * (u - 1.0) * (u - 1.0);
    case 6:
      return 5.0 * u;
    case 7:
      return 10.0 * std::sin(std::exp(-u / 2.0));
    case 8:
      return -10.0 * normal_cdf((u - 0.5) / 0.8);
    default:
      throw std::out_of_range("component_f: j must be in 1..8");
  }
}

double sample_noise(NoiseKind kind, Rng& rng) {
  switch (kind) {
    case NoiseKind::gauss:
      return gaussian(rng);
    case NoiseKind::A:
      return uniform01(rng) < kMixtureMinorShare ? gaussian(rng, 8.0) : gaussian(rng, -2.0);
    case NoiseKind::B:
      return uniform01(rng) < kMixtureMinorShare ? gaussian(rng, 20.0) : gaussian(rng, 0.0);
    case NoiseKind::C:
      return student_t2(rng);
  }
  return 0.0;
}

Dataset gen_regression(std::size_t n, std::size_t p, NoiseKind noise, std::uint64_t seed) {
  if (p < kInformative) throw ConfigError("regression generator needs p >= 8");
  Rng rng(seed);
  Dataset ds;
  ds.task = Task::regression;
  ds.x = Matrix(n, p);
  ds.y.resize(n);
  ds.corrupted.assign(n, corruption::clean);
  ds.true_support = support_prefix(kInformative);
  ds.f_star.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t j = 0; j < p; ++j) ds.x(i, j) = uniform01(rng);
    for (std::size_t j = 0; j < kInformative; ++j) {
      f += component_f(static_cast<int>(j + 1), ds.x(i, j));
    }
    (*ds.f_star)[i] = f;
  }

  // Mixture laws use an exact-count assignment of the minority component so
  // the flags match round(0.2 n).
  std::vector<std::uint8_t> minor(n, 0);
  if (noise == NoiseKind::A || noise == NoiseKind::B) {
    for (std::size_t i : sample_without_replacement(rng, n, fraction_count(kMixtureMinorShare, n))) {
      minor[i] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double eps = 0.0;
    switch (noise) {
      case NoiseKind::gauss:
        eps = gaussian(rng);
        break;
      case NoiseKind::A:
        eps = minor[i] ? gaussian(rng, 8.0) : gaussian(rng, -2.0);
        break;
      case NoiseKind::B:
        eps = minor[i] ? gaussian(rng, 20.0) : gaussian(rng, 0.0);
        break;
      case NoiseKind::C:
        eps = student_t2(rng);
        break;
    }
    ds.y[i] = (*ds.f_star)[i] + eps;
    if (minor[i]) ds.corrupted[i] = corruption::label;
  }
  return ds;
}

Dataset gen_classification(std::size_t n, std::size_t p, std::uint64_t seed) {
  if (p < 2) throw ConfigError("classification generator needs p >= 2");
  Rng rng(seed);
  Dataset ds;
  ds.task = Task::classification;
  ds.x = Matrix(n, p);
  ds.y.resize(n);
  ds.corrupted.assign(n, corruption::clean);
  ds.true_support = support_prefix(2);
  ds.f_star.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    for (std::size_t j = 0; j < p; ++j) ds.x(i, j) = (uniform01(rng) + u) / 2.0;
    const double f = classification_score(ds.x.row(i));
    (*ds.f_star)[i] = f;
    ds.y[i] = f <= 0.0 ? 0.0 : 1.0;
  }
  return ds;
}

Dataset corrupt_labels(const Dataset& ds, double r1, Rng& rng) {
  check_fraction(r1, "r1");
  if (ds.task != Task::classification) {
    throw ConfigError("label flipping needs a classification dataset");
  }
  Dataset out = ds;
  for (std::size_t i : sample_without_replacement(rng, ds.size(), fraction_count(r1, ds.size()))) {
    out.y[i] = 1.0 - out.y[i];
    out.corrupted[i] |= corruption::label;
  }
  return out;
}

Dataset inject_outliers(const Dataset& ds, double r1, double mean, double var, Rng& rng) {
  check_fraction(r1, "r1");
  if (ds.task != Task::regression) throw ConfigError("outlier injection needs a regression dataset");
  if (!(var >= 0.0)) throw ConfigError("outlier variance must be >= 0");
  Dataset out = ds;
  const double sd = std::sqrt(var);
  for (std::size_t i : sample_without_replacement(rng, ds.size(), fraction_count(r1, ds.size()))) {
    out.y[i] += gaussian(rng, mean, sd);
    out.corrupted[i] |= corruption::label;
  }
  return out;
}

Dataset corrupt_features(const Dataset& ds, double r3, Rng& rng) {
  check_fraction(r3, "r3");
  Dataset out = ds;
  for (std::size_t i : sample_without_replacement(rng, ds.size(), fraction_count(r3, ds.size()))) {
    for (double& v : out.x.row(i)) v += student_t2(rng);
    out.corrupted[i] |= corruption::feature;
  }
  return out;
}

Dataset make_imbalanced(const Dataset& ds, double r2, Rng& rng, std::optional<std::size_t> n_out) {
  if (ds.task != Task::classification) throw ConfigError("imbalance needs a classification dataset");
  if (!(r2 > 0.0 && r2 < 1.0)) {
    throw ConfigError("imbalance factor r2 must lie in (0, 1) so both classes remain");
  }
  std::vector<std::size_t> neg;
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < ds.size(); ++i) (ds.y[i] == 0.0 ? neg : pos).push_back(i);
  if (neg.empty() || pos.empty()) throw ConfigError("imbalance needs both classes present");

  std::size_t keep_neg = 0;
  std::size_t keep_pos = 0;
  if (n_out) {
    keep_neg = fraction_count(r2, *n_out);
    keep_pos = *n_out - keep_neg;
  } else {
    // Largest subset: keep one class whole, subsample the other.
    keep_pos = pos.size();
    keep_neg = static_cast<std::size_t>(
        std::llround(r2 * static_cast<double>(keep_pos) / (1.0 - r2)));
    if (keep_neg > neg.size()) {
      keep_neg = neg.size();
      keep_pos = static_cast<std::size_t>(
          std::llround((1.0 - r2) * static_cast<double>(keep_neg) / r2));
    }
  }
  if (keep_neg > neg.size() || keep_pos > pos.size() || keep_neg == 0 || keep_pos == 0) {
    throw ConfigError("infeasible imbalance factor " + std::to_string(r2) + " for " +
                      std::to_string(neg.size()) + " negatives and " +
                      std::to_string(pos.size()) + " positives");
  }
  std::vector<std::size_t> chosen;
  for (std::size_t k : sample_without_replacement(rng, neg.size(), keep_neg)) chosen.push_back(neg[k]);
  for (std::size_t k : sample_without_replacement(rng, pos.size(), keep_pos)) chosen.push_back(pos[k]);
  std::sort(chosen.begin(), chosen.end());
  return ds.subset(chosen);
}

Dataset relabel_gaussian(const Dataset& ds, Rng& rng) {
  if (ds.task != Task::regression || !ds.f_star) {
    throw ConfigError("gaussian relabelling needs a synthetic regression dataset");
  }
  Dataset out = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.y[i] = (*ds.f_star)[i] + gaussian(rng);
    out.corrupted[i] &= static_cast<std::uint8_t>(~corruption::label);
  }
  return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
    total += r;
  }
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(n) * ratios[k] / total;
    sizes[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

Split split(const Dataset& ds, const std::array<double, 3>& ratios, Rng& rng, bool clean_meta) {
  const auto sizes = split_sizes(ds.size(), ratios);
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::size_t> meta;
  std::vector<std::size_t> rest;
  for (std::size_t i : perm) {
    const bool eligible = !clean_meta || ds.corrupted[i] == corruption::clean;
    if (eligible && meta.size() < sizes[1]) {
      meta.push_back(i);
    } else {
      rest.push_back(i);
    }
  }
  if (meta.size() < sizes[1]) {
    throw ConfigError("not enough clean samples for the meta set: need " +
                      std::to_string(sizes[1]) + ", have " + std::to_string(meta.size()));
  }
  const std::span<const std::size_t> rest_view(rest);
  return {ds.subset(rest_view.first(sizes[0])), ds.subset(meta),
          ds.subset(rest_view.subspan(sizes[0]))};
}

Dataset load_csv(const std::filesystem::path& path, std::string_view target_column, Task task) {
  const RawCsv raw = read_raw_csv(path);
  const std::size_t target = column_index(raw, target_column, path);
  const std::size_t p = raw.header.size() - 1;

  Dataset ds;
  ds.task = task;
  ds.x = Matrix(raw.rows.size(), p);
  ds.y.resize(raw.rows.size());
  ds.corrupted.assign(raw.rows.size(), corruption::clean);
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    std::size_t col = 0;
    for (std::size_t c = 0; c < raw.header.size(); ++c) {
      if (c == target) {
        ds.y[i] = raw.rows[i][c];
      } else {
        ds.x(i, col++) = raw.rows[i][c];
      }
    }
  }
  for (std::size_t j = 0; j < p && ds.size() > 0; ++j) {
    double lo = ds.x(0, j);
    double hi = lo;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      lo = std::min(lo, ds.x(i, j));
      hi = std::max(hi, ds.x(i, j));
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      ds.x(i, j) = range > 0.0 ? (ds.x(i, j) - lo) / range : 0.0;
    }
  }
  ds.validate();
  return ds;
}

void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  for (std::size_t j = 0; j < ds.dim(); ++j) os << 'x' << (j + 1) << ',';
  os << "y,flag";
  if (ds.f_star) os << ",f_star";
  os << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.x.row(i)) os << format_double(v) << ',';
    os << format_double(ds.y[i]) << ',' << static_cast<int>(ds.corrupted[i]);
    if (ds.f_star) os << ',' << format_double((*ds.f_star)[i]);
    os << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_dataset_csv(out, ds);
  if (!out) throw ConfigError("failed writing " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path, Task task) {
  const RawCsv raw = read_raw_csv(path);
  const std::size_t y_col = column_index(raw, "y", path);
  const std::size_t flag_col = column_index(raw, "flag", path);
  const auto f_it = std::find(raw.header.begin(), raw.header.end(), "f_star");
  const bool has_f = f_it != raw.header.end();
  const std::size_t p = y_col;
  for (std::size_t j = 0; j < p; ++j) {
    if (raw.header[j] != "x" + std::to_string(j + 1)) {
      throw ConfigError(path.string() + ": expected feature column x" + std::to_string(j + 1));
    }
  }
  Dataset ds;
  ds.task = task;
  ds.x = Matrix(raw.rows.size(), p);
  ds.y.resize(raw.rows.size());
  ds.corrupted.resize(raw.rows.size());
  if (has_f) ds.f_star.emplace(raw.rows.size());
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) ds.x(i, j) = raw.rows[i][j];
    ds.y[i] = raw.rows[i][y_col];
    ds.corrupted[i] = static_cast<std::uint8_t>(raw.rows[i][flag_col]);
    if (has_f) (*ds.f_star)[i] = raw.rows[i][static_cast<std::size_t>(f_it - raw.header.begin())];
  }
  ds.validate();
  return ds;
}

}  // namespace mam
