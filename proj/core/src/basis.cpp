#include "mam/basis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "mam/error.hpp"

namespace mam {
namespace {

constexpr std::size_t kSupNormGrid = 10001;
constexpr double kDomainWiden = 1e-6;

// Cubic B-splines have order 4: d basis functions need d - 4 interior knots.
constexpr std::size_t kOrder = 4;

double clamp_to(const Interval& iv, double x) { return std::clamp(x, iv.lo, iv.hi); }

// Full clamped knot value at position i of the (d + 4)-long knot vector.
double knot_at(const Interval& iv, const std::vector<double>& interior, std::size_t i) {
  if (i < kOrder) return iv.lo;
  if (i - kOrder < interior.size()) return interior[i - kOrder];
  return iv.hi;
}

void eval_bspline(const Interval& iv, const std::vector<double>& interior, std::size_t d,
                  double u, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);

  // Knot span s with t[s] <= u < t[s+1], s in [3, d-1]; u == hi uses the
  // last non-empty span so the basis still sums to one at the right edge.
  std::size_t s = d - 1;
  if (u < iv.hi) {
    s = kOrder - 1;
    for (std::size_t i = kOrder; i < d; ++i) {
      if (knot_at(iv, interior, i) <= u) s = i;
    }
  }
  while (s > kOrder - 1 &&
         !(knot_at(iv, interior, s) < knot_at(iv, interior, s + 1))) {
    --s;
  }

  // Cox-de Boor triangle, local basis N[0..3] for functions s-3 .. s.
  std::array<double, kOrder> n{};
  std::array<double, kOrder> left{};
  std::array<double, kOrder> right{};
  n[0] = 1.0;
  for (std::size_t j = 1; j < kOrder; ++j) {
    left[j] = u - knot_at(iv, interior, s + 1 - j);
    right[j] = knot_at(iv, interior, s + j) - u;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double temp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }
  for (std::size_t r = 0; r < kOrder; ++r) out[s - (kOrder - 1) + r] = n[r];
}

void eval_trig(const Interval& iv, std::size_t d, double x, std::span<double> out) {
  const double u = (x - iv.lo) / (iv.hi - iv.lo);
  const double amp = std::numbers::sqrt2;
  for (std::size_t k = 1; 2 * k <= d; ++k) {
    const double arg = 2.0 * std::numbers::pi * static_cast<double>(k) * u;
    out[2 * k - 2] = amp * std::cos(arg);
    out[2 * k - 1] = amp * std::sin(arg);
  }
  if (d % 2 == 1) out[d - 1] = 1.0;
}

double grid_sup_norm(const BasisSpec& spec, std::size_t j) {
  std::vector<double> vals(spec.d);
  double best = 0.0;
  const auto& iv = spec.domain[j];
  for (std::size_t g = 0; g < kSupNormGrid; ++g) {
    const double t = static_cast<double>(g) / static_cast<double>(kSupNormGrid - 1);
    eval_coordinate(spec, j, iv.lo + t * (iv.hi - iv.lo), vals);
    for (double v : vals) best = std::max(best, std::abs(v));
  }
  return best;
}

}  // namespace

std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::bspline_cubic:
      return "bspline_cubic";
    case BasisKind::trig_orthonormal:
      return "trig_orthonormal";
  }
  return "unknown";
}

BasisKind parse_basis_kind(std::string_view name) {
  if (name == "bspline_cubic" || name == "bspline") return BasisKind::bspline_cubic;
  if (name == "trig_orthonormal" || name == "trig") return BasisKind::trig_orthonormal;
  throw ConfigError("unknown basis kind: " + std::string(name));
}

void BasisSpec::validate() const {
  if (d == 0) throw ConfigError("basis dimension d must be >= 1");
  if (p == 0) throw ConfigError("basis input dimension p must be >= 1");
  if (kind == BasisKind::bspline_cubic && d < kOrder) {
    throw ConfigError("cubic B-spline basis needs d >= 4");
  }
  if (domain.size() != p || sup_norm.size() != p) {
    throw ConfigError("basis spec arrays do not match p");
  }
  if (kind == BasisKind::bspline_cubic && knots.size() != p) {
    throw ConfigError("basis spec knots do not match p");
  }
  for (std::size_t j = 0; j < p; ++j) {
    const auto& iv = domain[j];
    if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi)) {
      throw ConfigError("invalid domain for coordinate " + std::to_string(j + 1));
    }
    if (!(sup_norm[j] >= 0.0)) throw ConfigError("negative sup_norm");
    if (kind != BasisKind::bspline_cubic) continue;
    const auto& kn = knots[j];
    if (kn.size() != d - kOrder) {
      throw ConfigError("coordinate " + std::to_string(j + 1) + " needs " +
                        std::to_string(d - kOrder) + " interior knots");
    }
    if (!std::is_sorted(kn.begin(), kn.end())) throw ConfigError("knots not sorted");
    for (double t : kn) {
      if (!(t > iv.lo && t < iv.hi)) throw ConfigError("knot outside domain interior");
    }
  }
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BasisSpec fit_basis(const Matrix& x_train, std::size_t d, BasisKind kind) {
  const std::size_t n = x_train.rows();
  const std::size_t p = x_train.cols();
  if (d == 0) throw ConfigError("basis dimension d must be >= 1");
  if (p == 0) throw ConfigError("training matrix has no columns");
  if (kind == BasisKind::bspline_cubic) {
    if (d < kOrder) throw ConfigError("cubic B-spline basis needs d >= 4");
    if (n < d + 4) {
      throw ConfigError("cubic B-spline fit needs n >= d + 4 training rows (n = " +
                        std::to_string(n) + ")");
    }
  } else if (n < 2) {
    throw ConfigError("basis fit needs at least 2 training rows");
  }

  BasisSpec spec;
  spec.kind = kind;
  spec.d = d;
  spec.p = p;
  spec.domain.resize(p);
  spec.sup_norm.assign(p, 0.0);
  if (kind == BasisKind::bspline_cubic) spec.knots.resize(p);

  std::vector<double> column(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = x_train(i, j);
      if (!std::isfinite(column[i])) {
        throw ConfigError("non-finite training value at row " + std::to_string(i + 1) +
                          ", coordinate " + std::to_string(j + 1));
      }
    }
    const auto [mn, mx] = std::minmax_element(column.begin(), column.end());
    if (*mn == *mx) throw ConfigError("constant feature: " + std::to_string(j + 1));
    const double widen = kDomainWiden * (*mx - *mn);
    spec.domain[j] = {*mn - widen, *mx + widen};

    if (kind == BasisKind::bspline_cubic) {
      const std::size_t interior = d - kOrder;
      auto& kn = spec.knots[j];
      kn.resize(interior);
      for (std::size_t k = 0; k < interior; ++k) {
        kn[k] = empirical_quantile(column, static_cast<double>(k + 1) /
                                               static_cast<double>(interior + 1));
      }
    }
  }
  for (std::size_t j = 0; j < p; ++j) spec.sup_norm[j] = grid_sup_norm(spec, j);
  return spec;
}

void eval_coordinate(const BasisSpec& spec, std::size_t j, double x, std::span<double> out) {
  if (!std::isfinite(x)) {
    throw ConfigError("non-finite input at coordinate " + std::to_string(j + 1));
  }
  const auto& iv = spec.domain[j];
  const double u = clamp_to(iv, x);
  switch (spec.kind) {
    case BasisKind::bspline_cubic:
      eval_bspline(iv, spec.knots[j], spec.d, u, out);
      break;
    case BasisKind::trig_orthonormal:
      eval_trig(iv, spec.d, u, out);
      break;
  }
}

std::vector<double> transform(const BasisSpec& spec, std::span<const double> x) {
  if (x.size() != spec.p) {
    throw std::invalid_argument("transform: expected " + std::to_string(spec.p) +
                                " inputs, got " + std::to_string(x.size()));
  }
  std::vector<double> psi(spec.width());
  for (std::size_t j = 0; j < spec.p; ++j) {
    eval_coordinate(spec, j, x[j], std::span<double>(psi).subspan(j * spec.d, spec.d));
  }
  return psi;
}

FeatureMatrix transform_batch(const BasisSpec& spec, const Matrix& x) {
  if (x.rows() > 0 && x.cols() != spec.p) {
    throw std::invalid_argument("transform_batch: column count does not match basis p");
  }
  FeatureMatrix out{spec.p, spec.d, Matrix(x.rows(), spec.width())};
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto dst = out.values.row(i);
    for (std::size_t j = 0; j < spec.p; ++j) {
      try {
        eval_coordinate(spec, j, x(i, j), dst.subspan(j * spec.d, spec.d));
      } catch (const ConfigError& e) {
        throw ConfigError("row " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const BasisSpec& spec) {
  nlohmann::json domains = nlohmann::json::array();
  for (const auto& iv : spec.domain) domains.push_back({iv.lo, iv.hi});
  j = nlohmann::json{{"kind", to_string(spec.kind)},
                     {"d", spec.d},
                     {"p", spec.p},
                     {"domains", domains},
                     {"knots", spec.knots},
                     {"sup_norms", spec.sup_norm}};
}

void from_json(const nlohmann::json& j, BasisSpec& spec) {
  try {
    spec.kind = parse_basis_kind(j.at("kind").get<std::string>());
    spec.d = j.at("d").get<std::size_t>();
    spec.p = j.at("p").get<std::size_t>();
    spec.domain.clear();
    for (const auto& iv : j.at("domains")) {
      spec.domain.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    }
    spec.knots = j.at("knots").get<std::vector<std::vector<double>>>();
    spec.sup_norm = j.at("sup_norms").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed basis spec: ") + e.what());
  }
  spec.validate();
}

}  // namespace mam
