#include "mam/eval.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "mam/error.hpp"
#include "mam/io.hpp"

namespace mam {
namespace {

void check_lengths(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

double f1_for(double cls, std::span<const double> pred, std::span<const double> y) {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool p = pred[i] == cls;
    const bool t = y[i] == cls;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

double mse(std::span<const double> pred, std::span<const double> y) {
  check_lengths(pred, y, "mse");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = pred[i] - y[i];
    total += r * r;
  }
  return total / static_cast<double>(y.size());
}

double accuracy(std::span<const double> pred_labels, std::span<const double> y) {
  check_lengths(pred_labels, y, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += pred_labels[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

double macro_f1(std::span<const double> pred_labels, std::span<const double> y) {
  check_lengths(pred_labels, y, "macro_f1");
  return 0.5 * (f1_for(0.0, pred_labels, y) + f1_for(1.0, pred_labels, y));
}

SelectionScore asp(std::span<const std::vector<std::size_t>> selected_runs,
                   std::span<const std::size_t> true_support, std::size_t p) {
  if (true_support.empty()) throw std::invalid_argument("asp: true support is empty");
  if (selected_runs.empty()) throw std::invalid_argument("asp: no runs");
  std::vector<std::size_t> truth(true_support.begin(), true_support.end());
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
  const double irrelevant = static_cast<double>(std::max<std::size_t>(1, p - truth.size()));

  SelectionScore score;
  for (const auto& run : selected_runs) {
    std::vector<std::size_t> sel(run.begin(), run.end());
    std::sort(sel.begin(), sel.end());
    sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
    std::size_t hit = 0;
    for (std::size_t j : sel) hit += std::binary_search(truth.begin(), truth.end(), j);
    score.asp += static_cast<double>(hit) / static_cast<double>(truth.size());
    score.fsr += static_cast<double>(sel.size() - hit) / irrelevant;
  }
  const double runs = static_cast<double>(selected_runs.size());
  score.asp /= runs;
  score.fsr /= runs;
  return score;
}

WeightAudit weight_audit(const WeightNetParams& theta, std::span<const double> losses,
                         std::span<const std::uint8_t> flags) {
  if (losses.size() != flags.size()) throw std::invalid_argument("weight_audit: length mismatch");
  double sum_clean = 0.0;
  double sum_corrupt = 0.0;
  std::size_t n_clean = 0;
  std::size_t n_corrupt = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double w = v_weight(theta, losses[i]);
    if (flags[i] == 0) {
      sum_clean += w;
      ++n_clean;
    } else {
      sum_corrupt += w;
      ++n_corrupt;
    }
  }
  if (n_clean == 0) throw std::invalid_argument("weight_audit: no clean samples");
  WeightAudit out;
  out.mean_clean = sum_clean / static_cast<double>(n_clean);
  if (n_corrupt > 0) out.mean_corrupt = sum_corrupt / static_cast<double>(n_corrupt);
  return out;
}

std::vector<double> hard_labels(std::span<const double> probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= 0.5 ? 1.0 : 0.0;
  return out;
}

const char* RunMetrics::csv_header() {
  return "lambda,seed,status,mse_vs_labels,mse_vs_fstar,accuracy,macro_f1,asp,"
         "false_selection_rate,mean_weight_clean,mean_weight_corrupt,selected";
}

std::string RunMetrics::csv_row(double lambda, std::uint64_t seed) const {
  std::string sel;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    if (k > 0) sel += ';';
    sel += std::to_string(selected[k] + 1);
  }
  return format_double(lambda) + ',' + std::to_string(seed) + ",ok," +
         format_double(mse_vs_labels) + ',' + optional_cell(mse_vs_fstar) + ',' +
         optional_cell(accuracy) + ',' + optional_cell(macro_f1) + ',' + optional_cell(asp) + ',' +
         optional_cell(false_selection_rate) + ',' + format_double(mean_weight_clean) + ',' +
         optional_cell(mean_weight_corrupt) + ',' + sel;
}

void to_json(nlohmann::json& j, const RunMetrics& m) {
  std::vector<std::size_t> one_based(m.selected);
  for (auto& v : one_based) ++v;
  j = nlohmann::json::object();
  j["mse_vs_labels"] = m.mse_vs_labels;
  put_optional(j, "mse_vs_fstar", m.mse_vs_fstar);
  put_optional(j, "accuracy", m.accuracy);
  put_optional(j, "macro_f1", m.macro_f1);
  j["selected"] = one_based;
  put_optional(j, "asp", m.asp);
  put_optional(j, "false_selection_rate", m.false_selection_rate);
  j["mean_weight_clean"] = m.mean_weight_clean;
  put_optional(j, "mean_weight_corrupt", m.mean_weight_corrupt);
}

void from_json(const nlohmann::json& j, RunMetrics& m) {
  try {
    m.mse_vs_labels = j.at("mse_vs_labels").get<double>();
    m.mse_vs_fstar = get_optional<double>(j, "mse_vs_fstar");
    m.accuracy = get_optional<double>(j, "accuracy");
    m.macro_f1 = get_optional<double>(j, "macro_f1");
    m.selected = j.at("selected").get<std::vector<std::size_t>>();
    for (auto& v : m.selected) {
      if (v == 0) throw ConfigError("selected coordinates are 1-based");
      --v;
    }
    m.asp = get_optional<double>(j, "asp");
    m.false_selection_rate = get_optional<double>(j, "false_selection_rate");
    m.mean_weight_clean = j.at("mean_weight_clean").get<double>();
    m.mean_weight_corrupt = get_optional<double>(j, "mean_weight_corrupt");
    m.wall_time = 0.0;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed metrics: ") + e.what());
  }
}

}  // namespace mam
