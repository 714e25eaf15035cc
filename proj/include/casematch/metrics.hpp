#pragma once

// Evaluation arithmetic: precision, recall, expected duplicates per report,
// Wald intervals, Cohen's kappa, precision-run rows and per-country comparisons.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "casematch/pair_stream.hpp"
#include "casematch/training.hpp"

namespace casematch {

/// Raw counts behind the precision/recall/expected-rate formulas.
struct EvalCounts {
  std::uint64_t true_positives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t false_negatives = 0;
  std::uint64_t predicted = 0;
  std::uint64_t pairs_compared = 0;
  std::uint64_t reports_in_dataset = 0;

  void validate() const {
    if (predicted != 0 && predicted != true_positives + false_positives)
      throw usage_error("eval counts: predicted must equal true + false positives");
  }

  json to_json() const {
    return {{"true_positives", true_positives}, {"false_positives", false_positives},
            {"false_negatives", false_negatives}, {"predicted", predicted},
            {"pairs_compared", pairs_compared}, {"reports_in_dataset", reports_in_dataset}};
  }
};

inline double precision(std::uint64_t tp, std::uint64_t fp) {
  if (tp + fp == 0) throw usage_error("precision undefined: no predicted positives");
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

inline double recall(std::uint64_t tp, std::uint64_t fn) {
  if (tp + fn == 0) throw usage_error("recall undefined: no actual positives");
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

/// (found / pairs_compared) * (n_reports - 1): the number of true duplicates
/// a report would be expected to have among all other reports.
inline double expected_duplicates_per_report(double true_dups_found, double pairs_compared, double n_reports) {
  if (!(pairs_compared > 0)) throw usage_error("expected duplicates: pairs_compared must be positive");
  if (!(n_reports >= 2)) throw usage_error("expected duplicates: need at least 2 reports");
  return true_dups_found / pairs_compared * (n_reports - 1.0);
}

inline double true_positives_per_billion(double tp, double pairs_compared) {
  if (!(pairs_compared > 0)) throw usage_error("true positives per billion: pairs_compared must be positive");
  return tp / (pairs_compared / 1e9);
}

inline double possible_pairs(double n_reports) { return n_reports * (n_reports - 1.0) / 2.0; }

/// Two-sided standard normal quantile for `confidence`, by Newton on erf.
inline double normal_quantile_two_sided(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw usage_error("confidence must lie in (0, 1)");
  // erf(z / sqrt 2) = confidence
  double z = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double f = std::erf(z / std::sqrt(2.0)) - confidence;
    const double df = std::sqrt(2.0 / M_PI) * std::exp(-z * z / 2.0);
    const double step = f / df;
    z -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return z;
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// p ± z sqrt(p(1-p)/n), clipped to [0, 1]. z = 1.959964 at 95%.
inline Interval wald_ci(double p_hat, std::uint64_t n, double confidence = 0.95) {
  if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw usage_error("wald_ci: p_hat must lie in [0, 1]");
  if (n < 1) throw usage_error("wald_ci: n must be at least 1");
  const double z = confidence == 0.95 ? 1.959964 : normal_quantile_two_sided(confidence);
  const double half = z * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
  return {std::max(0.0, p_hat - half), std::min(1.0, p_hat + half)};
}

/// (p_o - p_e) / (1 - p_e) over paired labels of any comparable type.
template <class T>
double cohen_kappa(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw usage_error("cohen_kappa: label sequences differ in length");
  if (a.empty()) throw usage_error("cohen_kappa: no labels");
  const double n = static_cast<double>(a.size());
  std::map<T, double> ma, mb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
    agree += a[i] == b[i];
  }
  double pe = 0.0;
  for (const auto& [label, ca] : ma) {
    auto it = mb.find(label);
    if (it != mb.end()) pe += (ca / n) * (it->second / n);
  }
  if (pe >= 1.0) throw usage_error("cohen_kappa undefined: expected agreement is 1");
  return (agree / n - pe) / (1.0 - pe);
}

template <class T>
double cohen_kappa(const std::vector<T>& a, const std::vector<T>& b) {
  return cohen_kappa(std::span<const T>(a), std::span<const T>(b));
}

// ---------------------------------------------------------------------------
// Precision-run rows.

struct PrecisionRow {
  std::string model;
  double n_reports = 0.0;
  double pairs_compared = 0.0;
  std::uint64_t predicted = 0;
  std::uint64_t true_positives = 0;
  std::optional<std::uint64_t> related_positives;  // duplicates or otherwise related

  double precision() const { return casematch::precision(true_positives, predicted - true_positives); }
  Interval precision_ci() const { return wald_ci(precision(), predicted); }
  double tp_per_billion() const { return true_positives_per_billion(static_cast<double>(true_positives), pairs_compared); }
  double expected_per_report() const {
    return expected_duplicates_per_report(static_cast<double>(true_positives), pairs_compared, n_reports);
  }

  void validate() const {
    if (predicted == 0) throw usage_error("table row '" + model + "': no predicted duplicates");
    if (true_positives > predicted) throw usage_error("table row '" + model + "': more true positives than predictions");
    if (related_positives && (*related_positives < true_positives || *related_positives > predicted))
      throw usage_error("table row '" + model + "': related count must lie between true positives and predictions");
    if (!(pairs_compared > 0) || !(n_reports >= 2)) throw usage_error("table row '" + model + "': empty run");
  }

  json to_json() const {
    validate();
    const auto ci = precision_ci();
    json j = {{"model", model},
              {"n_reports", n_reports},
              {"pairs_compared", pairs_compared},
              {"predicted", predicted},
              {"true_positives", true_positives},
              {"precision", precision()},
              {"precision_ci", {ci.lower, ci.upper}},
              {"tp_per_billion_pairs", tp_per_billion()},
              {"expected_duplicates_per_report", expected_per_report()}};
    if (related_positives) {
      const double p = static_cast<double>(*related_positives) / static_cast<double>(predicted);
      const auto rci = wald_ci(p, predicted);
      j["related_positives"] = *related_positives;
      j["precision_including_related"] = p;
      j["precision_including_related_ci"] = {rci.lower, rci.upper};
    }
    return j;
  }

  /// Inverse of the input half of to_json; lists every absent field at once.
  static PrecisionRow from_json(const json& j) {
    std::vector<std::string> missing;
    for (const char* k : {"model", "n_reports", "pairs_compared", "predicted", "true_positives"})
      if (!j.contains(k)) missing.emplace_back(k);
    if (!missing.empty()) {
      std::string msg = "table row: missing fields:";
      for (const auto& m : missing) msg += " " + m;
      throw data_error(msg);
    }
    PrecisionRow r;
    r.model = j.at("model").get<std::string>();
    r.n_reports = j.at("n_reports").get<double>();
    r.pairs_compared = j.at("pairs_compared").get<double>();
    r.predicted = j.at("predicted").get<std::uint64_t>();
    r.true_positives = j.at("true_positives").get<std::uint64_t>();
    if (j.contains("related_positives")) r.related_positives = j.at("related_positives").get<std::uint64_t>();
    return r;
  }
};

/// Ground-truth lookup keyed by the unordered id pair.
class TruthIndex {
 public:
  TruthIndex() = default;

  template <class Range>
  explicit TruthIndex(const Range& labelled) {
    for (const auto& p : labelled) add(p.id_a, p.id_b, p.label);
  }

  void add(const std::string& a, const std::string& b, Label l) { labels_[key(a, b)] = l; }

  std::optional<Label> find(const std::string& a, const std::string& b) const {
    auto it = labels_.find(key(a, b));
    if (it == labels_.end()) return std::nullopt;
    return it->second;
  }

  bool is_duplicate(const std::string& a, const std::string& b) const { return find(a, b) == Label::duplicate; }

  std::size_t size() const { return labels_.size(); }

 private:
  static std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
  }
  std::map<std::pair<std::string, std::string>, Label> labels_;
};

/// Precision row for one precision run judged against ground truth; pairs
/// absent from the truth count as non-duplicates.
inline PrecisionRow precision_row(const RunRecord& run, const TruthIndex& truth, std::string model_name = {}) {
  if (run.suspected.empty()) throw usage_error("table row: run '" + run.model_id + "' has no suspected pairs");
  PrecisionRow r;
  r.model = model_name.empty() ? run.model_id : std::move(model_name);
  r.n_reports = static_cast<double>(run.n_reports);
  r.pairs_compared = static_cast<double>(run.pairs_consumed);
  r.predicted = run.suspected.size();
  std::uint64_t related = 0;
  for (const auto& f : run.suspected) {
    const auto l = truth.find(f.id_a, f.id_b);
    r.true_positives += l == Label::duplicate;
    related += l == Label::duplicate || l == Label::otherwise_related;
  }
  r.related_positives = related;
  return r;
}

// ---------------------------------------------------------------------------
// Exhaustive per-country comparison of two methods.

struct MethodOutcome {
  std::uint64_t remaining = 0;
  std::uint64_t predicted_pairs = 0;
  std::uint64_t sampled = 0;  // pairs whose truth was checked
  std::uint64_t sampled_true = 0;

  json to_json() const {
    json j = {{"remaining", remaining}, {"predicted_pairs", predicted_pairs},
              {"precision_fraction", std::to_string(sampled_true) + "/" + std::to_string(sampled)}};
    if (sampled > 0) j["precision"] = static_cast<double>(sampled_true) / static_cast<double>(sampled);
    return j;
  }
};

struct CountryComparison {
  std::string country;
  std::uint64_t n_reports = 0;
  MethodOutcome baseline;
  MethodOutcome model;

  double possible_pairs_millions() const { return possible_pairs(static_cast<double>(n_reports)) / 1e6; }

  json to_json() const {
    return {{"country", country},
            {"n_reports", n_reports},
            {"possible_pairs_millions", possible_pairs_millions()},
            {"baseline", baseline.to_json()},
            {"model", model.to_json()}};
  }
};

// ---------------------------------------------------------------------------
// Plain-text rendering. Displayed values are rounded; JSON keeps raw values.

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string render_grid(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out += r[c];
      if (c + 1 < r.size()) out += std::string(width[c] - r[c].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

/// One decimal at reference scale; three significant digits below 0.1 so
/// desk-scale counts do not print as 0.0.
inline std::string scaled(double v) {
  if (v >= 0.1 || v == 0.0) return fixed(v, 1);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

inline std::string render_precision_table(std::span<const PrecisionRow> rows) {
  std::vector<std::vector<std::string>> grid{{"Model", "N Reports (Millions)", "N Random Pairs Compared (Billions)",
                                              "N Predicted Duplicates", "N True Positives", "Precision",
                                              "True Positives per Billion Pairs", "True duplicates detected per report"}};
  for (const auto& r : rows) {
    r.validate();
    grid.push_back({r.model, detail::scaled(r.n_reports / 1e6), detail::scaled(r.pairs_compared / 1e9),
                    std::to_string(r.predicted), std::to_string(r.true_positives), detail::fixed(r.precision(), 2),
                    detail::fixed(r.tp_per_billion(), 2), detail::fixed(r.expected_per_report(), 2)});
  }
  return detail::render_grid(grid);
}

inline std::string render_country_comparison(std::span<const CountryComparison> cols, const std::string& baseline_name = "baseline",
                                 const std::string& model_name = "model") {
  std::vector<std::vector<std::string>> grid(9);
  grid[0] = {"Country"};
  grid[1] = {"N Reports"};
  grid[2] = {baseline_name + " Remaining Reports after removing suspected duplicates"};
  grid[3] = {model_name + " Remaining Reports after removing suspected duplicates"};
  grid[4] = {"N Possible Pairs (Millions)"};
  grid[5] = {baseline_name + " Predicted Duplicate Pairs"};
  grid[6] = {model_name + " Predicted Duplicate Pairs"};
  grid[7] = {baseline_name + " precision"};
  grid[8] = {model_name + " precision"};
  for (const auto& c : cols) {
    grid[0].push_back(c.country);
    grid[1].push_back(std::to_string(c.n_reports));
    grid[2].push_back(std::to_string(c.baseline.remaining));
    grid[3].push_back(std::to_string(c.model.remaining));
    grid[4].push_back(detail::scaled(c.possible_pairs_millions()));
    grid[5].push_back(std::to_string(c.baseline.predicted_pairs));
    grid[6].push_back(std::to_string(c.model.predicted_pairs));
    grid[7].push_back(std::to_string(c.baseline.sampled_true) + "/" + std::to_string(c.baseline.sampled));
    grid[8].push_back(std::to_string(c.model.sampled_true) + "/" + std::to_string(c.model.sampled));
  }
  return detail::render_grid(grid);
}

}  // namespace casematch
