#pragma once

// Summation-scoring comparator in the style of the earlier production
// method: unweighted hit-miss weights over global rates, uncapped
// correlation compensation, a mean-of-known-duplicates threshold and a
// strict age + sex + onset gate. Patient initials are not modelled.

#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "casematch/pair_features.hpp"

namespace casematch {

struct BaselineModel {
  static constexpr int kFormatVersion = 1;

  HitMissParams params;
  double threshold = 0.0;
  json metadata = json::object();

  json to_json() const {
    return {{"format_version", kFormatVersion},
            {"kind", "baseline"},
            {"hitmiss_params", params.to_json()},
            {"threshold", threshold},
            {"gate_fields", {"age", "sex", "onset"}},
            {"training", metadata}};
  }

  static BaselineModel from_json(const json& j) {
    if (j.value("format_version", 0) != kFormatVersion || j.value("kind", "") != "baseline")
      throw data_error("baseline model: unsupported format_version or kind");
    BaselineModel m;
    m.params = HitMissParams::from_json(j.at("hitmiss_params"));
    m.threshold = j.at("threshold").get<double>();
    if (!std::isfinite(m.threshold)) throw data_error("baseline model: threshold must be finite");
    m.metadata = j.value("training", json::object());
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write baseline model '" + path + "'");
    out << to_json().dump(2) << '\n';
  }

  static BaselineModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open baseline model '" + path + "'");
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw data_error("baseline model '" + path + "': " + e.what());
    }
  }
};

struct BaselineBreakdown {
  double sex = 0.0;
  double country = 0.0;
  double outcome = 0.0;
  double age = 0.0;
  double onset = 0.0;
  DrugEventBreakdown drug_event;
  double total = 0.0;
  double gate_net = 0.0;
  bool gate_passed = false;
  bool blocked = false;
  bool suspected = false;

  json to_json() const {
    return {{"sex", sex},
            {"country", country},
            {"outcome", outcome},
            {"age", age},
            {"onset", onset},
            {"drugs", drug_event.drugs.total()},
            {"events", drug_event.events.total()},
            {"compensation", drug_event.compensation},
            {"total", total},
            {"gate", {{"net", gate_net}, {"passed", gate_passed}}},
            {"suspected", suspected}};
  }
};

class BaselineScorer {
 public:
  BaselineScorer(const FrequencyTables& tables, BaselineModel model)
      : tables_(&tables), model_(std::move(model)), scorer_(tables, model_.params) {}

  const BaselineModel& model() const { return model_; }

  /// Score and verdict for a pair; blocked pairs score nothing.
  BaselineBreakdown score(const ReportProfile& a, const ReportProfile& b) const {
    BaselineBreakdown out;
    if (!blocking_pass(a, b)) {
      out.blocked = true;
      return out;
    }
    const auto& p = model_.params;
    const Report& ra = *a.report;
    const Report& rb = *b.report;
    auto opt = [](const std::string& s) -> std::optional<std::string_view> {
      if (s.empty()) return std::nullopt;
      return std::string_view(s);
    };
    out.sex = scorer_.sex_weight(ra.sex, rb.sex);
    out.country = categorical_weight(opt(ra.country), opt(rb.country), tables_->country(), p.alpha_country);
    auto opt_outcome = [](const std::optional<std::string>& s) -> std::optional<std::string_view> {
      if (!s) return std::nullopt;
      return std::string_view(*s);
    };
    out.outcome =
        categorical_weight(opt_outcome(ra.outcome), opt_outcome(rb.outcome), tables_->outcome(), p.alpha_outcome);
    out.age = numeric_mixture_weight(a.age, b.age, p.age, p.age_independence);
    out.onset = numeric_mixture_weight(a.onset, b.onset, p.onset, p.onset_independence);
    out.drug_event = scorer_.drug_event_in_slot(a, b, kGlobalSlot, CompensationMode::uncapped);
    out.total = out.sex + out.country + out.outcome + out.age + out.onset + out.drug_event.value();
    out.gate_net = out.age + out.sex + out.onset;
    out.gate_passed = out.gate_net > 0.0;
    out.suspected = out.gate_passed && out.total > model_.threshold;
    return out;
  }

 private:
  const FrequencyTables* tables_;
  BaselineModel model_;
  FeatureScorer scorer_;
};

inline double mean_threshold(std::span<const double> duplicate_scores) {
  if (duplicate_scores.empty()) throw usage_error("baseline threshold needs at least one known duplicate");
  double s = 0.0;
  for (double v : duplicate_scores) s += v;
  return s / static_cast<double>(duplicate_scores.size());
}

/// Threshold = mean total score of the known duplicate pairs (given as
/// corpus index pairs). Blocked duplicates are left out of the mean.
inline BaselineModel fit_baseline(const PreparedCorpus& prepared, const FrequencyTables& tables,
                                  std::span<const std::pair<std::size_t, std::size_t>> duplicates,
                                  HitMissParams params) {
  BaselineModel m;
  m.params = std::move(params);
  const BaselineScorer scorer(tables, m);
  std::vector<double> scores;
  for (const auto& [i, j] : duplicates) {
    const auto b = scorer.score(prepared[i], prepared[j]);
    if (!b.blocked) scores.push_back(b.total);
  }
  m.threshold = mean_threshold(scores);
  m.metadata = {{"known_duplicates", duplicates.size()},
                {"duplicates_scored", scores.size()},
                {"omitted_fields", {"patient_initials"}},
                {"rates", "global"},
                {"compensation", "uncapped"}};
  return m;
}

}  // namespace casematch
