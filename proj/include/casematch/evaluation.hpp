#pragma once

// Corpus-level evaluation against labelled pairs: recall per planting
// mechanism, precision of a full candidate scan, and the per-country
// comparator-versus-model comparison.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "casematch/baseline.hpp"
#include "casematch/clustering.hpp"
#include "casematch/metrics.hpp"
#include "casematch/review.hpp"
#include "casematch/synth.hpp"

namespace casematch {

struct Hits {
  std::uint64_t found = 0;
  std::uint64_t total = 0;

  double rate() const { return casematch::recall(found, total - found); }
  json to_json() const {
    json j = {{"found", found}, {"total", total}};
    j["recall"] = total ? json(rate()) : json(nullptr);
    return j;
  }
};

struct RecallReport {
  Hits overall;
  std::map<std::string, Hits> by_mechanism;

  json to_json() const {
    json m = json::object();
    for (const auto& [k, v] : by_mechanism) m[k] = v.to_json();
    return {{"overall", overall.to_json()}, {"by_mechanism", m}};
  }
};

/// Recall of `engine` on the detectable duplicates in `pairs`.
inline RecallReport evaluate_recall(const Engine& engine, std::span<const GroundTruthPair> pairs) {
  RecallReport out;
  const auto& prep = engine.prepared();
  for (const auto& g : pairs) {
    if (g.label != Label::duplicate || !g.detectable) continue;
    const bool hit = engine.evaluate(prep.require(g.id_a), prep.require(g.id_b)).suspected;
    auto& m = out.by_mechanism[g.mechanism.empty() ? "unspecified" : g.mechanism];
    ++m.total;
    ++out.overall.total;
    m.found += hit;
    out.overall.found += hit;
  }
  return out;
}

struct ScanPrecision {
  std::uint64_t flagged = 0;  // suspected pairs, excluded ones left out
  std::uint64_t true_positives = 0;
  std::uint64_t related_positives = 0;  // duplicates or otherwise related
  std::uint64_t excluded = 0;
  StageCounters counters;
  std::vector<PairKey> suspected;

  double precision() const { return casematch::precision(true_positives, flagged - true_positives); }

  json to_json() const {
    json j = {{"flagged", flagged},   {"true_positives", true_positives}, {"related_positives", related_positives},
              {"excluded", excluded}, {"counters", counters.to_json()}};
    if (flagged) {
      const auto ci = wald_ci(precision(), flagged);
      j["precision"] = precision();
      j["precision_ci"] = {ci.lower, ci.upper};
      j["precision_including_related"] = static_cast<double>(related_positives) / static_cast<double>(flagged);
    }
    return j;
  }
};

/// Scans every blocking-passing pair of `subset` and judges the suspected
/// ones against `truth`. Pairs in `exclude` (typically the training pairs)
/// are counted separately and left out of precision.
inline ScanPrecision scan_precision(const Engine& engine, std::span<const std::size_t> subset, const TruthIndex& truth,
                                   const std::set<PairKey>& exclude = {}, ScanOptions opt = {}) {
  ScanPrecision out;
  opt.emit = Emit::suspected;
  out.counters = engine.scan_candidates(
      subset,
      [&](const PairVerdict& v) {
        PairKey key{std::string(v.id_a), std::string(v.id_b)};
        if (exclude.contains(key)) {
          ++out.excluded;
          return;
        }
        ++out.flagged;
        const auto l = truth.find(key.first, key.second);
        out.true_positives += l == Label::duplicate;
        out.related_positives += l == Label::duplicate || l == Label::otherwise_related;
        out.suspected.push_back(std::move(key));
      },
      opt);
  return out;
}

inline std::set<PairKey> pair_set(std::span<const GroundTruthPair> pairs) {
  std::set<PairKey> out;
  for (const auto& g : pairs) out.insert(pair_key(g.id_a, g.id_b));
  return out;
}

inline TruthIndex truth_index(std::span<const GroundTruthPair> truth) {
  TruthIndex t;
  for (const auto& g : truth) t.add(g.id_a, g.id_b, g.label);
  return t;
}

inline std::vector<std::size_t> country_indices(const Corpus& corpus, std::string_view country) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].country == country) out.push_back(i);
  return out;
}

inline MethodOutcome method_outcome(const std::vector<PairKey>& flagged, std::uint64_t n_reports,
                                    const TruthIndex& truth) {
  MethodOutcome m;
  m.predicted_pairs = flagged.size();
  m.remaining = cluster_groups(flagged, n_reports).remaining;
  m.sampled = flagged.size();
  for (const auto& [a, b] : flagged) m.sampled_true += truth.is_duplicate(a, b);
  return m;
}

/// Exhaustive within-country comparison of the comparator and the model.
/// Every flagged pair is judged against ground truth (no subsampling).
inline CountryComparison compare_country(const Engine& engine, const BaselineScorer& baseline, const TruthIndex& truth,
                                    const std::string& country) {
  const auto& prep = engine.prepared();
  const auto subset = country_indices(prep.corpus(), country);
  if (subset.size() < 2) throw usage_error("country '" + country + "' has fewer than 2 reports");
  std::vector<PairKey> model_flags, baseline_flags;
  engine.scan_candidates(
      subset,
      [&](const PairVerdict& v) {
        PairKey key{std::string(v.id_a), std::string(v.id_b)};
        const auto b = baseline.score(prep[prep.require(v.id_a)], prep[prep.require(v.id_b)]);
        if (b.suspected) baseline_flags.push_back(key);
        if (v.suspected) model_flags.push_back(std::move(key));
      },
      {Emit::unblocked});
  CountryComparison col;
  col.country = country;
  col.n_reports = subset.size();
  col.baseline = method_outcome(baseline_flags, subset.size(), truth);
  col.model = method_outcome(model_flags, subset.size(), truth);
  return col;
}

/// A generated corpus with its tables, profiles and holdout split. Members
/// are heap-held so the profiles' back-pointers stay valid.
class SyntheticWorld {
 public:
  explicit SyntheticWorld(const SynthConfig& config, std::uint64_t split_seed = 7, SplitRatios ratios = {},
                          std::uint64_t min_country_support = 1000)
      : data_(std::make_unique<SynthOutput>(generate(config))),
        tables_(std::make_unique<FrequencyTables>(build_tables(data_->corpus, data_->ontology, min_country_support))),
        prepared_(std::make_unique<PreparedCorpus>(data_->corpus, data_->ontology, *tables_)),
        split_(holdout_split(data_->truth, ratios, split_seed)),
        truth_(truth_index(data_->truth)) {}

  const SynthOutput& data() const { return *data_; }
  const Corpus& corpus() const { return data_->corpus; }
  const FrequencyTables& tables() const { return *tables_; }
  const PreparedCorpus& prepared() const { return *prepared_; }
  const HoldoutSplit& split() const { return split_; }
  const TruthIndex& truth() const { return truth_; }

  /// Validation and test pairs together.
  std::vector<GroundTruthPair> held_out() const {
    auto out = split_.validation;
    out.insert(out.end(), split_.test.begin(), split_.test.end());
    return out;
  }

  /// Corpus indices of the detectable training duplicates.
  std::vector<std::pair<std::size_t, std::size_t>> training_duplicates() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& g : split_.train)
      if (g.label == Label::duplicate && g.detectable)
        out.emplace_back(prepared_->require(g.id_a), prepared_->require(g.id_b));
    return out;
  }

 private:
  std::unique_ptr<SynthOutput> data_;
  std::unique_ptr<FrequencyTables> tables_;
  std::unique_ptr<PreparedCorpus> prepared_;
  HoldoutSplit split_;
  TruthIndex truth_;
};

struct ModelPair {
  ClassifierModel drug;
  ClassifierModel vaccine;
};

inline ModelPair train_models(const PreparedCorpus& prepared, const FrequencyTables& tables,
                              std::span<const LabelledPair> pairs, const TrainOptions& opt) {
  return {train(ModelKind::drug, pairs, prepared, tables, opt), train(ModelKind::vaccine, pairs, prepared, tables, opt)};
}

}  // namespace casematch
