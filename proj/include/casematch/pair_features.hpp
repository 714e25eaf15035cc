#pragma once

// Blocking, the six-element pair feature vector, and the demographic gate.
//
// Missing inputs contribute 0 to every feature.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "casematch/date_embedding.hpp"
#include "casematch/date_extraction.hpp"
#include "casematch/external_link.hpp"
#include "casematch/hitmiss.hpp"

namespace casematch {

enum class Feature : std::size_t { sex = 0, age, drug_ae, onset, date_emb, ext };

inline constexpr std::size_t kFeatureCount = 6;

/// Serialization contract for model artifacts: names in vector order.
inline const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names{"sex", "age", "drug_ae", "onset", "date_emb", "ext"};
  return names;
}

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }

  bool finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct GateResult {
  bool passed = true;
  double net = 0.0;
};

/// Takes model-weighted contributions. Net exactly zero passes.
inline GateResult demographic_gate(double c_sex, double c_age, double c_date_emb) {
  const double net = c_sex + c_age + c_date_emb;
  return {net >= 0.0, net};
}

namespace detail {
template <class T>
bool sorted_intersect(std::span<const T> a, std::span<const T> b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) ++i;
    else if (b[j] < a[i]) ++j;
    else return true;
  }
  return false;
}

template <class T>
std::vector<T> sorted_unique(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}
}  // namespace detail

/// Per-report data precomputed once per scan.
struct ReportProfile {
  const Report* report = nullptr;
  std::vector<std::uint32_t> substances;  // sorted; equal to the drug item ids
  std::vector<std::uint32_t> socs;        // sorted
  std::vector<ItemId> event_items;        // sorted
  std::optional<DayInterval> age;
  std::optional<DayInterval> onset;
  DateVector dates;
  CountrySlot slot = kGlobalSlot;
};

inline ReportProfile make_profile(const Report& r, const Ontology& ontology, const FrequencyTables& tables,
                                  const DateExtractor& extractor,
                                  const DateKernel& kernel = DateKernel::triangular()) {
  ReportProfile p;
  p.report = &r;
  for (const auto& d : r.drugs) p.substances.push_back(ontology.drug_item(d.substance_index));
  for (const auto& e : r.events) {
    p.socs.push_back(e.soc_index);
    p.event_items.push_back(ontology.event_item(e.pt_index));
  }
  p.substances = detail::sorted_unique(std::move(p.substances));
  p.socs = detail::sorted_unique(std::move(p.socs));
  p.event_items = detail::sorted_unique(std::move(p.event_items));
  if (r.age) p.age = r.age->as_day_interval();
  if (r.earliest_onset) p.onset = r.earliest_onset->as_day_interval();
  const auto intervals = report_date_intervals(r, extractor);
  const auto eligible = eligible_embedding_dates(intervals);
  p.dates = build_date_vector(eligible, kernel);
  p.slot = tables.slot_for(r.country);
  return p;
}

inline bool blocking_pass(const ReportProfile& a, const ReportProfile& b) {
  return detail::sorted_intersect<std::uint32_t>(a.substances, b.substances) &&
         detail::sorted_intersect<std::uint32_t>(a.socs, b.socs);
}

/// At least one shared active substance and one shared system organ class.
inline bool blocking_pass(const Report& a, const Report& b) {
  std::vector<std::uint32_t> sa, sb, ca, cb;
  for (const auto& d : a.drugs) sa.push_back(d.substance_index);
  for (const auto& d : b.drugs) sb.push_back(d.substance_index);
  for (const auto& e : a.events) ca.push_back(e.soc_index);
  for (const auto& e : b.events) cb.push_back(e.soc_index);
  sa = detail::sorted_unique(std::move(sa));
  sb = detail::sorted_unique(std::move(sb));
  ca = detail::sorted_unique(std::move(ca));
  cb = detail::sorted_unique(std::move(cb));
  return detail::sorted_intersect<std::uint32_t>(sa, sb) && detail::sorted_intersect<std::uint32_t>(ca, cb);
}

/// Computes pair features with per-country item weights cached up front.
/// Immutable after construction; safe to share between threads.
class FeatureScorer {
 public:
  FeatureScorer(const FrequencyTables& tables, HitMissParams params, PrefixWhitelist whitelist = {})
      : tables_(&tables), params_(std::move(params)), whitelist_(std::move(whitelist)) {
    params_.validate();
    const std::size_t slots = tables.table_countries().size() + 1;
    match_cache_.resize(slots);
    const double miss_d = bernoulli_mismatch_weight(0.0, params_.alpha_drugs);
    const double miss_e = bernoulli_mismatch_weight(0.0, params_.alpha_events);
    mismatch_drug_ = miss_d;
    mismatch_event_ = miss_e;
    for (std::size_t s = 0; s < slots; ++s) {
      const CountrySlot slot = static_cast<CountrySlot>(s) - 1;
      auto& cache = match_cache_[s];
      cache.resize(tables.item_count());
      for (ItemId i = 0; i < tables.item_count(); ++i) {
        // Drug items precede event items; the boundary is recovered from the
        // profile spans at scoring time, so both alphas are cached.
        cache[i] = {bernoulli_match_weight(tables.rate(i, slot), params_.alpha_drugs),
                    bernoulli_match_weight(tables.rate(i, slot), params_.alpha_events)};
      }
    }
  }

  const FrequencyTables& tables() const { return *tables_; }
  const HitMissParams& params() const { return params_; }
  const PrefixWhitelist& whitelist() const { return whitelist_; }

  double sex_weight(Sex a, Sex b) const {
    auto opt = [](Sex s) -> std::optional<std::string_view> {
      if (s == Sex::unknown) return std::nullopt;
      return to_string(s);
    };
    return categorical_weight(opt(a), opt(b), tables_->sex(), params_.alpha_sex);
  }

  DrugEventBreakdown drug_event(const ReportProfile& a, const ReportProfile& b,
                                CompensationMode mode = CompensationMode::capped) const {
    return drug_event_in_slot(a, b, FrequencyTables::pair_slot(a.slot, b.slot), mode);
  }

  /// Same aggregate with rates forced to one table (kGlobalSlot for the
  /// comparator).
  DrugEventBreakdown drug_event_in_slot(const ReportProfile& a, const ReportProfile& b, CountrySlot slot,
                                        CompensationMode mode) const {
    const auto& cache = match_cache_[static_cast<std::size_t>(slot + 1)];
    DrugEventBreakdown out;
    matched_buffer().clear();
    auto& matched = matched_buffer();
    merge(a.substances, b.substances, cache, 0, mismatch_drug_, out.drugs, matched);
    merge(a.event_items, b.event_items, cache, 1, mismatch_event_, out.events, matched);
    out.compensation_raw = correlation_compensation_raw(matched, *tables_, slot);
    out.compensation = mode == CompensationMode::capped ? std::min(out.compensation_raw, out.match_sum())
                                                        : out.compensation_raw;
    return out;
  }

  FeatureVector features(const ReportProfile& a, const ReportProfile& b, DrugEventBreakdown* detail = nullptr) const {
    FeatureVector fv;
    fv[Feature::sex] = sex_weight(a.report->sex, b.report->sex);
    fv[Feature::age] = numeric_mixture_weight(a.age, b.age, params_.age, params_.age_independence);
    const auto de = drug_event(a, b);
    fv[Feature::drug_ae] = de.value();
    if (detail) *detail = de;
    fv[Feature::onset] = numeric_mixture_weight(a.onset, b.onset, params_.onset, params_.onset_independence);
    fv[Feature::date_emb] = date_similarity(a.dates, b.dates);
    fv[Feature::ext] = externally_indicated(a.report->ids, b.report->ids, whitelist_);
    return fv;
  }

 private:
  struct CachedMatch {
    double drug;
    double event;
  };

  static std::vector<ItemId>& matched_buffer() {
    thread_local std::vector<ItemId> buf;
    return buf;
  }

  static void merge(std::span<const ItemId> a, std::span<const ItemId> b, const std::vector<CachedMatch>& cache,
                    int which, double miss, VectorWeights& w, std::vector<ItemId>& matched) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      if (a[i] < b[j]) {
        ++i;
        ++w.one_sided;
      } else if (b[j] < a[i]) {
        ++j;
        ++w.one_sided;
      } else {
        const auto& c = cache[a[i]];
        w.match_sum += which == 0 ? c.drug : c.event;
        ++w.matched;
        matched.push_back(a[i]);
        ++i;
        ++j;
      }
    }
    w.one_sided += (a.size() - i) + (b.size() - j);
    w.mismatch_sum = static_cast<double>(w.one_sided) * miss;
  }

  const FrequencyTables* tables_;
  HitMissParams params_;
  PrefixWhitelist whitelist_;
  std::vector<std::vector<CachedMatch>> match_cache_;
  double mismatch_drug_ = 0.0;
  double mismatch_event_ = 0.0;
};

/// A corpus with its report profiles. The corpus must outlive this object.
class PreparedCorpus {
 public:
  PreparedCorpus(const Corpus& corpus, const Ontology& ontology, const FrequencyTables& tables,
                 const DateExtractor& extractor = {}, const DateKernel& kernel = DateKernel::triangular())
      : corpus_(&corpus), ontology_(&ontology) {
    profiles_.reserve(corpus.size());
    for (const auto& r : corpus) profiles_.push_back(make_profile(r, ontology, tables, extractor, kernel));
  }

  const Corpus& corpus() const { return *corpus_; }
  const Ontology& ontology() const { return *ontology_; }
  std::size_t size() const { return profiles_.size(); }
  const ReportProfile& operator[](std::size_t i) const { return profiles_[i]; }

  std::size_t require(std::string_view id) const {
    auto i = corpus_->index_of(id);
    if (!i) throw data_error("unknown report id '" + std::string(id) + "'");
    return *i;
  }

 private:
  const Corpus* corpus_;
  const Ontology* ontology_;
  std::vector<ReportProfile> profiles_;
};

/// Convenience form over raw reports; builds profiles on the fly.
inline FeatureVector compute_features(const Report& a, const Report& b, const Ontology& ontology,
                                      const FrequencyTables& tables, const HitMissParams& params,
                                      const PrefixWhitelist& whitelist = {}, const DateExtractor& extractor = {}) {
  const FeatureScorer scorer(tables, params, whitelist);
  const auto pa = make_profile(a, ontology, tables, extractor);
  const auto pb = make_profile(b, ontology, tables, extractor);
  return scorer.features(pa, pb);
}

}  // namespace casematch
