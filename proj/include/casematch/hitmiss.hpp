#pragma once

// Hit-miss log-likelihood-ratio weights.
//
// Generative model: each report records the true value with probability
// 1 - alpha ("hit"), otherwise an independent draw from the field's
// population distribution ("miss"). Weights compare "same case" against
// "independent cases". Missing values on either side contribute 0.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "casematch/frequency.hpp"

namespace casematch {

/// ln((1-a)^2 / f + a(2-a)); equal to
/// ln([(1-a)^2 f + 2a(1-a) f^2 + a^2 f^2] / f^2).
inline double categorical_match_weight(double f, double alpha) {
  const double hit = 1.0 - alpha;
  return std::log(hit * hit / f + alpha * (2.0 - alpha));
}

/// Identical for every pair of distinct values.
inline double categorical_mismatch_weight(double alpha) { return std::log(alpha * (2.0 - alpha)); }

/// Item listed on both reports; binary indicator with population rate f.
/// ln([f (1-a+af)^2 + (1-f)(af)^2] / f^2).
inline double bernoulli_match_weight(double f, double alpha) {
  const double p1 = 1.0 - alpha + alpha * f;
  return std::log(p1 * p1 / f + (1.0 - f) * alpha * alpha);
}

/// Item listed on exactly one report. The generative expression
/// [f(1-a+af) a(1-f) + (1-f) af (1-af)] / (f(1-f)) reduces to a(2-a), so
/// the penalty does not depend on the item's rate.
inline double bernoulli_mismatch_weight(double /*f*/, double alpha) {
  return std::log(alpha * (2.0 - alpha));
}

inline double categorical_weight(std::optional<std::string_view> a, std::optional<std::string_view> b,
                                 const CategoricalFrequency& freq, double alpha) {
  if (!a || !b) return 0.0;
  if (*a == *b) return categorical_match_weight(freq.frequency(*a), alpha);
  freq.frequency(*a);
  freq.frequency(*b);
  return categorical_mismatch_weight(alpha);
}

/// Independence distribution of the gap (in days) between two random
/// reports' intervals. Bin 0 holds gap 0; bin k >= 1 covers
/// [2^(k-1), 2^k). Probabilities are per day and never zero.
class DeltaHistogram {
 public:
  static constexpr std::size_t kBins = 18;  // last bin reaches 2^17 days

  DeltaHistogram() : counts_(kBins, 0.0) { normalise(); }

  static DeltaHistogram fit(std::span<const std::int64_t> deltas, double pseudo_count = 0.5) {
    DeltaHistogram h;
    h.pseudo_ = pseudo_count;
    for (auto d : deltas) h.counts_[bin_of(d)] += 1.0;
    h.normalise();
    return h;
  }

  static std::size_t bin_of(std::int64_t delta) {
    if (delta <= 0) return 0;
    std::size_t k = 1;
    while (k + 1 < kBins && delta >= (std::int64_t{1} << k)) ++k;
    return k;
  }

  static std::int64_t bin_width(std::size_t k) {
    return k == 0 ? 1 : (std::int64_t{1} << (k - 1));
  }

  double probability(std::int64_t delta) const { return per_day_[bin_of(delta)]; }

  const std::vector<double>& counts() const { return counts_; }

  json to_json() const { return {{"counts", counts_}, {"pseudo_count", pseudo_}}; }

  static DeltaHistogram from_json(const json& j) {
    DeltaHistogram h;
    h.counts_ = j.at("counts").get<std::vector<double>>();
    h.pseudo_ = j.at("pseudo_count").get<double>();
    if (h.counts_.size() != kBins) throw data_error("delta histogram: wrong bin count");
    h.normalise();
    return h;
  }

 private:
  void normalise() {
    double total = 0;
    for (double c : counts_) total += c + pseudo_;
    per_day_.resize(kBins);
    for (std::size_t k = 0; k < kBins; ++k)
      per_day_[k] = (counts_[k] + pseudo_) / total / static_cast<double>(bin_width(k));
  }

  std::vector<double> counts_;
  std::vector<double> per_day_;
  double pseudo_ = 0.5;
};

struct MixtureParams {
  double pi_hit = 0.7;
  double pi_near = 0.2;
  double near_scale = 3.0;  // mean of the near-miss geometric, days

  void validate() const {
    if (pi_hit < 0 || pi_near < 0 || pi_hit + pi_near > 1.0 || near_scale <= 0)
      throw usage_error("invalid mixture parameters");
  }
  json to_json() const { return {{"pi_hit", pi_hit}, {"pi_near", pi_near}, {"near_scale", near_scale}}; }
  static MixtureParams from_json(const json& j) {
    MixtureParams m{j.at("pi_hit").get<double>(), j.at("pi_near").get<double>(),
                    j.at("near_scale").get<double>()};
    m.validate();
    return m;
  }
};

/// P(gap = delta) under a geometric on {1, 2, ...} with the given mean.
inline double geometric_near(std::int64_t delta, double mean) {
  if (delta < 1) return 0.0;
  const double p = std::min(1.0, 1.0 / mean);
  return p * std::pow(1.0 - p, static_cast<double>(delta - 1));
}

inline double mixture_dup_probability(std::int64_t delta, const MixtureParams& m, double p_ind) {
  const double hit = delta == 0 ? m.pi_hit : 0.0;
  const double near = delta > 0 ? m.pi_near * geometric_near(delta, m.near_scale) : 0.0;
  return hit + near + (1.0 - m.pi_hit - m.pi_near) * p_ind;
}

inline double mixture_weight_for_delta(std::int64_t delta, const MixtureParams& m, double p_ind) {
  return std::log(mixture_dup_probability(delta, m, p_ind) / p_ind);
}

inline double numeric_mixture_weight(const std::optional<DayInterval>& a, const std::optional<DayInterval>& b,
                                     const MixtureParams& m, const DeltaHistogram& independence) {
  if (!a || !b) return 0.0;
  if (!a->valid() || !b->valid()) throw data_error("invalid interval: lower bound exceeds upper bound");
  const auto delta = interval_gap(*a, *b);
  return mixture_weight_for_delta(delta, m, independence.probability(delta));
}

struct HitMissParams {
  double alpha_sex = 0.05;
  double alpha_country = 0.02;
  double alpha_outcome = 0.3;
  double alpha_drugs = 0.1;
  double alpha_events = 0.2;
  MixtureParams age{0.7, 0.2, 365.0};
  MixtureParams onset{0.7, 0.2, 3.0};
  DeltaHistogram age_independence;
  DeltaHistogram onset_independence;

  void validate() const {
    for (double a : {alpha_sex, alpha_country, alpha_outcome, alpha_drugs, alpha_events})
      if (!(a > 0.0 && a < 1.0)) throw usage_error("hit-miss alpha must lie in (0, 1)");
    age.validate();
    onset.validate();
  }

  json to_json() const {
    return {{"alpha_sex", alpha_sex},       {"alpha_country", alpha_country},
            {"alpha_outcome", alpha_outcome}, {"alpha_drugs", alpha_drugs},
            {"alpha_events", alpha_events},   {"age", age.to_json()},
            {"onset", onset.to_json()},       {"age_independence", age_independence.to_json()},
            {"onset_independence", onset_independence.to_json()}};
  }

  static HitMissParams from_json(const json& j) {
    HitMissParams p;
    p.alpha_sex = j.at("alpha_sex").get<double>();
    p.alpha_country = j.at("alpha_country").get<double>();
    p.alpha_outcome = j.at("alpha_outcome").get<double>();
    p.alpha_drugs = j.at("alpha_drugs").get<double>();
    p.alpha_events = j.at("alpha_events").get<double>();
    p.age = MixtureParams::from_json(j.at("age"));
    p.onset = MixtureParams::from_json(j.at("onset"));
    p.age_independence = DeltaHistogram::from_json(j.at("age_independence"));
    p.onset_independence = DeltaHistogram::from_json(j.at("onset_independence"));
    p.validate();
    return p;
  }
};

/// Fits the age and onset independence histograms from seeded random
/// report pairs of the corpus. Pairs with a missing value are skipped.
inline void fit_independence_histograms(HitMissParams& params, const Corpus& corpus, std::uint64_t seed,
                                        std::size_t n_pairs = 200000) {
  std::vector<std::int64_t> age, onset;
  if (corpus.size() >= 2) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> first(0, corpus.size() - 1), second(0, corpus.size() - 2);
    for (std::size_t k = 0; k < n_pairs; ++k) {
      const std::size_t i = first(rng);
      std::size_t j = second(rng);
      if (j >= i) ++j;
      const Report& a = corpus[i];
      const Report& b = corpus[j];
      if (a.age && b.age) age.push_back(interval_gap(a.age->as_day_interval(), b.age->as_day_interval()));
      if (a.earliest_onset && b.earliest_onset)
        onset.push_back(interval_gap(a.earliest_onset->as_day_interval(), b.earliest_onset->as_day_interval()));
    }
  }
  params.age_independence = DeltaHistogram::fit(age);
  params.onset_independence = DeltaHistogram::fit(onset);
}

struct VectorWeights {
  double match_sum = 0.0;
  double mismatch_sum = 0.0;
  std::size_t matched = 0;
  std::size_t one_sided = 0;

  double total() const { return match_sum + mismatch_sum; }
};

/// Both spans sorted ascending. Items absent from both reports contribute 0.
inline VectorWeights binary_vector_weight(std::span<const ItemId> a, std::span<const ItemId> b,
                                          const FrequencyTables& tables, double alpha, CountrySlot slot,
                                          std::vector<ItemId>* matched_out = nullptr) {
  VectorWeights w;
  const double miss = bernoulli_mismatch_weight(0.0, alpha);
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i] < b[j])) {
      tables.check_item(a[i]);
      w.mismatch_sum += miss;
      ++w.one_sided;
      ++i;
    } else if (i == a.size() || b[j] < a[i]) {
      tables.check_item(b[j]);
      w.mismatch_sum += miss;
      ++w.one_sided;
      ++j;
    } else {
      tables.check_item(a[i]);
      w.match_sum += bernoulli_match_weight(tables.rate(a[i], slot), alpha);
      ++w.matched;
      if (matched_out) matched_out->push_back(a[i]);
      ++i;
      ++j;
    }
  }
  return w;
}

/// Sum over unordered pairs of matched items of max(0, ln(f_ij / (f_i f_j))).
/// Only positively correlated pairs are compensated.
inline double correlation_compensation_raw(std::span<const ItemId> matched, const FrequencyTables& tables,
                                           CountrySlot slot) {
  double total = 0.0;
  for (std::size_t x = 0; x < matched.size(); ++x) {
    const double fi = tables.rate(matched[x], slot);
    for (std::size_t y = x + 1; y < matched.size(); ++y) {
      const double pmi = std::log(tables.pair_rate(matched[x], matched[y], slot) / (fi * tables.rate(matched[y], slot)));
      if (pmi > 0.0) total += pmi;
    }
  }
  return total;
}

enum class CompensationMode { capped, uncapped };

struct DrugEventBreakdown {
  VectorWeights drugs;
  VectorWeights events;
  double compensation_raw = 0.0;
  double compensation = 0.0;  // amount actually subtracted

  double match_sum() const { return drugs.match_sum + events.match_sum; }
  double mismatch_sum() const { return drugs.mismatch_sum + events.mismatch_sum; }
  double value() const { return match_sum() + mismatch_sum() - compensation; }
};

/// Aggregated drug/event feature. In capped mode the compensation never
/// exceeds the combined match reward, so the matched portion stays >= 0.
inline DrugEventBreakdown drug_event_feature(std::span<const ItemId> drugs_a, std::span<const ItemId> drugs_b,
                                             std::span<const ItemId> events_a, std::span<const ItemId> events_b,
                                             const FrequencyTables& tables, const HitMissParams& params,
                                             CountrySlot slot, CompensationMode mode = CompensationMode::capped) {
  DrugEventBreakdown out;
  std::vector<ItemId> matched;
  out.drugs = binary_vector_weight(drugs_a, drugs_b, tables, params.alpha_drugs, slot, &matched);
  out.events = binary_vector_weight(events_a, events_b, tables, params.alpha_events, slot, &matched);
  out.compensation_raw = correlation_compensation_raw(matched, tables, slot);
  out.compensation = mode == CompensationMode::capped ? std::min(out.compensation_raw, out.match_sum())
                                                      : out.compensation_raw;
  return out;
}

}  // namespace casematch
