#pragma once

// Pair evaluation pipeline (blocking -> features -> gate -> decision) and
// the exhaustive and index-driven corpus scans built on it.

#include <algorithm>
#include <atomic>
#include <exception>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <unordered_map>
#include <vector>

#include "casematch/svm.hpp"

namespace casematch {

struct StageCounters {
  std::uint64_t pairs = 0;
  std::uint64_t blocked_out = 0;
  std::uint64_t features_computed = 0;
  std::uint64_t gated_out = 0;
  std::uint64_t classified = 0;
  std::uint64_t suspected = 0;

  StageCounters& operator+=(const StageCounters& o) {
    pairs += o.pairs;
    blocked_out += o.blocked_out;
    features_computed += o.features_computed;
    gated_out += o.gated_out;
    classified += o.classified;
    suspected += o.suspected;
    return *this;
  }

  json to_json() const {
    return {{"pairs", pairs},         {"blocked_out", blocked_out}, {"features_computed", features_computed},
            {"gated_out", gated_out}, {"classified", classified},   {"suspected", suspected}};
  }

  friend bool operator==(const StageCounters&, const StageCounters&) = default;
};

/// Which verdicts a scan hands to its sink. Counters always cover every pair.
enum class Emit { all, unblocked, suspected };

struct ScanOptions {
  Emit emit = Emit::all;
  unsigned threads = 1;
  std::size_t rows_per_chunk = 64;
};

inline json verdict_to_json(const PairVerdict& v) {
  json j{{"id_a", v.id_a}, {"id_b", v.id_b}, {"stage", std::string(to_string(v.stage))},
         {"suspected", v.suspected}, {"model", std::string(to_string(v.model)) + "-model"}};
  if (v.stage == Stage::blocked_out) return j;
  json c = json::object();
  for (std::size_t k = 0; k < kFeatureCount; ++k) c[feature_names()[k]] = v.contributions[k];
  j["score"] = v.score;
  j["contributions"] = c;
  j["intercept"] = v.intercept;
  j["threshold"] = v.threshold;
  j["gate"] = {{"net", v.gate.net}, {"passed", v.gate.passed}};
  return j;
}

struct EngineOptions {
  bool mask_external = false;  // force x_ext = 0 (masked-feature recall)
  PrefixWhitelist whitelist;
};

class Engine {
 public:
  using Options = EngineOptions;

  /// The vaccine model may be null when the corpus is known to hold no
  /// vaccine pairs; meeting one is then a usage error.
  Engine(const PreparedCorpus& prepared, const FrequencyTables& tables, const ClassifierModel& drug,
         const ClassifierModel* vaccine = nullptr, Options options = {})
      : prepared_(&prepared),
        drug_(drug),
        vaccine_(vaccine ? std::optional<ClassifierModel>(*vaccine) : std::nullopt),
        options_(std::move(options)),
        drug_scorer_(tables, drug.hitmiss, options_.whitelist) {
    drug_.validate();
    if (drug_.kind != ModelKind::drug) throw usage_error("engine: drug slot given a " + drug_.id());
    if (vaccine_) {
      vaccine_->validate();
      if (vaccine_->kind != ModelKind::vaccine) throw usage_error("engine: vaccine slot given a " + vaccine_->id());
      vaccine_scorer_.emplace(tables, vaccine_->hitmiss, options_.whitelist);
    }
  }

  const PreparedCorpus& prepared() const { return *prepared_; }
  std::size_t size() const { return prepared_->size(); }
  const ClassifierModel& drug_model() const { return drug_; }
  const ClassifierModel* vaccine_model() const { return vaccine_ ? &*vaccine_ : nullptr; }

  /// Full pipeline for one pair; id_a is the lexicographically smaller id.
  PairVerdict evaluate(std::size_t i, std::size_t j, StageCounters* counters = nullptr) const {
    const ReportProfile* a = &(*prepared_)[i];
    const ReportProfile* b = &(*prepared_)[j];
    if (b->report->id < a->report->id) std::swap(a, b);
    StageCounters local;
    StageCounters& c = counters ? *counters : local;
    ++c.pairs;
    if (!blocking_pass(*a, *b)) {
      ++c.blocked_out;
      PairVerdict v;
      v.id_a = a->report->id;
      v.id_b = b->report->id;
      v.stage = Stage::blocked_out;
      v.model = model_kind_for(classify_pair_kind(*a->report, *b->report));
      return v;
    }
    ++c.features_computed;
    auto v = score_unblocked(*a, *b);
    if (v.stage == Stage::gated_out) ++c.gated_out;
    else ++c.classified;
    if (v.suspected) ++c.suspected;
    return v;
  }

  FeatureVector features(std::size_t i, std::size_t j) const {
    const auto& a = (*prepared_)[i];
    const auto& b = (*prepared_)[j];
    return features_for(a, b, kind_of(a, b));
  }

  /// Every unordered pair of `subset` (indices into the corpus), in sorted
  /// id order. Sink receives `const PairVerdict&`.
  template <class Sink>
  StageCounters scan_exhaustive(std::span<const std::size_t> subset, Sink&& sink, const ScanOptions& opt = {}) const {
    const auto rows = sorted_by_id(subset);
    return run_rows(rows.size(), opt, std::forward<Sink>(sink), [&](std::size_t r, auto&& visit) {
      for (std::size_t s = r + 1; s < rows.size(); ++s) visit(rows[r], rows[s]);
    });
  }

  template <class Sink>
  StageCounters scan_exhaustive(Sink&& sink, const ScanOptions& opt = {}) const {
    const auto all = all_indices();
    return scan_exhaustive(all, std::forward<Sink>(sink), opt);
  }

  /// Only blocking-passing pairs, enumerated through an inverted index on
  /// (substance, SOC). Same relative order as scan_exhaustive.
  template <class Sink>
  StageCounters scan_candidates(std::span<const std::size_t> subset, Sink&& sink, const ScanOptions& opt = {}) const {
    const auto rows = sorted_by_id(subset);
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> postings;
    std::vector<std::vector<std::uint64_t>> keys(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& p = (*prepared_)[rows[r]];
      for (auto s : p.substances)
        for (auto c : p.socs) {
          const std::uint64_t key = (static_cast<std::uint64_t>(s) << 32) | c;
          keys[r].push_back(key);
          postings[key].push_back(static_cast<std::uint32_t>(r));
        }
    }
    return run_rows(rows.size(), opt, std::forward<Sink>(sink), [&](std::size_t r, auto&& visit) {
      thread_local std::vector<std::uint32_t> cands;
      thread_local std::vector<std::uint32_t> mark;
      thread_local std::uint32_t stamp = 0;
      if (mark.size() < rows.size()) mark.assign(rows.size(), 0);
      if (++stamp == 0) {
        std::fill(mark.begin(), mark.end(), 0);
        stamp = 1;
      }
      cands.clear();
      for (auto key : keys[r])
        for (auto s : postings.at(key))
          if (s > r && mark[s] != stamp) {
            mark[s] = stamp;
            cands.push_back(s);
          }
      std::sort(cands.begin(), cands.end());
      for (auto s : cands) visit(rows[r], rows[s]);
    });
  }

  template <class Sink>
  StageCounters scan_candidates(Sink&& sink, const ScanOptions& opt = {}) const {
    const auto all = all_indices();
    return scan_candidates(all, std::forward<Sink>(sink), opt);
  }

  std::vector<std::size_t> all_indices() const {
    std::vector<std::size_t> all(size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }

 private:
  ModelKind kind_of(const ReportProfile& a, const ReportProfile& b) const {
    return model_kind_for(classify_pair_kind(*a.report, *b.report));
  }

  const ClassifierModel& model_for(ModelKind k) const {
    if (k == ModelKind::drug) return drug_;
    if (!vaccine_) throw usage_error("engine: vaccine pair met but no vaccine model is loaded");
    return *vaccine_;
  }

  FeatureVector features_for(const ReportProfile& a, const ReportProfile& b, ModelKind k) const {
    const FeatureScorer& scorer = k == ModelKind::vaccine && vaccine_scorer_ ? *vaccine_scorer_ : drug_scorer_;
    auto fv = scorer.features(a, b);
    if (options_.mask_external) fv[Feature::ext] = 0.0;
    return fv;
  }

  PairVerdict score_unblocked(const ReportProfile& a, const ReportProfile& b) const {
    const ModelKind k = kind_of(a, b);
    const ClassifierModel& m = model_for(k);
    const auto fv = features_for(a, b, k);
    auto v = decide(m, fv, model_gate(m, fv));
    v.id_a = a.report->id;
    v.id_b = b.report->id;
    return v;
  }

  std::vector<std::size_t> sorted_by_id(std::span<const std::size_t> subset) const {
    std::vector<std::size_t> rows(subset.begin(), subset.end());
    for (auto i : rows)
      if (i >= size()) throw usage_error("scan: report index out of range");
    std::sort(rows.begin(), rows.end(), [&](std::size_t x, std::size_t y) {
      return (*prepared_)[x].report->id < (*prepared_)[y].report->id;
    });
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    return rows;
  }

  static bool wanted(Emit e, const PairVerdict& v) {
    switch (e) {
      case Emit::all: return true;
      case Emit::unblocked: return v.stage != Stage::blocked_out;
      default: return v.suspected;
    }
  }

  /// Runs `pairs_of_row(r, visit)` for every row. Rows are grouped into
  /// chunks; chunks run in parallel waves and emit in chunk order, so output
  /// order does not depend on the thread count.
  template <class Sink, class RowPairs>
  StageCounters run_rows(std::size_t n_rows, const ScanOptions& opt, Sink&& sink, RowPairs&& pairs_of_row) const {
    StageCounters total;
    const unsigned threads = std::max(1u, opt.threads);
    if (threads == 1) {
      for (std::size_t r = 0; r < n_rows; ++r)
        pairs_of_row(r, [&](std::size_t i, std::size_t j) {
          const auto v = evaluate(i, j, &total);
          if (wanted(opt.emit, v)) sink(v);
        });
      return total;
    }
    const std::size_t chunk_rows = std::max<std::size_t>(1, opt.rows_per_chunk);
    const std::size_t n_chunks = (n_rows + chunk_rows - 1) / chunk_rows;
    const std::size_t wave = static_cast<std::size_t>(threads) * 4;
    for (std::size_t first = 0; first < n_chunks; first += wave) {
      const std::size_t last = std::min(n_chunks, first + wave);
      std::vector<std::vector<PairVerdict>> out(last - first);
      std::vector<StageCounters> counts(last - first);
      std::atomic<std::size_t> next{first};
      std::vector<std::exception_ptr> errors(threads);
      auto work = [&](unsigned t) {
        try {
          for (std::size_t c; (c = next.fetch_add(1)) < last;) {
            const std::size_t r_end = std::min(n_rows, (c + 1) * chunk_rows);
            for (std::size_t r = c * chunk_rows; r < r_end; ++r)
              pairs_of_row(r, [&](std::size_t i, std::size_t j) {
                auto v = evaluate(i, j, &counts[c - first]);
                if (wanted(opt.emit, v)) out[c - first].push_back(v);
              });
          }
        } catch (...) {
          errors[t] = std::current_exception();
          next.store(last);
        }
      };
      std::vector<std::jthread> pool;
      for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work, t);
      work(0);
      pool.clear();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      for (std::size_t c = 0; c < out.size(); ++c) {
        total += counts[c];
        for (const auto& v : out[c]) sink(v);
      }
    }
    return total;
  }

  const PreparedCorpus* prepared_;
  ClassifierModel drug_;
  std::optional<ClassifierModel> vaccine_;
  Options options_;
  FeatureScorer drug_scorer_;
  std::optional<FeatureScorer> vaccine_scorer_;
};

}  // namespace casematch
