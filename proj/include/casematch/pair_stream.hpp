#pragma once

// Seeded random pair stream and the stop-at-k precision run that consumes it.
//
// The stream is split into fixed-size batches. Batch k draws from its own
// generator seeded by (seed, k), so any batch can be regenerated on its own
// and two consumers with the same seed see the same pairs.

#include <atomic>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "casematch/engine.hpp"

namespace casematch {

class RandomPairStream {
 public:
  class Batch {
   public:
    Batch(std::size_t n, std::uint64_t seed, std::uint64_t index, std::uint64_t size)
        : index_(index), remaining_(size), first_(0, n - 1), second_(0, n - 2) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
      rng_.seed(seq);
    }

    std::uint64_t index() const { return index_; }
    std::uint64_t remaining() const { return remaining_; }

    /// Uniform over unordered distinct pairs; returned as (smaller, larger).
    std::optional<std::pair<std::size_t, std::size_t>> next() {
      if (remaining_ == 0) return std::nullopt;
      --remaining_;
      const std::size_t i = first_(rng_);
      std::size_t j = second_(rng_);
      if (j >= i) ++j;
      return std::minmax(i, j);
    }

   private:
    std::uint64_t index_;
    std::uint64_t remaining_;
    std::mt19937_64 rng_;
    std::uniform_int_distribution<std::size_t> first_, second_;
  };

  RandomPairStream(std::size_t n_reports, std::uint64_t seed, std::uint64_t batch_size = 100'000'000)
      : n_(n_reports), seed_(seed), batch_size_(batch_size) {
    if (n_reports < 2) throw usage_error("random pair stream needs at least 2 reports");
    if (batch_size == 0) throw usage_error("batch size must be positive");
  }

  std::size_t n_reports() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t batch_size() const { return batch_size_; }

  Batch batch(std::uint64_t k) const { return Batch(n_, seed_, k, batch_size_); }

  /// Claims the next unconsumed batch; safe to call from several workers.
  Batch claim_batch() {
    const auto k = next_batch_.fetch_add(1);
    consumed_.fetch_add(batch_size_);
    return batch(k);
  }

  /// Sequential single-consumer access.
  std::pair<std::size_t, std::size_t> next() {
    if (!current_ || current_->remaining() == 0) current_.emplace(batch(next_batch_.fetch_add(1)));
    consumed_.fetch_add(1);
    return *current_->next();
  }

  std::uint64_t consumed() const { return consumed_.load(); }
  std::uint64_t batches_started() const { return next_batch_.load(); }

  /// Restarts sequential consumption after `pairs` already consumed.
  void resume(std::uint64_t pairs) {
    next_batch_.store(pairs / batch_size_);
    consumed_.store(next_batch_.load() * batch_size_);
    current_.reset();
    for (std::uint64_t k = pairs % batch_size_; k > 0; --k) next();
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t batch_size_;
  std::atomic<std::uint64_t> next_batch_{0};
  std::atomic<std::uint64_t> consumed_{0};
  std::optional<Batch> current_;
};

struct FlaggedPair {
  std::string id_a;
  std::string id_b;
  std::uint64_t ordinal = 0;  // 0-based position in the stream
  double score = 0.0;
  std::string model;
  json explanation = json::object();

  json to_json() const {
    return {{"id_a", id_a},   {"id_b", id_b},   {"ordinal", ordinal},
            {"score", score}, {"model", model}, {"explanation", explanation}};
  }

  static FlaggedPair from_json(const json& j) {
    return {j.at("id_a").get<std::string>(), j.at("id_b").get<std::string>(), j.at("ordinal").get<std::uint64_t>(),
            j.at("score").get<double>(),     j.at("model").get<std::string>(), j.value("explanation", json::object())};
  }

  friend bool operator==(const FlaggedPair&, const FlaggedPair&) = default;
};

struct BatchLogEntry {
  std::uint64_t batch = 0;
  std::uint64_t pairs = 0;
  std::uint64_t suspected = 0;

  friend bool operator==(const BatchLogEntry&, const BatchLogEntry&) = default;
};

struct RunRecord {
  std::string model_id;
  std::uint64_t seed = 0;
  std::uint64_t batch_size = 0;
  std::uint64_t stop_at = 0;
  std::uint64_t n_reports = 0;
  std::uint64_t pairs_consumed = 0;
  bool complete = false;
  std::vector<FlaggedPair> suspected;
  std::vector<BatchLogEntry> batches;

  json to_json() const {
    json s = json::array();
    for (const auto& p : suspected) s.push_back(p.to_json());
    json b = json::array();
    for (const auto& e : batches) b.push_back({{"batch", e.batch}, {"pairs", e.pairs}, {"suspected", e.suspected}});
    return {{"model_id", model_id},
            {"seed", seed},
            {"batch_size", batch_size},
            {"stop_at", stop_at},
            {"n_reports", n_reports},
            {"pairs_consumed", pairs_consumed},
            {"batch_count", batches.size()},
            {"complete", complete},
            {"batches", b},
            {"suspected", s}};
  }

  static RunRecord from_json(const json& j) {
    RunRecord r;
    r.model_id = j.at("model_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.batch_size = j.at("batch_size").get<std::uint64_t>();
    r.stop_at = j.at("stop_at").get<std::uint64_t>();
    r.n_reports = j.at("n_reports").get<std::uint64_t>();
    r.pairs_consumed = j.at("pairs_consumed").get<std::uint64_t>();
    r.complete = j.at("complete").get<bool>();
    for (const auto& b : j.value("batches", json::array()))
      r.batches.push_back({b.at("batch").get<std::uint64_t>(), b.at("pairs").get<std::uint64_t>(),
                           b.at("suspected").get<std::uint64_t>()});
    for (const auto& p : j.at("suspected")) r.suspected.push_back(FlaggedPair::from_json(p));
    return r;
  }

  static RunRecord load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open run record '" + path + "'");
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw data_error("run record '" + path + "': " + e.what());
    }
  }
};

/// Consumes the stream until `stop_at` pairs are flagged or `max_pairs`
/// pairs are drawn (the latter leaves the record incomplete).
/// `classify(i, j)` returns a FlaggedPair (ids, score, model, explanation)
/// for a suspected duplicate and nullopt otherwise.
template <class Classify>
RunRecord precision_run(RandomPairStream& stream, std::string model_id, Classify&& classify, std::uint64_t stop_at,
                        std::uint64_t max_pairs = std::numeric_limits<std::uint64_t>::max()) {
  if (stop_at < 1) throw usage_error("stop_at must be at least 1");
  RunRecord rec;
  rec.model_id = std::move(model_id);
  rec.seed = stream.seed();
  rec.batch_size = stream.batch_size();
  rec.stop_at = stop_at;
  rec.n_reports = stream.n_reports();
  const std::uint64_t start = stream.consumed();
  while (rec.suspected.size() < stop_at && stream.consumed() - start < max_pairs) {
    const std::uint64_t ordinal = stream.consumed();
    const std::uint64_t batch = ordinal / stream.batch_size();
    const auto [i, j] = stream.next();
    if (rec.batches.empty() || rec.batches.back().batch != batch) rec.batches.push_back({batch, 0, 0});
    ++rec.batches.back().pairs;
    if (auto flagged = classify(i, j)) {
      flagged->ordinal = ordinal;
      rec.suspected.push_back(std::move(*flagged));
      ++rec.batches.back().suspected;
    }
  }
  rec.pairs_consumed = stream.consumed() - start;
  rec.complete = rec.suspected.size() >= stop_at;
  return rec;
}

/// Adapter for precision_run over an Engine.
inline auto engine_classifier(const Engine& engine) {
  return [&engine](std::size_t i, std::size_t j) -> std::optional<FlaggedPair> {
    const auto v = engine.evaluate(i, j);
    if (!v.suspected) return std::nullopt;
    const auto& p = engine.prepared();
    const auto& a = p[p.require(v.id_a)];
    const auto& b = p[p.require(v.id_b)];
    std::size_t shared_substances = 0, shared_socs = 0;
    for (auto s : a.substances) shared_substances += std::binary_search(b.substances.begin(), b.substances.end(), s);
    for (auto s : a.socs) shared_socs += std::binary_search(b.socs.begin(), b.socs.end(), s);
    FlaggedPair f;
    f.id_a = std::string(v.id_a);
    f.id_b = std::string(v.id_b);
    f.score = v.score;
    f.model = std::string(to_string(v.model)) + "-model";
    f.explanation = explain(v, shared_substances, shared_socs).to_json();
    return f;
  };
}

}  // namespace casematch
