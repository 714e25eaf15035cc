#pragma once

// Human review of flagged pairs: the three-way annotation labels, the
// append-only annotation log, and a review session that leases queue items
// per annotator and keeps running statistics.

#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "casematch/metrics.hpp"

namespace casematch {

enum class ReviewLabel { non_duplicate, possible_duplicate, otherwise_related };

inline std::string_view to_string(ReviewLabel l) {
  switch (l) {
    case ReviewLabel::possible_duplicate: return "possible_duplicate";
    case ReviewLabel::otherwise_related: return "otherwise_related";
    default: return "non_duplicate";
  }
}

inline std::optional<ReviewLabel> parse_review_label(std::string_view s) {
  if (s == "non_duplicate") return ReviewLabel::non_duplicate;
  if (s == "possible_duplicate") return ReviewLabel::possible_duplicate;
  if (s == "otherwise_related") return ReviewLabel::otherwise_related;
  return std::nullopt;
}

/// Only possible_duplicate becomes a positive training label.
inline Label to_training_label(ReviewLabel l) {
  switch (l) {
    case ReviewLabel::possible_duplicate: return Label::duplicate;
    case ReviewLabel::otherwise_related: return Label::otherwise_related;
    default: return Label::non_duplicate;
  }
}

inline std::string utc_timestamp_now() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const auto day = std::chrono::floor<std::chrono::days>(now);
  const std::chrono::hh_mm_ss tod(now - day);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_day(day).c_str(), static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count()));
  return buf;
}

struct Annotation {
  std::string id_a;
  std::string id_b;
  ReviewLabel label = ReviewLabel::non_duplicate;
  std::string annotator;
  std::string timestamp;
  std::string note;
  std::string model_id;

  json to_json() const {
    return {{"id_a", id_a},           {"id_b", id_b},   {"label", std::string(to_string(label))},
            {"annotator", annotator}, {"timestamp", timestamp}, {"note", note},
            {"model_id", model_id}};
  }

  /// Malformed input is a usage error (HTTP 400). An empty timestamp is
  /// left for the caller to fill.
  static Annotation from_json(const json& j) {
    if (!j.is_object()) throw usage_error("annotation must be a JSON object");
    auto str = [&](const char* k, bool required) -> std::string {
      if (!j.contains(k)) {
        if (required) throw usage_error(std::string("annotation: missing field '") + k + "'");
        return {};
      }
      if (!j.at(k).is_string()) throw usage_error(std::string("annotation: field '") + k + "' must be a string");
      return j.at(k).get<std::string>();
    };
    Annotation a;
    a.id_a = str("id_a", true);
    a.id_b = str("id_b", true);
    const auto label = str("label", true);
    const auto parsed = parse_review_label(label);
    if (!parsed) throw usage_error("annotation: unknown label '" + label + "'");
    a.label = *parsed;
    a.annotator = str("annotator", true);
    if (a.annotator.empty()) throw usage_error("annotation: annotator must be non-empty");
    a.timestamp = str("timestamp", false);
    a.note = str("note", false);
    a.model_id = str("model_id", false);
    return a;
  }

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

using PairKey = std::pair<std::string, std::string>;

inline PairKey pair_key(const std::string& a, const std::string& b) { return a < b ? PairKey{a, b} : PairKey{b, a}; }

/// Append-only JSON Lines log. The effective view keeps the latest entry per
/// (pair, annotator) at the position of its first submission, so it is a
/// pure function of the log's lines.
class AnnotationLog {
 public:
  AnnotationLog() = default;

  /// Replays `path` if it exists; later appends go to the same file.
  explicit AnnotationLog(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        apply(Annotation::from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw data_error("annotation log '" + path_ + "' line " + std::to_string(n) + ": " + e.what());
      }
    }
  }

  /// Returns true when the entry replaced an earlier one.
  bool append(const Annotation& a) {
    if (!path_.empty()) {
      std::ofstream out(path_, std::ios::app);
      if (!out) throw data_error("cannot append to annotation log '" + path_ + "'");
      out << a.to_json().dump() << '\n';
      if (!out.flush()) throw data_error("write to annotation log '" + path_ + "' failed");
    }
    return apply(a);
  }

  const std::vector<Annotation>& effective() const { return entries_; }

  std::optional<Annotation> find(const std::string& a, const std::string& b, const std::string& annotator) const {
    auto it = slot_.find({pair_key(a, b), annotator});
    if (it == slot_.end()) return std::nullopt;
    return entries_[it->second];
  }

  json export_json() const {
    json out = json::array();
    for (const auto& a : entries_) out.push_back(a.to_json());
    return out;
  }

  const std::string& path() const { return path_; }

 private:
  bool apply(const Annotation& a) {
    auto [it, fresh] = slot_.try_emplace({pair_key(a.id_a, a.id_b), a.annotator}, entries_.size());
    if (fresh) {
      entries_.push_back(a);
      return false;
    }
    entries_[it->second] = a;
    return true;
  }

  std::string path_;
  std::vector<Annotation> entries_;
  std::map<std::pair<PairKey, std::string>, std::size_t> slot_;
};

/// Labels from a log as training pairs; the authoritative annotator's label
/// wins a disagreement, otherwise the first annotator's label stands.
inline std::vector<LabelledPair> annotations_to_training(const std::vector<Annotation>& log,
                                                         const std::string& authoritative = {}) {
  std::map<PairKey, std::size_t> chosen;
  std::vector<LabelledPair> out;
  for (const auto& a : log) {
    const auto key = pair_key(a.id_a, a.id_b);
    LabelledPair p{key.first, key.second, to_training_label(a.label), "annotation", a.annotator};
    auto [it, fresh] = chosen.try_emplace(key, out.size());
    if (fresh)
      out.push_back(std::move(p));
    else if (!authoritative.empty() && a.annotator == authoritative)
      out[it->second] = std::move(p);
  }
  return out;
}

enum class SubmitResult { created, replaced, unknown_pair };

/// Serves one run record's suspected pairs for review. All members are
/// safe to call from concurrent request handlers.
class ReviewSession {
 public:
  ReviewSession(RunRecord run, const Corpus& corpus, AnnotationLog log, std::string authoritative = {})
      : run_(std::move(run)), corpus_(&corpus), log_(std::move(log)), authoritative_(std::move(authoritative)) {
    for (std::size_t k = 0; k < run_.suspected.size(); ++k) {
      const auto& f = run_.suspected[k];
      if (!corpus.index_of(f.id_a) || !corpus.index_of(f.id_b))
        throw data_error("run record pair " + f.id_a + "/" + f.id_b + " is not in the corpus");
      by_pair_.emplace(pair_key(f.id_a, f.id_b), k);
    }
  }

  /// Next pair this annotator has neither been served nor labelled, in run
  /// order. Serving leases the pair to the annotator for good, so no pair is
  /// handed to the same annotator twice.
  std::optional<json> next(const std::string& annotator) {
    if (annotator.empty()) throw usage_error("annotator must be non-empty");
    std::lock_guard lock(mu_);
    auto& leased = leases_[annotator];
    for (std::size_t k = 0; k < run_.suspected.size(); ++k) {
      const auto& f = run_.suspected[k];
      const auto key = pair_key(f.id_a, f.id_b);
      if (leased.contains(key) || log_.find(f.id_a, f.id_b, annotator)) continue;
      leased.insert(key);
      return item_json(k, "pending");
    }
    return std::nullopt;
  }

  SubmitResult submit(Annotation a) {
    std::lock_guard lock(mu_);
    auto it = by_pair_.find(pair_key(a.id_a, a.id_b));
    if (it == by_pair_.end()) return SubmitResult::unknown_pair;
    if (a.timestamp.empty()) a.timestamp = utc_timestamp_now();
    if (a.model_id.empty()) a.model_id = run_.suspected[it->second].model;
    return log_.append(a) ? SubmitResult::replaced : SubmitResult::created;
  }

  std::optional<json> pair_detail(const std::string& a, const std::string& b) const {
    std::lock_guard lock(mu_);
    auto it = by_pair_.find(pair_key(a, b));
    if (it == by_pair_.end()) return std::nullopt;
    json j = item_json(it->second, status_of(it->second));
    json labels = json::array();
    for (const auto& e : log_.effective())
      if (pair_key(e.id_a, e.id_b) == it->first) labels.push_back(e.to_json());
    j["annotations"] = labels;
    return j;
  }

  json stats() const {
    std::lock_guard lock(mu_);
    const auto& entries = log_.effective();
    std::map<std::string, std::uint64_t> per_label{{"non_duplicate", 0}, {"possible_duplicate", 0},
                                                   {"otherwise_related", 0}};
    std::map<std::string, std::uint64_t> per_annotator;
    std::map<std::string, std::map<PairKey, ReviewLabel>> by_annotator;
    for (const auto& e : entries) {
      ++per_label[std::string(to_string(e.label))];
      ++per_annotator[e.annotator];
      by_annotator[e.annotator][pair_key(e.id_a, e.id_b)] = e.label;
    }

    // One consensus label per pair for the running precision.
    const auto consensus = annotations_to_training(entries, authoritative_);
    std::uint64_t dup = 0, related = 0;
    for (const auto& p : consensus) {
      dup += p.label == Label::duplicate;
      related += p.label == Label::duplicate || p.label == Label::otherwise_related;
    }
    json j = {{"run_pairs", run_.suspected.size()},
              {"labelled_pairs", consensus.size()},
              {"annotations", entries.size()},
              {"by_label", per_label},
              {"by_annotator", per_annotator},
              {"authoritative_annotator", authoritative_.empty() ? json(nullptr) : json(authoritative_)}};
    const std::uint64_t n = consensus.size();
    if (n > 0) {
      const double p = static_cast<double>(dup) / static_cast<double>(n);
      const double pr = static_cast<double>(related) / static_cast<double>(n);
      const auto ci = wald_ci(p, n);
      const auto cr = wald_ci(pr, n);
      j["precision"] = {{"value", p}, {"ci", {ci.lower, ci.upper}}, {"true_positives", dup}, {"n", n}};
      j["precision_including_related"] = {{"value", pr}, {"ci", {cr.lower, cr.upper}}, {"positives", related}, {"n", n}};
    } else {
      j["precision"] = nullptr;
      j["precision_including_related"] = nullptr;
    }

    // Kappa for every annotator pair sharing at least one labelled pair;
    // the headline value is the pair with the largest overlap.
    json kappas = json::array();
    json best = nullptr;
    std::size_t best_overlap = 0;
    for (auto x = by_annotator.begin(); x != by_annotator.end(); ++x) {
      for (auto y = std::next(x); y != by_annotator.end(); ++y) {
        std::vector<std::string> la, lb;
        for (const auto& [key, label] : x->second) {
          auto it = y->second.find(key);
          if (it == y->second.end()) continue;
          la.emplace_back(to_string(label));
          lb.emplace_back(to_string(it->second));
        }
        if (la.empty()) continue;
        json k = {{"annotators", {x->first, y->first}}, {"overlap", la.size()}};
        try {
          k["kappa"] = cohen_kappa(la, lb);
        } catch (const Error&) {
          k["kappa"] = nullptr;  // both annotators used one identical label throughout
        }
        if (la.size() > best_overlap) {
          best_overlap = la.size();
          best = k["kappa"];
        }
        kappas.push_back(std::move(k));
      }
    }
    j["kappa"] = best;
    j["kappa_pairs"] = kappas;
    return j;
  }

  json export_json() const {
    std::lock_guard lock(mu_);
    return log_.export_json();
  }

  std::vector<Annotation> annotations() const {
    std::lock_guard lock(mu_);
    return log_.effective();
  }

  const RunRecord& run() const { return run_; }

 private:
  std::string status_of(std::size_t k) const {
    const auto key = pair_key(run_.suspected[k].id_a, run_.suspected[k].id_b);
    for (const auto& e : log_.effective())
      if (pair_key(e.id_a, e.id_b) == key) return "labelled";
    return "pending";
  }

  json item_json(std::size_t k, const std::string& status) const {
    const auto& f = run_.suspected[k];
    return {{"id_a", f.id_a},
            {"id_b", f.id_b},
            {"ordinal", f.ordinal},
            {"model_id", f.model},
            {"score", f.score},
            {"report_a", report_to_json(corpus_->at(f.id_a))},
            {"report_b", report_to_json(corpus_->at(f.id_b))},
            {"explanation", f.explanation},
            {"status", status}};
  }

  RunRecord run_;
  const Corpus* corpus_;
  AnnotationLog log_;
  std::string authoritative_;
  std::map<PairKey, std::size_t> by_pair_;
  std::map<std::string, std::set<PairKey>> leases_;
  mutable std::mutex mu_;
};

}  // namespace casematch
