#pragma once

// Fits one classifier model (drug or vaccine pairs) from labelled pairs plus
// seeded random negatives.
//
// A negative:positive ratio far beyond what can be materialised is realised
// as explicit samples (up to a cap per positive) plus a cost multiplier on
// the negative class: w_neg = ratio * P / N_neg.

#include <algorithm>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "casematch/svm.hpp"

namespace casematch {

enum class Label { duplicate, otherwise_related, non_duplicate };

inline std::string_view to_string(Label l) {
  switch (l) {
    case Label::duplicate: return "duplicate";
    case Label::otherwise_related: return "otherwise_related";
    default: return "non_duplicate";
  }
}

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "duplicate") return Label::duplicate;
  if (s == "otherwise_related") return Label::otherwise_related;
  if (s == "non_duplicate") return Label::non_duplicate;
  return std::nullopt;
}

struct LabelledPair {
  std::string id_a;
  std::string id_b;
  Label label = Label::non_duplicate;
  std::string source;
  std::string annotator;
};

inline int svm_label(Label l) { return l == Label::duplicate ? 1 : -1; }

struct TrainOptions {
  double C = 1.0;
  double negative_ratio = 1e6;
  std::size_t negatives_per_positive_cap = 1000;
  std::uint64_t seed = 1;
  SolverOptions solver;
  HitMissParams hitmiss;
  bool fit_histograms = true;
  std::size_t histogram_pairs = 200000;
  std::size_t draws_per_sample = 500;  // sampling budget per requested negative

  json to_json() const {
    return {{"C", C},
            {"negative_ratio", negative_ratio},
            {"negatives_per_positive_cap", negatives_per_positive_cap},
            {"seed", seed},
            {"solver_tolerance", solver.tolerance},
            {"solver_max_epochs", solver.max_epochs},
            {"bias_scale", solver.bias_scale},
            {"fit_histograms", fit_histograms},
            {"histogram_pairs", histogram_pairs}};
  }
};

/// The reference ratio rescaled to a corpus of `n_reports`. With duplicates
/// per report held fixed, duplicate prevalence among random pairs falls as
/// 1/N, so keeping ratio x prevalence constant scales the ratio with N.
inline double scaled_negative_ratio(std::size_t n_reports, double reference_ratio = 1e6,
                                    double reference_reports = 26.9e6) {
  if (!(reference_ratio > 0 && reference_reports > 0)) throw usage_error("scaled ratio: references must be positive");
  return std::max(1.0, reference_ratio * static_cast<double>(n_reports) / reference_reports);
}

namespace detail {

inline std::uint64_t unordered_key(std::size_t i, std::size_t j) {
  return pair_key(static_cast<ItemId>(std::min(i, j)), static_cast<ItemId>(std::max(i, j)));
}

}  // namespace detail

/// Blocking-passing pairs of the given kind, excluding `exclude`. Drug-pair
/// draws take both reports from the non-vaccine pool; vaccine-pair draws take
/// the first report from the vaccine pool and the second from the whole
/// corpus. Returns fewer than `count` when the draw budget runs out.
inline std::vector<std::pair<std::size_t, std::size_t>> sample_negative_pairs(
    const PreparedCorpus& prepared, ModelKind kind, std::size_t count, std::uint64_t seed,
    const std::set<std::uint64_t>& exclude, std::size_t draws_per_sample = 500) {
  std::vector<std::size_t> vaccine, other;
  for (std::size_t i = 0; i < prepared.size(); ++i)
    (prepared[i].report->is_vaccine_report ? vaccine : other).push_back(i);
  const auto& first_pool = kind == ModelKind::vaccine ? vaccine : other;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (first_pool.empty() || count == 0) return out;
  const std::size_t second_size = kind == ModelKind::vaccine ? prepared.size() : other.size();
  if (second_size < 2) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_first(0, first_pool.size() - 1), pick_second(0, second_size - 1);
  std::set<std::uint64_t> seen;
  const std::size_t budget = count * std::max<std::size_t>(1, draws_per_sample);
  for (std::size_t draw = 0; draw < budget && out.size() < count; ++draw) {
    const std::size_t i = first_pool[pick_first(rng)];
    const std::size_t s = pick_second(rng);
    const std::size_t j = kind == ModelKind::vaccine ? s : other[s];
    if (i == j) continue;
    const auto key = detail::unordered_key(i, j);
    if (exclude.count(key) || seen.count(key)) continue;
    if (!blocking_pass(prepared[i], prepared[j])) continue;
    seen.insert(key);
    out.emplace_back(std::min(i, j), std::max(i, j));
  }
  return out;
}

/// Trains the model for `kind` from the pairs of that kind in `pairs`.
/// Duplicates are +1; otherwise_related and non_duplicate are -1.
inline ClassifierModel train(ModelKind kind, std::span<const LabelledPair> pairs, const PreparedCorpus& prepared,
                             const FrequencyTables& tables, const TrainOptions& opt) {
  if (!(opt.C > 0)) throw usage_error("train: C must be positive");
  if (!(opt.negative_ratio > 0)) throw usage_error("train: negative ratio must be positive");

  HitMissParams params = opt.hitmiss;
  if (opt.fit_histograms) fit_independence_histograms(params, prepared.corpus(), opt.seed, opt.histogram_pairs);
  const FeatureScorer scorer(tables, params);

  struct Resolved {
    std::size_t i, j;
    int y;
  };
  std::vector<Resolved> labelled;
  std::set<std::uint64_t> known;
  for (const auto& p : pairs) {
    if (p.id_a == p.id_b) throw data_error("train: pair joins report '" + p.id_a + "' with itself");
    const std::size_t i = prepared.require(p.id_a), j = prepared.require(p.id_b);
    if (model_kind_for(classify_pair_kind(*prepared[i].report, *prepared[j].report)) != kind) continue;
    if (!blocking_pass(prepared[i], prepared[j]))
      throw data_error("train: pair (" + p.id_a + ", " + p.id_b + ") fails blocking");
    known.insert(detail::unordered_key(i, j));
    labelled.push_back({i, j, svm_label(p.label)});
  }
  const auto positives = static_cast<std::size_t>(std::count_if(labelled.begin(), labelled.end(),
                                                                [](const Resolved& r) { return r.y == 1; }));
  if (positives == 0) throw data_error("train: no duplicate pairs for the " + std::string(to_string(kind)) + " model");
  const std::size_t labelled_negatives = labelled.size() - positives;

  const auto target = static_cast<std::size_t>(
      std::min<double>(opt.negative_ratio * static_cast<double>(positives),
                       static_cast<double>(opt.negatives_per_positive_cap) * static_cast<double>(positives)));
  const std::size_t wanted = target > labelled_negatives ? target - labelled_negatives : 0;
  const auto sampled = sample_negative_pairs(prepared, kind, wanted, opt.seed ^ 0x9e3779b97f4a7c15ULL, known,
                                             opt.draws_per_sample);
  const std::size_t n_neg = labelled_negatives + sampled.size();
  const double w_neg = n_neg == 0 ? 1.0 : opt.negative_ratio * static_cast<double>(positives) / static_cast<double>(n_neg);

  SvmProblem problem;
  auto add = [&](std::size_t i, std::size_t j, int y) {
    const auto fv = scorer.features(prepared[i], prepared[j]);
    problem.add(fv.values, y, y == 1 ? opt.C : opt.C * w_neg);
  };
  for (const auto& r : labelled) add(r.i, r.j, r.y);
  for (const auto& [i, j] : sampled) add(i, j, -1);

  SolverOptions solver = opt.solver;
  solver.seed = opt.seed;
  const auto sol = solve_linear_svm(problem, solver);

  ClassifierModel m;
  m.kind = kind;
  std::copy(sol.w.begin(), sol.w.end(), m.weights.begin());
  m.intercept = sol.b;
  m.C = opt.C;
  m.threshold = 0.0;
  m.hitmiss = params;

  std::size_t correct = 0;
  for (std::size_t k = 0; k < problem.size(); ++k) {
    const auto x = problem.row(k);
    double s = m.intercept;
    for (std::size_t f = 0; f < kFeatureCount; ++f) s += m.weights[f] * x[f];
    correct += (s > 0) == (problem.y[k] == 1);
  }
  m.metadata = {
      {"kind", std::string(to_string(kind))},
      {"options", opt.to_json()},
      {"positives", positives},
      {"labelled_negatives", labelled_negatives},
      {"sampled_negatives", sampled.size()},
      {"sampled_negatives_requested", wanted},
      {"negative_class_weight", w_neg},
      {"effective_negative_ratio", w_neg * static_cast<double>(n_neg) / static_cast<double>(positives)},
      {"training_accuracy", problem.size() ? static_cast<double>(correct) / static_cast<double>(problem.size()) : 1.0},
      {"solver",
       {{"epochs", sol.epochs}, {"converged", sol.converged}, {"primal", sol.primal}, {"dual", sol.dual},
        {"gap", sol.gap()}}},
      {"unknowns",
       {"whether the reference fit combined class weighting with its negative ratio",
        "the reference solver tolerance"}}};
  return m;
}

}  // namespace casematch
