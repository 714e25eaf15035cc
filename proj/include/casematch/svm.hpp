#pragma once

// Linear soft-margin SVM (hinge loss, L2 penalty) solved by dual coordinate
// ascent, plus the classifier model artifact and its decision rule.
//
// The intercept is learned through an augmented constant feature of value
// `bias_scale`, so it is regularised like the other weights:
//   P(w, b) = 1/2 (|w|^2 + (b / bias_scale)^2) + sum_i C_i max(0, 1 - y_i (w.x_i + b))
//   D(a)    = sum_i a_i - 1/2 |sum_i a_i y_i x~_i|^2,   0 <= a_i <= C_i

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "casematch/pair_features.hpp"

namespace casematch {

struct SvmProblem {
  std::size_t dim = 0;
  std::vector<double> x;  // row-major, size() x dim
  std::vector<int> y;     // +1 / -1
  std::vector<double> cost;

  explicit SvmProblem(std::size_t d = kFeatureCount) : dim(d) {}

  std::size_t size() const { return y.size(); }

  void add(std::span<const double> row, int label, double c) {
    if (row.size() != dim) throw usage_error("svm: row dimension mismatch");
    if (label != 1 && label != -1) throw usage_error("svm: labels must be +1 or -1");
    if (!(c > 0)) throw usage_error("svm: per-sample cost must be positive");
    x.insert(x.end(), row.begin(), row.end());
    y.push_back(label);
    cost.push_back(c);
  }

  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }
};

struct SolverOptions {
  double tolerance = 1e-6;  // relative duality gap
  std::size_t max_epochs = 5000;
  std::uint64_t seed = 1;
  double bias_scale = 1.0;
};

struct SvmSolution {
  std::vector<double> w;
  double b = 0.0;
  std::vector<double> alpha;
  double primal = 0.0;
  double dual = 0.0;
  std::size_t epochs = 0;
  bool converged = false;
  /// Minimisation-form dual objective 1/2|w~|^2 - sum(a) after each epoch;
  /// non-increasing by construction of exact coordinate steps.
  std::vector<double> dual_objective_trace;

  double gap() const { return primal - dual; }
};

inline double svm_primal_objective(const SvmProblem& p, std::span<const double> w, double b, double bias_scale) {
  double reg = b / bias_scale;
  reg *= reg;
  for (double v : w) reg += v * v;
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto xi = p.row(i);
    const double s = std::inner_product(xi.begin(), xi.end(), w.begin(), b);
    loss += p.cost[i] * std::max(0.0, 1.0 - p.y[i] * s);
  }
  return 0.5 * reg + loss;
}

inline SvmSolution solve_linear_svm(const SvmProblem& p, const SolverOptions& opt = {}) {
  const std::size_t n = p.size();
  const std::size_t d = p.dim;
  const double B = opt.bias_scale;
  SvmSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> w(d, 0.0);
  double wb = 0.0;  // weight of the augmented constant feature

  std::vector<double> qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = p.row(i);
    qii[i] = std::inner_product(xi.begin(), xi.end(), xi.begin(), B * B);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opt.seed);

  auto objectives = [&]() {
    double sq = wb * wb, sum_a = 0.0;
    for (double v : w) sq += v * v;
    for (double a : sol.alpha) sum_a += a;
    const double primal = svm_primal_objective(p, w, wb * B, B);
    return std::array<double, 3>{primal, sum_a - 0.5 * sq, 0.5 * sq - sum_a};
  };

  // Shrinking: a coordinate at a bound whose gradient points further out than
  // anything seen in the previous sweep is parked. The stopping test below
  // always uses the full duality gap, so parked coordinates cannot fake
  // convergence; they are restored whenever the active set looks settled.
  std::size_t active = n;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double pg_max_old = kInf, pg_min_old = -kInf;
  for (std::size_t epoch = 0; epoch < opt.max_epochs && n > 0; ++epoch) {
    std::shuffle(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(active), rng);
    double pg_max = -kInf, pg_min = kInf;
    for (std::size_t s = 0; s < active;) {
      const std::size_t i = order[s];
      if (qii[i] <= 0) {
        ++s;
        continue;
      }
      const auto xi = p.row(i);
      const double dot = std::inner_product(xi.begin(), xi.end(), w.begin(), wb * B);
      const double g = p.y[i] * dot - 1.0;
      double& a = sol.alpha[i];
      const double c = p.cost[i];
      double pg = 0.0;
      if (a <= 0.0) {
        if (g > pg_max_old) {
          std::swap(order[s], order[--active]);
          continue;
        }
        pg = std::min(g, 0.0);
      } else if (a >= c) {
        if (g < pg_min_old) {
          std::swap(order[s], order[--active]);
          continue;
        }
        pg = std::max(g, 0.0);
      } else {
        pg = g;
      }
      ++s;
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg == 0.0) continue;
      const double old = a;
      a = std::clamp(a - g / qii[i], 0.0, c);
      const double delta = (a - old) * p.y[i];
      if (delta == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) w[k] += delta * xi[k];
      wb += delta * B;
    }
    const auto [primal, dual, trace] = objectives();
    sol.dual_objective_trace.push_back(trace);
    sol.primal = primal;
    sol.dual = dual;
    sol.epochs = epoch + 1;
    if (primal - dual <= opt.tolerance * std::max(1.0, std::abs(primal))) {
      sol.converged = true;
      break;
    }
    if (pg_max - pg_min <= 1e-3 * opt.tolerance || active == 0) {
      active = n;
      pg_max_old = kInf;
      pg_min_old = -kInf;
    } else {
      pg_max_old = pg_max <= 0.0 ? kInf : pg_max;
      pg_min_old = pg_min >= 0.0 ? -kInf : pg_min;
    }
  }
  if (n == 0) sol.converged = true;
  sol.w = w;
  sol.b = wb * B;
  return sol;
}

enum class ModelKind { drug, vaccine };

inline std::string_view to_string(ModelKind k) { return k == ModelKind::vaccine ? "vaccine" : "drug"; }

inline ModelKind model_kind_for(PairKind k) {
  return k == PairKind::vaccine_pair ? ModelKind::vaccine : ModelKind::drug;
}

struct ClassifierModel {
  static constexpr int kFormatVersion = 1;

  ModelKind kind = ModelKind::drug;
  std::array<double, kFeatureCount> weights{};
  double intercept = 0.0;
  double C = 1.0;
  double threshold = 0.0;
  std::vector<std::string> names{feature_names().begin(), feature_names().end()};
  HitMissParams hitmiss;
  json metadata = json::object();

  std::string id() const { return std::string(to_string(kind)) + "-model"; }

  double weight(Feature f) const { return weights[static_cast<std::size_t>(f)]; }

  void validate() const {
    if (!(C > 0)) throw data_error("model: C must be positive");
    if (names.size() != kFeatureCount ||
        !std::equal(names.begin(), names.end(), feature_names().begin()))
      throw data_error("model: feature names or order differ from the engine's feature vector");
    for (double w : weights)
      if (!std::isfinite(w)) throw data_error("model: non-finite weight");
  }

  json to_json() const {
    return {{"format_version", kFormatVersion},
            {"kind", std::string(to_string(kind))},
            {"feature_names", names},
            {"weights", weights},
            {"intercept", intercept},
            {"C", C},
            {"threshold", threshold},
            {"hitmiss_params", hitmiss.to_json()},
            {"training", metadata}};
  }

  static ClassifierModel from_json(const json& j) {
    if (j.value("format_version", 0) != kFormatVersion) throw data_error("model: unsupported format_version");
    ClassifierModel m;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "drug") m.kind = ModelKind::drug;
    else if (kind == "vaccine") m.kind = ModelKind::vaccine;
    else throw data_error("model: unknown kind '" + kind + "'");
    m.names = j.at("feature_names").get<std::vector<std::string>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != kFeatureCount) throw data_error("model: expected 6 weights");
    std::copy(w.begin(), w.end(), m.weights.begin());
    m.intercept = j.at("intercept").get<double>();
    m.C = j.at("C").get<double>();
    m.threshold = j.value("threshold", 0.0);
    m.hitmiss = HitMissParams::from_json(j.at("hitmiss_params"));
    m.metadata = j.value("training", json::object());
    m.validate();
    return m;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write model file '" + path + "'");
    out << to_json().dump(2) << '\n';
  }

  static ClassifierModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open model file '" + path + "'");
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw data_error("model file '" + path + "': " + e.what());
    }
  }
};

/// Gate evaluated on the model-weighted sex, age and date-embedding values.
inline GateResult model_gate(const ClassifierModel& m, const FeatureVector& fv) {
  return demographic_gate(m.weight(Feature::sex) * fv[Feature::sex], m.weight(Feature::age) * fv[Feature::age],
                          m.weight(Feature::date_emb) * fv[Feature::date_emb]);
}

enum class Stage { blocked_out, gated_out, classified };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::blocked_out: return "blocked_out";
    case Stage::gated_out: return "gated_out";
    default: return "classified";
  }
}

/// Outcome for one report pair. Ids view into the scanned corpus.
struct PairVerdict {
  std::string_view id_a;
  std::string_view id_b;
  Stage stage = Stage::blocked_out;
  bool suspected = false;
  double score = 0.0;  // meaningful unless blocked_out
  std::array<double, kFeatureCount> contributions{};
  double intercept = 0.0;
  double threshold = 0.0;
  GateResult gate;
  ModelKind model = ModelKind::drug;
  FeatureVector features;
};

inline PairVerdict decide(const ClassifierModel& model, const FeatureVector& fv, const GateResult& gate) {
  if (model.names.size() != kFeatureCount || !std::equal(model.names.begin(), model.names.end(), feature_names().begin()))
    throw data_error("model: feature names or order differ from the engine's feature vector");
  PairVerdict v;
  v.model = model.kind;
  v.features = fv;
  v.intercept = model.intercept;
  v.threshold = model.threshold;
  v.gate = gate;
  double s = 0.0;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    v.contributions[k] = model.weights[k] * fv.values[k];
    s += v.contributions[k];
  }
  v.score = s + model.intercept;
  if (!gate.passed) {
    v.stage = Stage::gated_out;
    v.suspected = false;
  } else {
    v.stage = Stage::classified;
    v.suspected = v.score > model.threshold;
  }
  return v;
}

/// Lossless, human-readable breakdown of a verdict.
struct Explanation {
  std::array<double, kFeatureCount> contributions{};
  double intercept = 0.0;
  double threshold = 0.0;
  double contribution_total = 0.0;  // without intercept
  double score = 0.0;
  double gate_net = 0.0;
  bool gate_passed = true;
  bool suspected = false;
  Stage stage = Stage::blocked_out;
  std::size_t shared_substances = 0;
  std::size_t shared_socs = 0;

  json to_json() const {
    json c = json::object();
    for (std::size_t k = 0; k < kFeatureCount; ++k) c[feature_names()[k]] = contributions[k];
    return {{"contributions", c},         {"intercept", intercept},
            {"threshold", threshold},     {"contribution_total", contribution_total},
            {"score", score},             {"gate", {{"net", gate_net}, {"passed", gate_passed}}},
            {"suspected", suspected},     {"stage", std::string(to_string(stage))},
            {"blocking", {{"shared_substances", shared_substances}, {"shared_socs", shared_socs}}}};
  }
};

inline Explanation explain(const PairVerdict& v, std::size_t shared_substances = 0, std::size_t shared_socs = 0) {
  Explanation e;
  e.contributions = v.contributions;
  e.intercept = v.intercept;
  e.threshold = v.threshold;
  double s = 0.0;
  for (double c : v.contributions) s += c;
  e.contribution_total = s;
  e.score = s + v.intercept;
  e.gate_net = v.gate.net;
  e.gate_passed = v.gate.passed;
  e.suspected = v.suspected;
  e.stage = v.stage;
  e.shared_substances = shared_substances;
  e.shared_socs = shared_socs;
  return e;
}

}  // namespace casematch
