// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "svm_reference.hpp"

using namespace casematch;
using casematch::testing::corpus_of;
using casematch::testing::fixture_path;
using casematch::testing::ReportBuilder;
using casematch::testing::toy_ontology;

namespace {

// Tolerances.
constexpr double kTpPerBillionTol = 0.01;
constexpr double kPerReportTol = 0.005;
constexpr double kPossiblePairsTolMillions = 0.1;
constexpr double kOracleTol = 1e-9;
constexpr double kMismatchIndependenceTol = 1e-12;
constexpr double kSvmPrimalRelTol = 1e-4;
constexpr double kMinRecall = 0.80;
constexpr double kMinPrecision = 0.80;
constexpr double kMultiReporterMaskTol = 0.05;
constexpr double kMinFlagRatio = 5.0;
constexpr double kMinPairsPerSecond = 1e6;

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) detail << "first failure: " << what << "; ";
    ok = ok && cond;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void run(const std::string& name, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << "exception: " << e.what();
  }
  failures += !c.ok;
  std::printf("%s %s (%.1fs) %s\n", c.ok ? "PASS" : "FAIL", name.c_str(), seconds_since(t0), c.detail.str().c_str());
  std::fflush(stdout);
}

void formula_reproduction(Check& c) {
  const PrecisionRow rows[] = {{"2017", 26.9e6, 22.2e9, 100, 41, std::nullopt},
                               {"drugs", 26.9e6, 20.5e9, 100, 54, std::nullopt},
                               {"vaccines", 1.8e6, 3.2e9, 100, 92, std::nullopt}};
  const double precision[] = {0.41, 0.54, 0.92}, per_billion[] = {1.85, 2.63, 28.75}, per_report[] = {0.05, 0.07, 0.05};
  for (int k = 0; k < 3; ++k) {
    c.require(rows[k].precision() == precision[k], rows[k].model + " precision");
    c.require(std::abs(rows[k].tp_per_billion() - per_billion[k]) <= kTpPerBillionTol, rows[k].model + " TP/billion");
    c.require(std::abs(rows[k].expected_per_report() - per_report[k]) <= kPerReportTol, rows[k].model + " per report");
  }
  const std::pair<std::uint64_t, double> countries[] = {{19042, 181.3}, {4363, 9.5}, {1004, 0.5}};
  for (const auto& [n, millions] : countries)
    c.require(std::abs(possible_pairs(n) / 1e6 - millions) <= kPossiblePairsTolMillions,
              "possible pairs for " + std::to_string(n));
}

// Likelihood ratio by enumerating the shared latent value.
double latent_llr(const std::vector<double>& p, std::size_t x, std::size_t y, double a) {
  double dup = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t)
    dup += p[t] * ((x == t ? 1.0 - a : 0.0) + a * p[x]) * ((y == t ? 1.0 - a : 0.0) + a * p[y]);
  return std::log(dup / (p[x] * p[y]));
}

void hitmiss_oracle(Check& c) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  std::gamma_distribution<double> g(0.7, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = u(rng);
    std::vector<double> p(2 + static_cast<std::size_t>(trial) % 8);
    double s = 0;
    for (auto& v : p) s += (v = g(rng) + 1e-6);
    for (auto& v : p) v /= s;
    for (std::size_t x = 0; x < p.size(); ++x) {
      worst = std::max(worst, std::abs(categorical_match_weight(p[x], a) - latent_llr(p, x, x, a)));
      const std::size_t y = (x + 1) % p.size();
      worst = std::max(worst, std::abs(categorical_mismatch_weight(a) - latent_llr(p, x, y, a)));
    }
    const double f = u(rng);
    const std::vector<double> b = {1.0 - f, f};
    worst = std::max(worst, std::abs(bernoulli_match_weight(f, a) - latent_llr(b, 1, 1, a)));
    worst = std::max(worst, std::abs(bernoulli_mismatch_weight(f, a) - latent_llr(b, 1, 0, a)));
    c.require(std::abs(categorical_mismatch_weight(a) - std::log(a * (2.0 - a))) <= kMismatchIndependenceTol,
              "mismatch closed form");
    // Value independence: the oracle mismatch is the same for every value pair.
    for (std::size_t x = 0; x + 1 < p.size(); ++x)
      c.require(std::abs(latent_llr(p, x, x + 1, a) - latent_llr(p, 0, 1, a)) <= kMismatchIndependenceTol,
                "mismatch value independence");
  }
  c.detail << "max |closed form - oracle| = " << worst;
  c.require(worst <= kOracleTol, "oracle tolerance");
}

void gate_fixtures(Check& c) {
  c.require(!demographic_gate(0.15, -0.46, 0.20).passed, "(0.15, -0.46, 0.20) fails");
  c.require(demographic_gate(0.29, 0.30, 0.00).passed, "(0.29, 0.30, 0.00) passes");
  c.require(!demographic_gate(-0.53, 0.00, 0.25).passed, "(-0.53, 0.00, 0.25) fails");
}

void date_pipeline(Check& c) {
  const DateExtractor x;
  std::ifstream in(fixture_path("tests/fixtures/date_fixtures.jsonl"));
  std::size_t total = 0, exact = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    std::vector<std::pair<std::string, std::string>> want, got;
    for (const auto& e : j.at("expected")) want.emplace_back(e.at("start"), e.at("end"));
    for (const auto& m : x.extract(j.at("text").get<std::string>(), j.at("country").get<std::string>()))
      got.emplace_back(format_day(m.interval.start), format_day(m.interval.end));
    ++total;
    exact += got == want;
  }
  c.detail << exact << "/" << total << " fixtures exact; ";
  c.require(total >= 50 && exact == total, "fixture extraction");

  std::vector<DateInterval> found;
  for (const auto& m : x.extract("Given March 2021, onset 2021-03-05, seen 2021-01-01.", "GB")) found.push_back(m.interval);
  const auto eligible = eligible_embedding_dates(found);
  c.require(found.size() == 3 && eligible.size() == 1 && format_day(eligible[0]) == "2021-03-05",
            "vague month and January 1 excluded");

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> count(1, 4), offset(0, 60), base(1000, 50000), shift(-500, 500);
  auto days = [](const std::vector<int>& offs, int b) {
    std::vector<Day> out;
    for (int o : offs) out.push_back(day_from_index(b + o));
    return out;
  };
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<int> a(static_cast<std::size_t>(count(rng))), b(static_cast<std::size_t>(count(rng)));
    for (auto& d : a) d = offset(rng);
    for (auto& d : b) d = offset(rng);
    const int b0 = base(rng), k = shift(rng);
    const double s = date_similarity(build_date_vector(days(a, b0)), build_date_vector(days(b, b0)));
    const double r = date_similarity(build_date_vector(days(b, b0)), build_date_vector(days(a, b0)));
    const double t = date_similarity(build_date_vector(days(a, b0 + k)), build_date_vector(days(b, b0 + k)));
    int gap = 1 << 30;
    for (int p : a)
      for (int q : b) gap = std::min(gap, std::abs(p - q));
    c.require(s >= 0.0 && s <= 1.0, "cosine range");
    c.require(s == r, "cosine symmetry");
    c.require(std::abs(s - t) <= 1e-12, "translation invariance");
    c.require(gap < 7 || s == 0.0, "zero beyond a 7-day gap");
    if (!c.ok) return;
  }
}

void svm_solver(Check& c) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = casematch::testing::random_svm_problem(seed, 30 + seed);  // at most 50 points, 6 features
    const auto sol = solve_linear_svm(p);
    const auto ref = casematch::testing::reference_svm(p);
    const double rel = std::abs(sol.primal - ref.primal) / std::max(1.0, std::abs(ref.primal));
    worst = std::max(worst, rel);
    c.require(rel <= kSvmPrimalRelTol, "primal vs reference, seed " + std::to_string(seed));
    const auto again = solve_linear_svm(p);
    c.require(again.w == sol.w && again.b == sol.b, "deterministic retraining");
  }
  c.detail << "max relative primal gap " << worst << "; ";

  const auto loose = casematch::testing::random_svm_problem(5, 50, kFeatureCount, 12.0);
  SvmProblem hard(loose.dim);
  for (std::size_t i = 0; i < loose.size(); ++i) hard.add(loose.row(i), loose.y[i], 1000.0);
  const auto sol = solve_linear_svm(hard);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < hard.size(); ++i) {
    const auto xi = hard.row(i);
    correct += hard.y[i] * std::inner_product(xi.begin(), xi.end(), sol.w.begin(), sol.b) > 0;
  }
  c.require(correct == hard.size(), "separable data fit perfectly");
}

// Default synthetic world, trained once and shared by the remaining checks.
struct World {
  SyntheticWorld w{SynthConfig::defaults()};
  TrainOptions opt;
  ModelPair models;
  std::unique_ptr<Engine> engine;

  World() {
    opt.negative_ratio = scaled_negative_ratio(w.corpus().size());
    const auto labelled = to_labelled(w.split().train);
    models = train_models(w.prepared(), w.tables(), labelled, opt);
    engine = std::make_unique<Engine>(w.prepared(), w.tables(), models.drug, &models.vaccine);
  }
};

World& world() {
  static World w;
  return w;
}

void end_to_end(Check& c) {
  auto& w = world();
  const auto held_out = w.w.held_out();
  const auto recall = evaluate_recall(*w.engine, held_out);
  EngineOptions masked_opt;
  masked_opt.mask_external = true;
  const Engine masked(w.w.prepared(), w.w.tables(), w.models.drug, &w.models.vaccine, masked_opt);
  const auto masked_recall = evaluate_recall(masked, held_out);
  const auto scan = scan_precision(*w.engine, w.engine->all_indices(), w.w.truth(), pair_set(w.w.split().train));

  const double r = recall.overall.rate(), p = scan.precision();
  const double fu = recall.by_mechanism.at("followup").rate(), fu_m = masked_recall.by_mechanism.at("followup").rate();
  const double mr = recall.by_mechanism.at("multi_reporter").rate();
  const double mr_m = masked_recall.by_mechanism.at("multi_reporter").rate();
  c.detail << "recall " << r << " precision " << p << " (" << scan.true_positives << "/" << scan.flagged
           << ") followup " << fu << "->" << fu_m << " multi_reporter " << mr << "->" << mr_m << "; ";
  c.require(r >= kMinRecall, "recall");
  c.require(p >= kMinPrecision, "precision");
  c.require(fu_m < fu, "masking lowers followup recall");
  c.require(std::abs(mr_m - mr) <= kMultiReporterMaskTol, "multi_reporter recall unchanged");
}

void skewed_country(Check& c) {
  auto& w = world();
  const auto bm = fit_baseline(w.w.prepared(), w.w.tables(), w.w.training_duplicates(), w.models.drug.hitmiss);
  const BaselineScorer baseline(w.w.tables(), bm);
  // The skewed country is the one whose items deviate most from the global rates.
  const auto col = compare_country(*w.engine, baseline, w.w.truth(), "UG");
  const double bp = col.baseline.predicted_pairs ? double(col.baseline.sampled_true) / double(col.baseline.sampled) : 0.0;
  const double mp = col.model.predicted_pairs ? double(col.model.sampled_true) / double(col.model.sampled) : 0.0;
  c.detail << "baseline " << col.baseline.predicted_pairs << " flags, precision " << bp << "; model "
           << col.model.predicted_pairs << " flags, precision " << mp << "; ";
  c.require(col.model.predicted_pairs > 0, "model flags something");
  c.require(double(col.baseline.predicted_pairs) >= kMinFlagRatio * double(col.model.predicted_pairs), "flag ratio");
  c.require(bp < mp, "baseline precision lower");
}

void determinism_and_throughput(Check& c) {
  auto& w = world();
  auto precision_once = [&] {
    RandomPairStream s(w.w.corpus().size(), 99, 1'000'000);
    return precision_run(s, "drug-model", engine_classifier(*w.engine), 30, 500'000'000);
  };
  const auto a = precision_once(), b = precision_once();
  c.require(a.suspected.size() == 30, "precision run reaches its stop");
  c.require(a.suspected == b.suspected && a.pairs_consumed == b.pairs_consumed, "identical precision runs");

  const auto labelled = to_labelled(w.w.split().train);
  const auto again = train(ModelKind::drug, labelled, w.w.prepared(), w.w.tables(), w.opt);
  c.require(again.weights == w.models.drug.weights && again.intercept == w.models.drug.intercept,
            "seeded retraining");

  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t flagged = 0;
  const auto counters = w.engine->scan_exhaustive([&](const PairVerdict&) { ++flagged; }, {Emit::suspected});
  const double secs = seconds_since(t0);
  const double rate = static_cast<double>(counters.pairs) / secs;
  c.detail << counters.pairs << " pairs in " << secs << "s = " << rate / 1e6 << "M pairs/s; ";
  c.require(counters.pairs == w.w.corpus().size() * (w.w.corpus().size() - 1) / 2, "every pair blocking-checked");
  c.require(rate >= kMinPairsPerSecond, "throughput");
}

// Reports sharing a near-perfectly correlated vaccine/drug/event set, amid
// unrelated background reports.
void compensation_cap(Check& c) {
  const auto o = toy_ontology();
  bool first = true;
  for (int group : {3, 5, 10, 20, 40}) {
    for (int n_events : {2, 3, 4}) {
      std::vector<ReportBuilder> b;
      for (int i = 0; i < 2000; ++i) {
        ReportBuilder r("r" + std::to_string(i));
        if (i < group) {
          r.drug("S18").drug("S19").drug("S01");
          for (int e = 0; e < n_events; ++e) r.event("P0" + std::to_string(e + 1));
        } else {
          r.drug("S0" + std::to_string(2 + i % 8)).event("P1" + std::to_string(i % 10));
        }
        b.push_back(r);
      }
      const auto tables = build_tables(corpus_of(o, b), o, 1000000);
      const std::vector<ItemId> drugs = {o.drug_item(1), o.drug_item(18), o.drug_item(19)};
      std::vector<ItemId> events;
      for (int e = 0; e < n_events; ++e) events.push_back(o.event_item(static_cast<std::size_t>(e + 1)));
      std::sort(events.begin(), events.end());
      const HitMissParams p;
      const auto capped = drug_event_feature(drugs, drugs, events, events, tables, p, kGlobalSlot);
      const auto raw =
          drug_event_feature(drugs, drugs, events, events, tables, p, kGlobalSlot, CompensationMode::uncapped);
      if (first) {
        c.detail << "group " << group << ": drug " << capped.drugs.match_sum << " event " << capped.events.match_sum
                 << " compensation " << -capped.compensation_raw << " capped " << capped.value() << " uncapped "
                 << raw.value() << "; ";
        first = false;
      }
      const std::string where = "group " + std::to_string(group) + ", events " + std::to_string(n_events);
      c.require(capped.match_sum() - capped.compensation >= 0.0, "capped matched portion >= 0 at " + where);
      c.require(raw.value() < 0.0, "uncapped aggregate negative at " + where);
    }
  }
}

}  // namespace

int main() {
  run("formula reproduction", formula_reproduction);
  run("hit-miss oracle equivalence", hitmiss_oracle);
  run("gate fixtures", gate_fixtures);
  run("date pipeline", date_pipeline);
  run("svm solver correctness", svm_solver);
  run("end-to-end synthetic", end_to_end);
  run("skewed-country comparison", skewed_country);
  run("determinism and throughput", determinism_and_throughput);
  run("compensation cap", compensation_cap);

  // Information only: the unscaled 1e6 negative ratio at this corpus size.
  {
    auto& w = world();
    auto opt = w.opt;
    opt.negative_ratio = 1e6;
    const auto labelled = to_labelled(w.w.split().train);
    const auto drug = train(ModelKind::drug, labelled, w.w.prepared(), w.w.tables(), opt);
    const auto vac = train(ModelKind::vaccine, labelled, w.w.prepared(), w.w.tables(), opt);
    const Engine e(w.w.prepared(), w.w.tables(), drug, &vac);
    const auto recall = evaluate_recall(e, w.w.held_out());
    const auto scan = scan_precision(e, e.all_indices(), w.w.truth(), pair_set(w.w.split().train));
    std::printf("INFO unscaled negative ratio 1e6: recall %.3f, precision %.3f (%llu flagged)\n",
                recall.overall.rate(), scan.flagged ? scan.precision() : 0.0,
                static_cast<unsigned long long>(scan.flagged));
  }
  std::printf("%d failure(s)\n", failures);
  return failures ? 1 : 0;
}
