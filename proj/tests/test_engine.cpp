#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace casematch;
using casematch::testing::corpus_of;
using casematch::testing::random_corpus;
using casematch::testing::ReportBuilder;
using casematch::testing::toy_ontology;

namespace {

ClassifierModel model(ModelKind kind, double intercept = -3.0) {
  ClassifierModel m;
  m.kind = kind;
  m.weights = {0.8, 0.6, 0.4, 0.3, 1.5, 4.0};
  m.intercept = intercept;
  return m;
}

struct World {
  Ontology o = toy_ontology();
  Corpus c;
  FrequencyTables t;
  std::unique_ptr<PreparedCorpus> p;
  // Lenient intercepts so random reports produce some suspected pairs.
  ClassifierModel drug = model(ModelKind::drug, -0.5), vaccine = model(ModelKind::vaccine, -0.5);

  explicit World(std::size_t n, std::uint64_t seed = 31) : c(random_corpus(o, n, seed)), t(build_tables(c, o, 100)) {
    p = std::make_unique<PreparedCorpus>(c, o, t);
  }
  Engine engine(EngineOptions opt = {}) const { return Engine(*p, t, drug, &vaccine, std::move(opt)); }
};

using Key = std::pair<std::string, std::string>;

}  // namespace

TEST(Engine, ExhaustiveCountsEveryPairOnce) {
  World w(90);
  const auto e = w.engine();
  std::set<Key> seen;
  std::size_t emitted = 0;
  const auto c = e.scan_exhaustive([&](const PairVerdict& v) {
    ASSERT_LT(v.id_a, v.id_b);
    seen.emplace(v.id_a, v.id_b);
    ++emitted;
  });
  EXPECT_EQ(c.pairs, 90u * 89u / 2u);
  EXPECT_EQ(emitted, c.pairs);
  EXPECT_EQ(seen.size(), c.pairs);
  EXPECT_EQ(c.blocked_out + c.features_computed, c.pairs);
  EXPECT_EQ(c.gated_out + c.classified, c.features_computed);
  EXPECT_LE(c.suspected, c.classified);
}

TEST(Engine, CandidateIndexFindsExactlyTheUnblockedPairs) {
  World w(250);
  const auto e = w.engine();
  StageCounters ce, cc;
  std::vector<Key> ex, cand;
  ce = e.scan_exhaustive([&](const PairVerdict& v) { ex.emplace_back(v.id_a, v.id_b); }, {Emit::unblocked});
  cc = e.scan_candidates([&](const PairVerdict& v) { cand.emplace_back(v.id_a, v.id_b); }, {Emit::unblocked});
  std::sort(ex.begin(), ex.end());
  std::sort(cand.begin(), cand.end());
  EXPECT_EQ(ex, cand);
  EXPECT_EQ(ce.suspected, cc.suspected);
  EXPECT_EQ(ce.features_computed, cc.features_computed);
  EXPECT_GT(cc.suspected, 0u);
}

TEST(Engine, OutputIndependentOfThreadCount) {
  World w(300);
  const auto e = w.engine();
  auto run = [&](unsigned threads, bool candidates) {
    std::vector<std::pair<Key, double>> out;
    ScanOptions opt{Emit::unblocked, threads, 7};
    auto sink = [&](const PairVerdict& v) { out.push_back({{std::string(v.id_a), std::string(v.id_b)}, v.score}); };
    const auto c = candidates ? e.scan_candidates(sink, opt) : e.scan_exhaustive(sink, opt);
    return std::make_pair(out, c);
  };
  for (bool candidates : {false, true}) {
    const auto one = run(1, candidates);
    EXPECT_EQ(one, run(3, candidates));
    EXPECT_EQ(one, run(4, candidates));
  }
}

TEST(Engine, SubsetScanStaysInsideSubset) {
  World w(120);
  const auto e = w.engine();
  const std::vector<std::size_t> subset = {5, 17, 40, 41, 99, 5};
  std::size_t n = 0;
  e.scan_exhaustive(subset, [&](const PairVerdict& v) {
    const auto i = *w.c.index_of(v.id_a), j = *w.c.index_of(v.id_b);
    EXPECT_TRUE(std::count(subset.begin(), subset.end(), i));
    EXPECT_TRUE(std::count(subset.begin(), subset.end(), j));
    ++n;
  });
  EXPECT_EQ(n, 10u);
  const std::vector<std::size_t> bad = {1, 100000};
  EXPECT_THROW(e.scan_exhaustive(bad, [](const PairVerdict&) {}), Error);
}

TEST(Engine, MaskingRemovesExternalEvidenceOnly) {
  const auto o = toy_ontology();
  const auto c = corpus_of(o, {ReportBuilder("a").drug("S01").event("P00").ids("GB-1"),
                               ReportBuilder("b").drug("S01").event("P00").ids("US-1", "GB-1")});
  const auto t = build_tables(c, o);
  const PreparedCorpus p(c, o, t);
  const auto m = model(ModelKind::drug);
  const Engine plain(p, t, m), masked(p, t, m, nullptr, {true, {}});
  const auto v = plain.evaluate(0, 1), vm = masked.evaluate(0, 1);
  EXPECT_EQ(v.features[Feature::ext], 1.0);
  EXPECT_EQ(vm.features[Feature::ext], 0.0);
  EXPECT_NEAR(v.score - vm.score, m.weight(Feature::ext), 1e-12);
  EXPECT_EQ(v.features[Feature::drug_ae], vm.features[Feature::drug_ae]);
}

TEST(Engine, RoutesVaccinePairsToVaccineModel) {
  const auto o = toy_ontology();
  const auto c = corpus_of(o, {ReportBuilder("a").drug("S18").event("P00"), ReportBuilder("b").drug("S18").event("P00"),
                               ReportBuilder("c").drug("S01").event("P00"), ReportBuilder("d").drug("S01").event("P00")});
  const auto t = build_tables(c, o);
  const PreparedCorpus p(c, o, t);
  const auto dm = model(ModelKind::drug), vm = model(ModelKind::vaccine, -1.0);
  const Engine e(p, t, dm, &vm);
  EXPECT_EQ(e.evaluate(1, 0).model, ModelKind::vaccine);
  EXPECT_EQ(e.evaluate(1, 0).id_a, "a");
  EXPECT_EQ(e.evaluate(2, 3).model, ModelKind::drug);
  EXPECT_EQ(e.evaluate(1, 0).intercept, -1.0);

  const Engine drug_only(p, t, dm);
  EXPECT_NO_THROW(drug_only.evaluate(2, 3));
  EXPECT_THROW(drug_only.evaluate(0, 1), Error);
  EXPECT_THROW(Engine(p, t, vm), Error);
}

TEST(Engine, VerdictJsonCarriesContributions) {
  World w(40);
  const auto e = w.engine();
  bool checked = false;
  e.scan_exhaustive(
      [&](const PairVerdict& v) {
        if (checked) return;
        const auto j = verdict_to_json(v);
        double s = j["intercept"].get<double>();
        for (const auto& [_, c] : j["contributions"].items()) s += c.get<double>();
        EXPECT_NEAR(s, j["score"].get<double>(), 1e-9);
        checked = true;
      },
      {Emit::unblocked});
  EXPECT_TRUE(checked);
}
