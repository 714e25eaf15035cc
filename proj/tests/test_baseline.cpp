#include <gtest/gtest.h>

#include "support.hpp"

using namespace casematch;
using casematch::testing::corpus_of;
using casematch::testing::random_corpus;
using casematch::testing::ReportBuilder;
using casematch::testing::toy_ontology;

TEST(Baseline, ThresholdIsMeanOfDuplicateScores) {
  const std::vector<double> s = {1.0, 2.0, 6.0};
  EXPECT_DOUBLE_EQ(mean_threshold(s), 3.0);
  EXPECT_THROW(mean_threshold(std::vector<double>{}), Error);
}

TEST(Baseline, FitUsesUnblockedDuplicatesOnly) {
  const auto o = toy_ontology();
  const auto c = random_corpus(o, 200, 4);
  const auto t = build_tables(c, o);
  const PreparedCorpus p(c, o, t);
  std::vector<std::pair<std::size_t, std::size_t>> dups;
  for (std::size_t i = 0; i + 1 < c.size() && dups.size() < 30; ++i) dups.emplace_back(i, i + 1);
  const auto m = fit_baseline(p, t, dups, HitMissParams{});
  const BaselineScorer scorer(t, m);
  std::vector<double> totals;
  for (const auto& [i, j] : dups)
    if (const auto b = scorer.score(p[i], p[j]); !b.blocked) totals.push_back(b.total);
  ASSERT_FALSE(totals.empty());
  EXPECT_NEAR(m.threshold, mean_threshold(totals), 1e-12);
  EXPECT_EQ(m.metadata["duplicates_scored"], totals.size());
}

TEST(Baseline, TotalIsSumOfComponentsWithUncappedGlobalCompensation) {
  const auto o = toy_ontology();
  const auto c = random_corpus(o, 300, 12);
  const auto t = build_tables(c, o, 50);
  const PreparedCorpus p(c, o, t);
  BaselineModel m;
  const BaselineScorer scorer(t, m);
  const FeatureScorer fs(t, m.params);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < 80; ++i)
    for (std::size_t j = i + 1; j < 80; ++j) {
      const auto b = scorer.score(p[i], p[j]);
      if (b.blocked) continue;
      ++checked;
      ASSERT_NEAR(b.total, b.sex + b.country + b.outcome + b.age + b.onset + b.drug_event.value(), 1e-12);
      ASSERT_EQ(b.drug_event.compensation, b.drug_event.compensation_raw);
      const auto global = fs.drug_event_in_slot(p[i], p[j], kGlobalSlot, CompensationMode::uncapped);
      ASSERT_NEAR(b.drug_event.value(), global.value(), 1e-12);
      ASSERT_EQ(b.gate_passed, b.age + b.sex + b.onset > 0.0);
    }
  EXPECT_GT(checked, 0u);
}

TEST(Baseline, GateIsStrict) {
  const auto o = toy_ontology();
  // Nothing demographic is recorded: the gate sum is exactly 0 and fails.
  const auto c = corpus_of(o, {ReportBuilder("a").drug("S01").event("P00"), ReportBuilder("b").drug("S01").event("P00")});
  const auto t = build_tables(c, o);
  const PreparedCorpus p(c, o, t);
  BaselineModel m;
  m.threshold = -100.0;
  const auto b = BaselineScorer(t, m).score(p[0], p[1]);
  EXPECT_EQ(b.gate_net, 0.0);
  EXPECT_FALSE(b.gate_passed);
  EXPECT_FALSE(b.suspected);
}

TEST(Baseline, ModelJsonRoundTrip) {
  BaselineModel m;
  m.threshold = 12.5;
  const auto back = BaselineModel::from_json(m.to_json());
  EXPECT_EQ(back.threshold, 12.5);
  auto j = m.to_json();
  j["kind"] = "drug";
  EXPECT_THROW(BaselineModel::from_json(j), Error);
}
