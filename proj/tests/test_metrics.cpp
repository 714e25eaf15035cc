#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace casematch;

namespace {

// Published precision-run rows: model, reports, pairs compared, predicted, true positives.
const std::vector<PrecisionRow> kPublished = {
    {"2017", 26.9e6, 22.2e9, 100, 41, std::nullopt},
    {"drugs", 26.9e6, 20.5e9, 100, 54, std::nullopt},
    {"vaccines", 1.8e6, 3.2e9, 100, 92, std::nullopt},
};

std::vector<int> expand(int same_yes, int a_yes_b_no, int a_no_b_yes, int same_no, bool first) {
  std::vector<int> out;
  auto push = [&](int n, int a, int b) {
    for (int k = 0; k < n; ++k) out.push_back(first ? a : b);
  };
  push(same_yes, 1, 1);
  push(a_yes_b_no, 1, 0);
  push(a_no_b_yes, 0, 1);
  push(same_no, 0, 0);
  return out;
}

}  // namespace

TEST(Metrics, PublishedPrecisionRowsReproduce) {
  const double precision[] = {0.41, 0.54, 0.92};
  const double per_billion[] = {1.85, 2.63, 28.75};
  const double per_report[] = {0.05, 0.07, 0.05};
  for (std::size_t k = 0; k < kPublished.size(); ++k) {
    const auto& r = kPublished[k];
    EXPECT_DOUBLE_EQ(r.precision(), precision[k]);
    EXPECT_NEAR(r.tp_per_billion(), per_billion[k], 0.01);
    EXPECT_NEAR(r.expected_per_report(), per_report[k], 0.005);
  }
  EXPECT_NEAR(expected_duplicates_per_report(41, 22.2e9, 26.9e6), 0.0497, 1e-4);
  EXPECT_NEAR(expected_duplicates_per_report(54, 20.5e9, 26.9e6), 0.0709, 1e-4);
}

TEST(Metrics, PossiblePairsOfPublishedCountries) {
  EXPECT_NEAR(possible_pairs(19042) / 1e6, 181.3, 0.05);
  EXPECT_NEAR(possible_pairs(4363) / 1e6, 9.5, 0.05);
  EXPECT_NEAR(possible_pairs(1004) / 1e6, 0.5, 0.05);
  EXPECT_EQ(possible_pairs(2), 1.0);
}

TEST(Metrics, WaldIntervalWorkedExample) {
  const auto ci = wald_ci(0.41, 100);
  EXPECT_NEAR(ci.lower, 0.3136, 1e-4);
  EXPECT_NEAR(ci.upper, 0.5064, 1e-4);
  EXPECT_NEAR(normal_quantile_two_sided(0.95), 1.959964, 1e-6);
  EXPECT_NEAR(normal_quantile_two_sided(0.99), 2.575829, 1e-6);
  EXPECT_THROW(wald_ci(1.2, 10), Error);
  EXPECT_THROW(wald_ci(0.5, 0), Error);
}

TEST(Metrics, WaldIntervalProperties) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const double p = u(rng);
    const std::uint64_t n = 1 + rng() % 5000;
    const auto ci = wald_ci(p, n), wide = wald_ci(p, n, 0.99), more = wald_ci(p, n * 4);
    ASSERT_LE(0.0, ci.lower);
    ASSERT_LE(ci.lower, p);
    ASSERT_LE(p, ci.upper);
    ASSERT_LE(ci.upper, 1.0);
    ASSERT_LE(wide.lower, ci.lower + 1e-15);
    ASSERT_GE(wide.upper, ci.upper - 1e-15);
    ASSERT_LE(more.upper - more.lower, ci.upper - ci.lower + 1e-15);
  }
}

TEST(Metrics, KappaWorkedExample) {
  const auto a = expand(40, 10, 5, 45, true), b = expand(40, 10, 5, 45, false);
  EXPECT_NEAR(cohen_kappa(a, b), 0.7, 1e-12);
}

TEST(Metrics, KappaProperties) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(rng() % 3);
    for (auto& v : b) v = static_cast<int>(rng() % 3);
    a[0] = 0;
    a[1] = 1;
    EXPECT_NEAR(cohen_kappa(a, a), 1.0, 1e-12);
    double k = 0;
    try {
      k = cohen_kappa(a, b);
    } catch (const Error&) {
      continue;
    }
    EXPECT_NEAR(k, cohen_kappa(b, a), 1e-12);
    EXPECT_LE(k, 1.0 + 1e-12);
    EXPECT_GE(k, -1.0 - 1e-12);
  }
  EXPECT_THROW(cohen_kappa(std::vector<int>{1, 1}, std::vector<int>{1, 1}), Error);
  EXPECT_THROW(cohen_kappa(std::vector<int>{1}, std::vector<int>{1, 0}), Error);
  EXPECT_THROW(cohen_kappa(std::vector<int>{}, std::vector<int>{}), Error);
}

TEST(Metrics, ScalarFormulasRejectEmptyDenominators) {
  EXPECT_THROW(precision(0, 0), Error);
  EXPECT_THROW(recall(0, 0), Error);
  EXPECT_DOUBLE_EQ(recall(3, 1), 0.75);
  EXPECT_THROW(expected_duplicates_per_report(1, 0, 10), Error);
  EXPECT_THROW(expected_duplicates_per_report(1, 10, 1), Error);
  EXPECT_THROW(true_positives_per_billion(1, 0), Error);
  EvalCounts bad;
  bad.predicted = 5;
  bad.true_positives = 1;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(PrecisionRow, JsonAndValidation) {
  const auto j = kPublished[0].to_json();
  EXPECT_DOUBLE_EQ(j["precision"].get<double>(), 0.41);
  const auto back = PrecisionRow::from_json(j);
  EXPECT_EQ(back.true_positives, 41u);
  try {
    PrecisionRow::from_json(json{{"model", "x"}, {"predicted", 3}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("n_reports pairs_compared true_positives"), std::string::npos) << e.what();
  }
  PrecisionRow over = kPublished[0];
  over.true_positives = 101;
  EXPECT_THROW(over.validate(), Error);
  PrecisionRow none = kPublished[0];
  none.predicted = 0;
  none.true_positives = 0;
  EXPECT_THROW(none.validate(), Error);
}

TEST(PrecisionRow, FromRunRecordCountsTruth) {
  RunRecord run;
  run.model_id = "drug-model";
  run.n_reports = 1000;
  run.pairs_consumed = 50000;
  run.suspected = {{"a", "b", 1, 0, "", {}}, {"d", "c", 2, 0, "", {}}, {"e", "f", 3, 0, "", {}}};
  TruthIndex t;
  t.add("a", "b", Label::duplicate);
  t.add("c", "d", Label::otherwise_related);
  const auto r = precision_row(run, t);
  EXPECT_EQ(r.true_positives, 1u);
  EXPECT_EQ(*r.related_positives, 2u);
  EXPECT_EQ(r.predicted, 3u);
  EXPECT_NEAR(r.expected_per_report(), 1.0 / 50000 * 999, 1e-12);
  run.suspected.clear();
  EXPECT_THROW(precision_row(run, t), Error);
}

TEST(Rendering, PrecisionTableShowsRoundedColumns) {
  const auto text = render_precision_table(kPublished);
  EXPECT_NE(text.find("0.41"), std::string::npos);
  EXPECT_NE(text.find("28.75"), std::string::npos);
  EXPECT_NE(text.find("22.2"), std::string::npos);
  EXPECT_NE(text.find("True duplicates detected per report"), std::string::npos);
}

TEST(Rendering, CountryComparisonShowsFractions) {
  CountryComparison c;
  c.country = "B";
  c.n_reports = 4363;
  c.baseline = {3503, 1969, 15, 0};
  c.model = {4243, 137, 15, 13};
  const std::vector<CountryComparison> cols{c};
  const auto text = render_country_comparison(cols);
  EXPECT_NE(text.find("9.5"), std::string::npos);
  EXPECT_NE(text.find("13/15"), std::string::npos);
  EXPECT_NE(text.find("0/15"), std::string::npos);
  EXPECT_EQ(c.to_json()["model"]["precision_fraction"], "13/15");
}
