#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace casematch;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> draw(RandomPairStream& s, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(s.next());
  return out;
}

// Flags every pair whose indices sum to a multiple of `m`.
auto modulo_classifier(std::size_t m) {
  return [m](std::size_t i, std::size_t j) -> std::optional<FlaggedPair> {
    if ((i + j) % m) return std::nullopt;
    FlaggedPair f;
    f.id_a = std::to_string(i);
    f.id_b = std::to_string(j);
    f.model = "toy";
    return f;
  };
}

}  // namespace

TEST(PairStream, SameSeedSamePairsDifferentSeedDifferentPairs) {
  RandomPairStream a(1000, 7, 50), b(1000, 7, 50), c(1000, 8, 50);
  const auto pa = draw(a, 500);
  EXPECT_EQ(pa, draw(b, 500));
  EXPECT_NE(pa, draw(c, 500));
}

TEST(PairStream, PairsAreDistinctOrderedAndInRange) {
  RandomPairStream s(5, 3, 17);
  for (const auto& [i, j] : draw(s, 5000)) {
    ASSERT_LT(i, j);
    ASSERT_LT(j, 5u);
  }
}

TEST(PairStream, RoughlyUniformOverUnorderedPairs) {
  RandomPairStream s(6, 11, 1000);
  std::map<std::pair<std::size_t, std::size_t>, int> hist;
  const int draws = 150000;
  for (const auto& p : draw(s, draws)) ++hist[p];
  ASSERT_EQ(hist.size(), 15u);
  for (const auto& [_, c] : hist) EXPECT_NEAR(c, draws / 15.0, 5 * std::sqrt(draws / 15.0));
}

TEST(PairStream, AnyBatchRegeneratesIndependently) {
  RandomPairStream s(300, 99, 40);
  const auto all = draw(s, 200);
  auto b3 = s.batch(3);
  for (std::size_t k = 0; k < 40; ++k) EXPECT_EQ(*b3.next(), all[120 + k]);
  EXPECT_FALSE(b3.next());

  RandomPairStream claimed(300, 99, 40);
  auto first = claimed.claim_batch(), second = claimed.claim_batch();
  EXPECT_EQ(first.index(), 0u);
  EXPECT_EQ(*second.next(), all[40]);
  EXPECT_EQ(claimed.consumed(), 80u);
}

TEST(PairStream, ResumeContinuesWhereConsumptionStopped) {
  RandomPairStream s(300, 5, 30);
  const auto all = draw(s, 150);
  RandomPairStream r(300, 5, 30);
  r.resume(77);
  EXPECT_EQ(r.consumed(), 77u);
  EXPECT_EQ(draw(r, 73), std::vector(all.begin() + 77, all.end()));
}

TEST(PairStream, RejectsDegenerateConfiguration) {
  EXPECT_THROW(RandomPairStream(1, 1), Error);
  EXPECT_THROW(RandomPairStream(10, 1, 0), Error);
}

TEST(PrecisionRun, StopsAtExactlyKFlaggedPairs) {
  for (std::uint64_t k : {1u, 5u, 40u}) {
    RandomPairStream s(400, 13, 64);
    const auto rec = precision_run(s, "toy", modulo_classifier(7), k);
    EXPECT_TRUE(rec.complete);
    ASSERT_EQ(rec.suspected.size(), k);
    // The last pair consumed is the k-th flagged one.
    EXPECT_EQ(rec.suspected.back().ordinal + 1, rec.pairs_consumed);
    std::uint64_t sum_pairs = 0, sum_flags = 0;
    for (const auto& b : rec.batches) sum_pairs += b.pairs, sum_flags += b.suspected;
    EXPECT_EQ(sum_pairs, rec.pairs_consumed);
    EXPECT_EQ(sum_flags, k);
  }
}

TEST(PrecisionRun, OrdinalsLocateFlaggedPairsInTheStream) {
  RandomPairStream s(400, 21, 50);
  const auto rec = precision_run(s, "toy", modulo_classifier(5), 30);
  RandomPairStream replay(400, 21, 50);
  const auto all = draw(replay, rec.pairs_consumed);
  for (const auto& f : rec.suspected) {
    const auto [i, j] = all[f.ordinal];
    EXPECT_EQ(f.id_a, std::to_string(i));
    EXPECT_EQ(f.id_b, std::to_string(j));
  }
}

TEST(PrecisionRun, PairCapLeavesRecordIncomplete) {
  RandomPairStream s(400, 21, 50);
  const auto rec = precision_run(s, "toy", modulo_classifier(1000000), 10, 500);
  EXPECT_FALSE(rec.complete);
  EXPECT_EQ(rec.pairs_consumed, 500u);
  EXPECT_THROW(precision_run(s, "toy", modulo_classifier(3), 0), Error);
}

TEST(PrecisionRun, RecordJsonRoundTrip) {
  RandomPairStream s(400, 2, 50);
  const auto rec = precision_run(s, "toy", modulo_classifier(9), 12);
  const auto back = RunRecord::from_json(rec.to_json());
  EXPECT_EQ(back.suspected, rec.suspected);
  EXPECT_EQ(back.batches, rec.batches);
  EXPECT_EQ(back.pairs_consumed, rec.pairs_consumed);
  EXPECT_EQ(back.to_json(), rec.to_json());
}
