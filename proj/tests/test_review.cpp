#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <thread>

#include "review_fixture.hpp"

using namespace casematch;
using casematch::testing::ReviewFixture;

TEST(ReviewLabel, NamesAndTrainingMapping) {
  for (auto l : {ReviewLabel::non_duplicate, ReviewLabel::possible_duplicate, ReviewLabel::otherwise_related})
    EXPECT_EQ(parse_review_label(to_string(l)), l);
  EXPECT_FALSE(parse_review_label("duplicate"));
  EXPECT_EQ(to_training_label(ReviewLabel::possible_duplicate), Label::duplicate);
  EXPECT_EQ(to_training_label(ReviewLabel::otherwise_related), Label::otherwise_related);
  EXPECT_EQ(to_training_label(ReviewLabel::non_duplicate), Label::non_duplicate);
}

TEST(Annotation, ParsingRejectsMalformedInput) {
  const json ok = {{"id_a", "a"}, {"id_b", "b"}, {"label", "non_duplicate"}, {"annotator", "x"}};
  EXPECT_NO_THROW(Annotation::from_json(ok));
  for (const char* k : {"id_a", "id_b", "label", "annotator"}) {
    auto j = ok;
    j.erase(k);
    EXPECT_THROW(Annotation::from_json(j), Error) << k;
  }
  auto j = ok;
  j["label"] = "maybe";
  EXPECT_THROW(Annotation::from_json(j), Error);
  j = ok;
  j["annotator"] = "";
  EXPECT_THROW(Annotation::from_json(j), Error);
  j = ok;
  j["note"] = 5;
  EXPECT_THROW(Annotation::from_json(j), Error);
  EXPECT_THROW(Annotation::from_json(json::array()), Error);
}

TEST(AnnotationLog, ReplayRestoresEffectiveView) {
  ReviewFixture f(5, "replay");
  {
    AnnotationLog log(f.log_path);
    EXPECT_FALSE(log.append(f.label(0, ReviewLabel::non_duplicate, "x")));
    EXPECT_FALSE(log.append(f.label(1, ReviewLabel::possible_duplicate, "x")));
    EXPECT_TRUE(log.append(f.label(0, ReviewLabel::possible_duplicate, "x")));
    EXPECT_FALSE(log.append(f.label(0, ReviewLabel::non_duplicate, "y")));
  }
  const AnnotationLog again(f.log_path);
  ASSERT_EQ(again.effective().size(), 3u);
  EXPECT_EQ(again.effective()[0].label, ReviewLabel::possible_duplicate);  // latest, first position
  EXPECT_EQ(again.effective()[0].annotator, "x");
  EXPECT_EQ(again.find(f.run.suspected[0].id_b, f.run.suspected[0].id_a, "y")->label, ReviewLabel::non_duplicate);

  std::ofstream(f.log_path, std::ios::app) << "{broken\n";
  EXPECT_THROW(AnnotationLog{f.log_path}, Error);
}

TEST(AnnotationsToTraining, AuthoritativeAnnotatorWinsElseFirst) {
  ReviewFixture f(3, "authority");
  std::vector<Annotation> log = {f.label(0, ReviewLabel::non_duplicate, "x"),
                                 f.label(0, ReviewLabel::possible_duplicate, "boss"),
                                 f.label(1, ReviewLabel::possible_duplicate, "x"),
                                 f.label(1, ReviewLabel::otherwise_related, "y")};
  const auto plain = annotations_to_training(log);
  ASSERT_EQ(plain.size(), 2u);
  EXPECT_EQ(plain[0].label, Label::non_duplicate);
  EXPECT_EQ(plain[1].label, Label::duplicate);
  const auto ruled = annotations_to_training(log, "boss");
  EXPECT_EQ(ruled[0].label, Label::duplicate);
  EXPECT_EQ(ruled[0].annotator, "boss");
  EXPECT_LT(ruled[0].id_a, ruled[0].id_b);
}

TEST(ReviewSession, QueueServesEachPairOncePerAnnotator) {
  ReviewFixture f(6, "queue");
  ReviewSession s(f.run, f.corpus, AnnotationLog(f.log_path));
  s.submit(f.label(2, ReviewLabel::non_duplicate, "x"));
  std::vector<std::string> served;
  while (auto item = s.next("x")) served.push_back((*item)["id_a"]);
  EXPECT_EQ(served.size(), 5u);  // pair 2 was already labelled by x
  EXPECT_EQ(std::count(served.begin(), served.end(), f.run.suspected[2].id_a), 0);
  std::size_t for_y = 0;
  while (s.next("y")) ++for_y;
  EXPECT_EQ(for_y, 6u);
  EXPECT_THROW(s.next(""), Error);
}

TEST(ReviewSession, ConcurrentAnnotatorsNeverShareALease) {
  ReviewFixture f(200, "concurrent");
  ReviewSession s(f.run, f.corpus, AnnotationLog(f.log_path));
  std::vector<std::vector<std::string>> got(4);
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t)
      pool.emplace_back([&, t] {
        // Two threads share each annotator name.
        const std::string who = t % 2 ? "odd" : "even";
        while (auto item = s.next(who)) got[static_cast<std::size_t>(t)].push_back((*item)["id_a"]);
      });
  }
  for (int who = 0; who < 2; ++who) {
    std::multiset<std::string> all(got[who].begin(), got[who].end());
    all.insert(got[who + 2].begin(), got[who + 2].end());
    EXPECT_EQ(all.size(), 200u);
    EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), 200u);
  }
}

TEST(ReviewSession, SubmitFillsMetadataAndRejectsUnknownPairs) {
  ReviewFixture f(3, "submit");
  ReviewSession s(f.run, f.corpus, AnnotationLog(f.log_path));
  EXPECT_EQ(s.submit(f.label(0, ReviewLabel::non_duplicate, "x")), SubmitResult::created);
  EXPECT_EQ(s.submit(f.label(0, ReviewLabel::possible_duplicate, "x")), SubmitResult::replaced);
  auto bad = f.label(0, ReviewLabel::non_duplicate, "x");
  bad.id_b = "nope";
  EXPECT_EQ(s.submit(bad), SubmitResult::unknown_pair);
  const auto stored = s.annotations().at(0);
  EXPECT_EQ(stored.model_id, "drug-model");
  EXPECT_EQ(stored.timestamp.size(), 20u);  // YYYY-MM-DDTHH:MM:SSZ
  EXPECT_EQ(stored.timestamp.back(), 'Z');
  const auto detail = s.pair_detail(f.run.suspected[0].id_b, f.run.suspected[0].id_a);
  ASSERT_TRUE(detail);
  EXPECT_EQ((*detail)["status"], "labelled");
  EXPECT_EQ((*detail)["annotations"].size(), 1u);
  EXPECT_EQ((*detail)["report_a"]["id"], f.run.suspected[0].id_a);
  EXPECT_FALSE(s.pair_detail("nope", "x"));
}

TEST(ReviewSession, StatsPrecisionAndKappa) {
  ReviewFixture f(100, "stats");
  ReviewSession s(f.run, f.corpus, AnnotationLog(f.log_path));
  std::vector<std::string> xa, yb;
  for (std::size_t k = 0; k < 100; ++k) {
    const auto lx = k < 41 ? ReviewLabel::possible_duplicate : ReviewLabel::non_duplicate;
    s.submit(f.label(k, lx, "x"));
    if (k % 2 == 0) {
      const auto ly = k % 6 == 0 ? ReviewLabel::otherwise_related : lx;
      s.submit(f.label(k, ly, "y"));
      xa.emplace_back(to_string(lx));
      yb.emplace_back(to_string(ly));
    }
  }
  const auto st = s.stats();
  EXPECT_EQ(st["labelled_pairs"], 100);
  EXPECT_EQ(st["annotations"], 150);
  EXPECT_DOUBLE_EQ(st["precision"]["value"].get<double>(), 0.41);
  EXPECT_NEAR(st["precision"]["ci"][0].get<double>(), 0.3136, 1e-4);
  EXPECT_NEAR(st["precision"]["ci"][1].get<double>(), 0.5064, 1e-4);
  EXPECT_NEAR(st["kappa"].get<double>(), cohen_kappa(xa, yb), 1e-12);
  EXPECT_EQ(st["kappa_pairs"][0]["overlap"], 50);
}

TEST(ReviewSession, RejectsRunsOutsideTheCorpus) {
  ReviewFixture f(2, "outside");
  auto run = f.run;
  run.suspected[0].id_b = "missing";
  EXPECT_THROW(ReviewSession(run, f.corpus, AnnotationLog{}), Error);
}
