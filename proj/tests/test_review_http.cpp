#include <gtest/gtest.h>

#include "casematch/review_http.hpp"
#include "review_fixture.hpp"

using namespace casematch;
using casematch::testing::ReviewFixture;

namespace {

// A session served on an ephemeral localhost port for the lifetime of the object.
struct LiveServer {
  ReviewFixture fixture;
  ReviewSession session;
  httplib::Server server;
  int port = 0;
  std::thread thread;

  explicit LiveServer(std::size_t n_pairs)
      : fixture(n_pairs, "http"), session(fixture.run, fixture.corpus, AnnotationLog(fixture.log_path)) {
    register_review_routes(server, session);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }

  static std::string body(const Annotation& a) { return a.to_json().dump(); }
};

}  // namespace

TEST(ReviewHttp, QueueRequiresAnnotatorAndDrains) {
  LiveServer s(3);
  auto c = s.client();
  auto r = c.Get("/api/queue/next");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  EXPECT_TRUE(json::parse(r->body).contains("error"));
  for (int k = 0; k < 3; ++k) {
    r = c.Get("/api/queue/next?annotator=x");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->status, 200);
    const auto j = json::parse(r->body);
    EXPECT_FALSE(j["done"].get<bool>());
    EXPECT_TRUE(j["item"].contains("id_a"));
  }
  r = c.Get("/api/queue/next?annotator=x");
  EXPECT_TRUE(json::parse(r->body)["done"].get<bool>());
}

TEST(ReviewHttp, LabelStatusCodes) {
  LiveServer s(3);
  auto c = s.client();
  const auto a = s.fixture.label(0, ReviewLabel::non_duplicate, "x");
  auto r = c.Post("/api/labels", LiveServer::body(a), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);
  auto again = a;
  again.label = ReviewLabel::possible_duplicate;
  r = c.Post("/api/labels", LiveServer::body(again), "application/json");
  EXPECT_EQ(r->status, 200);
  auto unknown = a;
  unknown.id_b = "nope";
  r = c.Post("/api/labels", LiveServer::body(unknown), "application/json");
  EXPECT_EQ(r->status, 404);
  r = c.Post("/api/labels", "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  r = c.Post("/api/labels", R"({"id_a":"a","id_b":"b","label":"maybe","annotator":"x"})", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(s.session.annotations().size(), 1u);
}

TEST(ReviewHttp, PairDetailStatsAndExport) {
  LiveServer s(10);
  auto c = s.client();
  std::vector<std::string> xs, ys;
  for (std::size_t k = 0; k < 10; ++k) {
    const auto lx = k < 4 ? ReviewLabel::possible_duplicate : ReviewLabel::non_duplicate;
    const auto ly = k == 3 || k == 7 ? ReviewLabel::otherwise_related : lx;
    ASSERT_EQ(c.Post("/api/labels", LiveServer::body(s.fixture.label(k, lx, "x")), "application/json")->status, 201);
    ASSERT_EQ(c.Post("/api/labels", LiveServer::body(s.fixture.label(k, ly, "y")), "application/json")->status, 201);
    xs.emplace_back(to_string(lx));
    ys.emplace_back(to_string(ly));
  }
  const auto& p = s.fixture.run.suspected[0];
  auto r = c.Get(("/api/pairs/" + p.id_b + "/" + p.id_a).c_str());
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["annotations"].size(), 2u);
  EXPECT_EQ(c.Get("/api/pairs/nope/other")->status, 404);

  r = c.Get("/api/stats");
  ASSERT_EQ(r->status, 200);
  const auto st = json::parse(r->body);
  EXPECT_NEAR(st["kappa"].get<double>(), cohen_kappa(xs, ys), 1e-12);
  EXPECT_EQ(st["precision"]["true_positives"], 4);

  r = c.Get("/api/export");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body).size(), 20u);
}
