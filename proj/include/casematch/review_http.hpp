#pragma once

// HTTP+JSON front end for ReviewSession.

#include <httplib.h>

#include "casematch/review.hpp"

namespace casematch {

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace detail

/// Registers the review endpoints on `server`. `session` must outlive it.
inline void register_review_routes(httplib::Server& server, ReviewSession& session) {
  using detail::send_error;
  using detail::send_json;

  server.Get("/api/queue/next", [&session](const httplib::Request& req, httplib::Response& res) {
    const auto annotator = req.get_param_value("annotator");
    if (annotator.empty()) return send_error(res, 400, "query parameter 'annotator' is required");
    auto item = session.next(annotator);
    if (!item) return send_json(res, 200, {{"item", nullptr}, {"done", true}});
    send_json(res, 200, {{"item", *item}, {"done", false}});
  });

  server.Post("/api/labels", [&session](const httplib::Request& req, httplib::Response& res) {
    Annotation a;
    try {
      a = Annotation::from_json(json::parse(req.body));
    } catch (const json::exception& e) {
      return send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const Error& e) {
      return send_error(res, 400, e.what());
    }
    switch (session.submit(a)) {
      case SubmitResult::unknown_pair: return send_error(res, 404, "pair " + a.id_a + "/" + a.id_b + " is not in the run");
      case SubmitResult::replaced: return send_json(res, 200, {{"status", "replaced"}});
      case SubmitResult::created: return send_json(res, 201, {{"status", "created"}});
    }
  });

  server.Get(R"(/api/pairs/([^/]+)/([^/]+))", [&session](const httplib::Request& req, httplib::Response& res) {
    auto detail = session.pair_detail(req.matches[1], req.matches[2]);
    if (!detail) return send_error(res, 404, "pair is not in the run");
    send_json(res, 200, *detail);
  });

  server.Get("/api/stats", [&session](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, session.stats());
  });

  server.Get("/api/export", [&session](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, session.export_json());
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, e.kind() == ErrorKind::usage ? 400 : 500, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
}

}  // namespace casematch
