#pragma once

// Shared fixtures: a toy ontology and a fluent report builder that goes
// through the real JSON ingestion path.

#include <random>
#include <string>
#include <vector>

#include "casematch/casematch.hpp"

namespace casematch::testing {

/// Substances S00..S19 (S18, S19 are vaccines, ATC J07...), preferred terms
/// P00..P29 spread over SOCs C0..C4 (PTk -> C(k % 5)).
inline Ontology toy_ontology() {
  std::map<std::string, std::vector<std::string>> drugs;
  for (int s = 0; s < 20; ++s) {
    char code[8], atc[16];
    std::snprintf(code, sizeof code, "S%02d", s);
    if (s >= 18) std::snprintf(atc, sizeof atc, "J07BX%02d", s);
    else std::snprintf(atc, sizeof atc, "N02BE%02d", s);
    drugs[code] = {atc};
  }
  std::map<std::string, std::string> events;
  for (int p = 0; p < 30; ++p) {
    char code[8];
    std::snprintf(code, sizeof code, "P%02d", p);
    events[code] = "C" + std::to_string(p % 5);
  }
  return Ontology(std::move(drugs), std::move(events));
}

class ReportBuilder {
 public:
  explicit ReportBuilder(std::string id, std::string country = "GB") {
    j_ = {{"id", std::move(id)}, {"country", std::move(country)}};
  }

  ReportBuilder& sex(const std::string& s) { return set("sex", s); }
  ReportBuilder& age_days(int lo, int hi) {
    j_["age_days_lo"] = lo;
    j_["age_days_hi"] = hi;
    return *this;
  }
  ReportBuilder& age_years(int y) { return age_days(y * 365, y * 365 + 364); }
  ReportBuilder& drug(const std::string& substance, const std::string& role = "suspected") {
    const char* atc = substance >= "S18" ? "J07BX" : "N02BE";
    j_["drugs"].push_back({{"substance", substance}, {"atc", std::string(atc) + substance.substr(1)}, {"role", role}});
    return *this;
  }
  ReportBuilder& event(const std::string& pt) {
    j_["events"].push_back({{"pt", pt}});
    return *this;
  }
  ReportBuilder& onset(const std::string& start, const std::string& end = {}) {
    json d = {{"kind", "event_onset"}, {"start", start}};
    if (!end.empty()) d["end"] = end;
    j_["dates"].push_back(d);
    return *this;
  }
  ReportBuilder& date(const std::string& kind, const std::string& start) {
    j_["dates"].push_back({{"kind", kind}, {"start", start}});
    return *this;
  }
  ReportBuilder& narrative(const std::string& text) { return set("narrative", text); }
  ReportBuilder& outcome(const std::string& o) { return set("outcome", o); }
  ReportBuilder& ids(const std::string& a1_0_1, const std::string& a1_11_2 = {}) {
    j_["ids"]["a1_0_1"] = a1_0_1;
    if (!a1_11_2.empty()) j_["ids"]["a1_11_2"] = a1_11_2;
    return *this;
  }

  const json& to_json() const { return j_; }
  Report build(const Ontology& o) const { return parse_report(j_, o); }

 private:
  ReportBuilder& set(const char* k, const std::string& v) {
    j_[k] = v;
    return *this;
  }
  json j_;
};

inline Corpus corpus_of(const Ontology& o, const std::vector<ReportBuilder>& builders) {
  std::vector<Report> reports;
  for (const auto& b : builders) reports.push_back(b.build(o));
  return Corpus(std::move(reports));
}

/// Random reports over the toy ontology; each shares vocabulary with its
/// neighbours often enough to pass blocking now and then.
inline Corpus random_corpus(const Ontology& o, std::size_t n, std::uint64_t seed,
                            const std::vector<std::string>& countries = {"GB", "US", "UG"}) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  std::vector<Report> reports;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "R%05zu", i);
    ReportBuilder b(id, countries[static_cast<std::size_t>(pick(0, static_cast<int>(countries.size()) - 1))]);
    b.sex(pick(0, 9) == 0 ? "unknown" : (pick(0, 1) ? "female" : "male"));
    if (pick(0, 4)) b.age_years(pick(1, 90));
    const int nd = pick(1, 3), ne = pick(1, 3);
    for (int k = 0; k < nd; ++k) {
      char s[8];
      std::snprintf(s, sizeof s, "S%02d", pick(0, 19));
      b.drug(s);
    }
    for (int k = 0; k < ne; ++k) {
      char p[8];
      std::snprintf(p, sizeof p, "P%02d", pick(0, 29));
      b.event(p);
    }
    if (pick(0, 5)) {
      char d[16];
      std::snprintf(d, sizeof d, "%04d-%02d-%02d", pick(2015, 2022), pick(1, 12), pick(1, 28));
      b.onset(d);
    }
    reports.push_back(b.build(o));
  }
  return Corpus(std::move(reports));
}

inline std::string fixture_path(const std::string& rel) {
  return std::string(CASEMATCH_SOURCE_DIR) + "/" + rel;
}

}  // namespace casematch::testing
