#pragma once

// Report data model, toy ontologies and corpus ingestion.
//
// Corpus files are JSON Lines, one report per line:
//   {"id", "country", "sex", "age_days_lo", "age_days_hi",
//    "drugs": [{"substance", "atc", "role"}], "events": [{"pt"}],
//    "dates": [{"start", "end", "kind"}], "narrative",
//    "ids": {"a1_0_1", "a1_10_1", "a1_10_2", "a1_11_2"}}
// plus an optional "outcome". Ontology files are JSON objects
//   {"drugs": {substance: [atc, ...]}, "events": {pt: soc}}.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "casematch/core.hpp"

namespace casematch {

using json = nlohmann::json;

enum class Sex : std::uint8_t { unknown, male, female };
enum class DrugRole : std::uint8_t { suspected, interacting, concomitant };
enum class DateSource : std::uint8_t { structured, narrative };
enum class DateKind : std::uint8_t { drug_start, drug_end, event_onset, event_end, other };

inline std::string_view to_string(Sex s) {
  switch (s) {
    case Sex::male: return "male";
    case Sex::female: return "female";
    default: return "unknown";
  }
}

inline std::string_view to_string(DrugRole r) {
  switch (r) {
    case DrugRole::suspected: return "suspected";
    case DrugRole::interacting: return "interacting";
    default: return "concomitant";
  }
}

inline std::string_view to_string(DateKind k) {
  switch (k) {
    case DateKind::drug_start: return "drug_start";
    case DateKind::drug_end: return "drug_end";
    case DateKind::event_onset: return "event_onset";
    case DateKind::event_end: return "event_end";
    default: return "other";
  }
}

inline std::optional<Sex> parse_sex(std::string_view s) {
  if (s == "male") return Sex::male;
  if (s == "female") return Sex::female;
  if (s == "unknown" || s.empty()) return Sex::unknown;
  return std::nullopt;
}

inline std::optional<DrugRole> parse_role(std::string_view s) {
  if (s == "suspected") return DrugRole::suspected;
  if (s == "interacting") return DrugRole::interacting;
  if (s == "concomitant") return DrugRole::concomitant;
  return std::nullopt;
}

inline std::optional<DateKind> parse_date_kind(std::string_view s) {
  if (s == "drug_start") return DateKind::drug_start;
  if (s == "drug_end") return DateKind::drug_end;
  if (s == "event_onset" || s == "onset") return DateKind::event_onset;
  if (s == "event_end") return DateKind::event_end;
  if (s == "other") return DateKind::other;
  return std::nullopt;
}

struct DateInterval {
  Day start;
  Day end;
  DateSource source = DateSource::structured;

  int uncertainty_days() const { return static_cast<int>((end - start).count()); }
  DayInterval as_day_interval() const { return {day_index(start), day_index(end)}; }

  friend bool operator==(const DateInterval&, const DateInterval&) = default;
};

struct DrugEntry {
  std::string substance;
  std::string atc;
  DrugRole role = DrugRole::suspected;
  std::uint32_t substance_index = 0;

  friend bool operator==(const DrugEntry&, const DrugEntry&) = default;
};

struct EventEntry {
  std::string pt;
  std::string soc;
  std::uint32_t pt_index = 0;
  std::uint32_t soc_index = 0;

  friend bool operator==(const EventEntry&, const EventEntry&) = default;
};

struct StructuredDate {
  DateKind kind = DateKind::other;
  DateInterval interval;

  friend bool operator==(const StructuredDate&, const StructuredDate&) = default;
};

/// E2B(R2) case identifiers: A.1.0.1, A.1.10.1, A.1.10.2, A.1.11.2.
struct SenderIds {
  std::optional<std::string> safety_report_id;
  std::optional<std::string> regulator_case_id;
  std::optional<std::string> other_case_id;
  std::optional<std::string> previous_transmission_id;

  friend bool operator==(const SenderIds&, const SenderIds&) = default;
};

/// Age bounds in integer days.
struct AgeInterval {
  std::int32_t lo_days = 0;
  std::int32_t hi_days = 0;

  DayInterval as_day_interval() const { return {lo_days, hi_days}; }
  friend bool operator==(const AgeInterval&, const AgeInterval&) = default;
};

struct Report {
  std::string id;
  std::string country;
  Sex sex = Sex::unknown;
  std::optional<AgeInterval> age;
  std::vector<DrugEntry> drugs;
  std::vector<EventEntry> events;
  std::vector<StructuredDate> dates;
  std::string narrative;
  std::optional<std::string> outcome;
  SenderIds ids;

  // Derived at ingestion.
  bool is_vaccine_report = false;
  std::optional<DateInterval> earliest_onset;

  friend bool operator==(const Report&, const Report&) = default;
};

inline bool is_vaccine_atc(std::string_view atc) { return atc.starts_with("J07"); }

/// A report is a vaccine report when a J07 product is suspected or
/// interacting. Missing ATC counts as non-J07.
inline bool derive_vaccine_flag(const Report& r) {
  return std::any_of(r.drugs.begin(), r.drugs.end(), [](const DrugEntry& d) {
    return is_vaccine_atc(d.atc) && d.role != DrugRole::concomitant;
  });
}

inline std::optional<DateInterval> derive_earliest_onset(const Report& r) {
  std::optional<DateInterval> best;
  for (const auto& d : r.dates) {
    if (d.kind != DateKind::event_onset) continue;
    if (!best || d.interval.start < best->start ||
        (d.interval.start == best->start && d.interval.end < best->end))
      best = d.interval;
  }
  return best;
}

enum class PairKind { drug_pair, vaccine_pair };

inline std::string_view to_string(PairKind k) {
  return k == PairKind::vaccine_pair ? "vaccine_pair" : "drug_pair";
}

inline PairKind classify_pair_kind(const Report& a, const Report& b) {
  return (a.is_vaccine_report || b.is_vaccine_report) ? PairKind::vaccine_pair
                                                      : PairKind::drug_pair;
}

/// Drug and event dictionaries. Codes are interned to dense indices in
/// lexicographic order, so the same file always yields the same indices.
/// Drugs and events also share one "item" index space used by the frequency
/// tables: drug items first, then event items.
class Ontology {
 public:
  Ontology() = default;

  Ontology(std::map<std::string, std::vector<std::string>> drugs,
           std::map<std::string, std::string> events) {
    for (auto& [substance, atcs] : drugs) {
      substance_ids_.emplace(substance, static_cast<std::uint32_t>(substances_.size()));
      substances_.push_back(substance);
      atcs_.push_back(std::move(atcs));
    }
    std::map<std::string, int> socs;
    for (const auto& [pt, soc] : events) socs.emplace(soc, 0);
    for (const auto& [soc, _] : socs) {
      soc_ids_.emplace(soc, static_cast<std::uint32_t>(socs_.size()));
      socs_.push_back(soc);
    }
    for (const auto& [pt, soc] : events) {
      pt_ids_.emplace(pt, static_cast<std::uint32_t>(pts_.size()));
      pts_.push_back(pt);
      pt_soc_.push_back(soc_ids_.at(soc));
    }
  }

  static Ontology from_json(const json& j) {
    if (!j.is_object() || !j.contains("drugs") || !j.contains("events"))
      throw data_error("ontology must be an object with 'drugs' and 'events'");
    std::map<std::string, std::vector<std::string>> drugs;
    for (const auto& [k, v] : j.at("drugs").items()) {
      if (!v.is_array()) throw data_error("ontology drug '" + k + "' must map to an ATC list");
      drugs[k] = v.get<std::vector<std::string>>();
    }
    std::map<std::string, std::string> events;
    for (const auto& [k, v] : j.at("events").items()) {
      if (!v.is_string()) throw data_error("ontology event '" + k + "' must map to a SOC code");
      events[k] = v.get<std::string>();
    }
    return Ontology(std::move(drugs), std::move(events));
  }

  static Ontology load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open ontology file '" + path + "'");
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw data_error("ontology file '" + path + "': " + e.what());
    }
  }

  json to_json() const {
    json drugs = json::object();
    for (std::size_t i = 0; i < substances_.size(); ++i) drugs[substances_[i]] = atcs_[i];
    json events = json::object();
    for (std::size_t i = 0; i < pts_.size(); ++i) events[pts_[i]] = socs_[pt_soc_[i]];
    return {{"drugs", drugs}, {"events", events}};
  }

  std::optional<std::uint32_t> substance_index(std::string_view code) const {
    return find(substance_ids_, code);
  }
  std::optional<std::uint32_t> pt_index(std::string_view code) const {
    return find(pt_ids_, code);
  }
  std::optional<std::uint32_t> soc_index(std::string_view code) const {
    return find(soc_ids_, code);
  }

  const std::string& substance_code(std::uint32_t i) const { return substances_.at(i); }
  const std::string& pt_code(std::uint32_t i) const { return pts_.at(i); }
  const std::string& soc_code(std::uint32_t i) const { return socs_.at(i); }
  const std::vector<std::string>& atc_codes(std::uint32_t substance) const {
    return atcs_.at(substance);
  }
  std::uint32_t soc_of(std::uint32_t pt) const { return pt_soc_.at(pt); }

  std::size_t substance_count() const { return substances_.size(); }
  std::size_t pt_count() const { return pts_.size(); }
  std::size_t soc_count() const { return socs_.size(); }

  std::uint32_t drug_item(std::uint32_t substance) const { return substance; }
  std::uint32_t event_item(std::uint32_t pt) const {
    return static_cast<std::uint32_t>(substances_.size()) + pt;
  }
  std::size_t item_count() const { return substances_.size() + pts_.size(); }
  bool is_drug_item(std::uint32_t item) const { return item < substances_.size(); }

  /// Stable textual item key, e.g. "drug:S001" or "event:P042".
  std::string item_code(std::uint32_t item) const {
    if (is_drug_item(item)) return "drug:" + substances_.at(item);
    return "event:" + pts_.at(item - substances_.size());
  }

  std::optional<std::uint32_t> item_from_code(std::string_view code) const {
    if (code.starts_with("drug:")) {
      auto s = substance_index(code.substr(5));
      if (s) return drug_item(*s);
    } else if (code.starts_with("event:")) {
      auto p = pt_index(code.substr(6));
      if (p) return event_item(*p);
    }
    return std::nullopt;
  }

 private:
  using Index = std::unordered_map<std::string, std::uint32_t>;

  static std::optional<std::uint32_t> find(const Index& idx, std::string_view code) {
    auto it = idx.find(std::string(code));
    if (it == idx.end()) return std::nullopt;
    return it->second;
  }

  std::vector<std::string> substances_;
  std::vector<std::vector<std::string>> atcs_;
  std::vector<std::string> pts_;
  std::vector<std::uint32_t> pt_soc_;
  std::vector<std::string> socs_;
  Index substance_ids_, pt_ids_, soc_ids_;
};

/// Optional ingestion filter, e.g. for COVID-19 vaccine exclusion.
struct CorpusOptions {
  std::vector<std::string> excluded_atc_prefixes;
  std::vector<std::string> excluded_substances;

  bool excludes(const Report& r) const {
    for (const auto& d : r.drugs) {
      if (std::find(excluded_substances.begin(), excluded_substances.end(), d.substance) !=
          excluded_substances.end())
        return true;
      for (const auto& p : excluded_atc_prefixes)
        if (!p.empty() && d.atc.starts_with(p)) return true;
    }
    return false;
  }
};

class Corpus {
 public:
  Corpus() = default;

  explicit Corpus(std::vector<Report> reports) : reports_(std::move(reports)) {
    for (std::size_t i = 0; i < reports_.size(); ++i) {
      if (!by_id_.emplace(reports_[i].id, i).second)
        throw data_error("duplicate report id '" + reports_[i].id + "'");
    }
  }

  std::size_t size() const { return reports_.size(); }
  bool empty() const { return reports_.empty(); }
  const Report& operator[](std::size_t i) const { return reports_[i]; }
  const std::vector<Report>& reports() const { return reports_; }
  auto begin() const { return reports_.begin(); }
  auto end() const { return reports_.end(); }

  std::optional<std::size_t> index_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  const Report& at(std::string_view id) const {
    auto i = index_of(id);
    if (!i) throw data_error("unknown report id '" + std::string(id) + "'");
    return reports_[*i];
  }

  /// Reports whose country equals `country`, order preserved.
  Corpus subset_by_country(std::string_view country) const {
    std::vector<Report> out;
    for (const auto& r : reports_)
      if (r.country == country) out.push_back(r);
    return Corpus(std::move(out));
  }

  friend bool operator==(const Corpus& a, const Corpus& b) { return a.reports_ == b.reports_; }

 private:
  std::vector<Report> reports_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

namespace detail {

inline std::optional<std::string> optional_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw data_error(std::string("field '") + key + "' must be a string");
  std::string s = it->get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

inline DateInterval parse_interval(const json& j, DateSource source) {
  const auto start = parse_day(j.at("start").get<std::string>());
  const auto end = j.contains("end") && !j.at("end").is_null()
                       ? parse_day(j.at("end").get<std::string>())
                       : start;
  if (end < start) throw data_error("date interval end precedes start");
  if (!in_global_range(start) || !in_global_range(end))
    throw data_error("date outside 1900-01-01..2050-12-31");
  return {start, end, source};
}

}  // namespace detail

/// Parses one report object and validates it against the ontology.
inline Report parse_report(const json& j, const Ontology& ontology) {
  if (!j.is_object()) throw data_error("report must be a JSON object");
  Report r;
  r.id = j.at("id").get<std::string>();
  if (r.id.empty()) throw data_error("report id must be nonempty");
  r.country = j.value("country", std::string{});

  const auto sex = parse_sex(j.value("sex", std::string{"unknown"}));
  if (!sex) throw data_error("report '" + r.id + "': unknown sex value");
  r.sex = *sex;

  const bool has_lo = j.contains("age_days_lo") && !j["age_days_lo"].is_null();
  const bool has_hi = j.contains("age_days_hi") && !j["age_days_hi"].is_null();
  if (has_lo != has_hi)
    throw data_error("report '" + r.id + "': age_days_lo and age_days_hi must both be present");
  if (has_lo) {
    AgeInterval age{j["age_days_lo"].get<std::int32_t>(), j["age_days_hi"].get<std::int32_t>()};
    if (age.lo_days > age.hi_days || age.lo_days < 0)
      throw data_error("report '" + r.id + "': invalid age interval");
    r.age = age;
  }

  for (const auto& d : j.value("drugs", json::array())) {
    DrugEntry e;
    e.substance = d.at("substance").get<std::string>();
    auto idx = ontology.substance_index(e.substance);
    if (!idx) throw data_error("unknown substance code '" + e.substance + "'");
    e.substance_index = *idx;
    e.atc = d.value("atc", std::string{});
    const auto role = parse_role(d.value("role", std::string{"suspected"}));
    if (!role) throw data_error("report '" + r.id + "': unknown drug role");
    e.role = *role;
    r.drugs.push_back(std::move(e));
  }

  for (const auto& ev : j.value("events", json::array())) {
    EventEntry e;
    e.pt = ev.at("pt").get<std::string>();
    auto idx = ontology.pt_index(e.pt);
    if (!idx) throw data_error("unknown preferred term code '" + e.pt + "'");
    e.pt_index = *idx;
    e.soc_index = ontology.soc_of(*idx);
    e.soc = ontology.soc_code(e.soc_index);
    r.events.push_back(std::move(e));
  }

  for (const auto& d : j.value("dates", json::array())) {
    StructuredDate sd;
    const auto kind = parse_date_kind(d.value("kind", std::string{"other"}));
    if (!kind) throw data_error("report '" + r.id + "': unknown date kind");
    sd.kind = *kind;
    sd.interval = detail::parse_interval(d, DateSource::structured);
    r.dates.push_back(sd);
  }

  r.narrative = j.value("narrative", std::string{});
  r.outcome = detail::optional_string(j, "outcome");

  if (auto it = j.find("ids"); it != j.end() && it->is_object()) {
    r.ids.safety_report_id = detail::optional_string(*it, "a1_0_1");
    r.ids.regulator_case_id = detail::optional_string(*it, "a1_10_1");
    r.ids.other_case_id = detail::optional_string(*it, "a1_10_2");
    r.ids.previous_transmission_id = detail::optional_string(*it, "a1_11_2");
  }

  r.is_vaccine_report = derive_vaccine_flag(r);
  r.earliest_onset = derive_earliest_onset(r);
  return r;
}

inline json report_to_json(const Report& r) {
  json j;
  j["id"] = r.id;
  j["country"] = r.country;
  j["sex"] = std::string(to_string(r.sex));
  if (r.age) {
    j["age_days_lo"] = r.age->lo_days;
    j["age_days_hi"] = r.age->hi_days;
  } else {
    j["age_days_lo"] = nullptr;
    j["age_days_hi"] = nullptr;
  }
  j["drugs"] = json::array();
  for (const auto& d : r.drugs)
    j["drugs"].push_back({{"substance", d.substance}, {"atc", d.atc},
                          {"role", std::string(to_string(d.role))}});
  j["events"] = json::array();
  for (const auto& e : r.events) j["events"].push_back({{"pt", e.pt}});
  j["dates"] = json::array();
  for (const auto& d : r.dates)
    j["dates"].push_back({{"start", format_day(d.interval.start)},
                          {"end", format_day(d.interval.end)},
                          {"kind", std::string(to_string(d.kind))}});
  j["narrative"] = r.narrative;
  if (r.outcome) j["outcome"] = *r.outcome;
  json ids = json::object();
  auto put = [&](const char* k, const std::optional<std::string>& v) {
    ids[k] = v ? json(*v) : json(nullptr);
  };
  put("a1_0_1", r.ids.safety_report_id);
  put("a1_10_1", r.ids.regulator_case_id);
  put("a1_10_2", r.ids.other_case_id);
  put("a1_11_2", r.ids.previous_transmission_id);
  j["ids"] = ids;
  return j;
}

/// Reads a JSON Lines corpus. Blank lines are skipped; errors carry the
/// 1-based line number.
inline Corpus parse_corpus(std::istream& in, const Ontology& ontology,
                           const CorpusOptions& options = {}) {
  std::vector<Report> reports;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Report r;
    try {
      r = parse_report(json::parse(line), ontology);
    } catch (const json::exception& e) {
      throw data_error("line " + std::to_string(line_no) + ": malformed report: " + e.what());
    } catch (const Error& e) {
      throw data_error("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(r.id).second)
      throw data_error("line " + std::to_string(line_no) + ": duplicate report id '" + r.id + "'");
    if (options.excludes(r)) continue;
    reports.push_back(std::move(r));
  }
  return Corpus(std::move(reports));
}

inline Corpus load_corpus(const std::string& path, const Ontology& ontology,
                          const CorpusOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open corpus file '" + path + "'");
  return parse_corpus(in, ontology, options);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus) out << report_to_json(r).dump() << '\n';
}

}  // namespace casematch
