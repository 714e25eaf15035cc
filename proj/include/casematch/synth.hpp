#pragma once

// Synthetic report corpora with planted duplicates and related pairs.
//
// Base reports draw drugs and events from per-country Zipf popularity over a
// country-specific rank permutation, so country rates diverge from the
// global ones. Duplicates copy a base report and perturb it according to
// their mechanism:
//   followup        same case re-sent with extra items and dates, sometimes
//                   carrying the original's id in A.1.11.2
//   multi_reporter  independent coding of the same case: items re-drawn at
//                   the recode rates, dates jittered, demographics dropped
//   literature      near copy published under another country
// Otherwise-related pairs share a reporter (same drugs, different patient)
// or an event (same drug, event and onset, different patient).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "casematch/pair_features.hpp"
#include "casematch/training.hpp"

namespace casematch {

struct CountryProfile {
  std::string name;
  double share = 0.0;
  double drug_skew = 1.1;   // Zipf exponent over substance ranks
  double event_skew = 1.0;  // Zipf exponent over PT ranks
  double vaccine_share = 0.1;
  double female_share = 0.5;
  double unknown_sex = 0.05;
  double age_missing = 0.15;
  double age_mean_years = 50.0;
  double age_sd_years = 20.0;
  double campaign_age_band_share = 0.0;  // campaign reports giving age only as the band below
  int campaign_age_lo_years = 10;
  int campaign_age_hi_years = 14;
  std::string onset_from = "2015-01-01";
  std::string onset_to = "2022-12-31";
  int campaigns = 0;  // > 0: vaccine reports come from this many short single-vaccine campaigns
  int campaign_days = 14;
  double onset_missing = 0.1;
  double outcome_missing = 0.2;

  json to_json() const {
    return {{"name", name},
            {"share", share},
            {"drug_skew", drug_skew},
            {"event_skew", event_skew},
            {"vaccine_share", vaccine_share},
            {"female_share", female_share},
            {"unknown_sex", unknown_sex},
            {"age_missing", age_missing},
            {"age_mean_years", age_mean_years},
            {"age_sd_years", age_sd_years},
            {"campaign_age_band_share", campaign_age_band_share},
            {"campaign_age_lo_years", campaign_age_lo_years},
            {"campaign_age_hi_years", campaign_age_hi_years},
            {"onset_from", onset_from},
            {"onset_to", onset_to},
            {"campaigns", campaigns},
            {"campaign_days", campaign_days},
            {"onset_missing", onset_missing},
            {"outcome_missing", outcome_missing}};
  }

  static CountryProfile from_json(const json& j) {
    CountryProfile c;
    c.name = j.at("name").get<std::string>();
    c.share = j.at("share").get<double>();
    c.drug_skew = j.value("drug_skew", c.drug_skew);
    c.event_skew = j.value("event_skew", c.event_skew);
    c.vaccine_share = j.value("vaccine_share", c.vaccine_share);
    c.female_share = j.value("female_share", c.female_share);
    c.unknown_sex = j.value("unknown_sex", c.unknown_sex);
    c.age_missing = j.value("age_missing", c.age_missing);
    c.age_mean_years = j.value("age_mean_years", c.age_mean_years);
    c.age_sd_years = j.value("age_sd_years", c.age_sd_years);
    c.campaign_age_band_share = j.value("campaign_age_band_share", c.campaign_age_band_share);
    c.campaign_age_lo_years = j.value("campaign_age_lo_years", c.campaign_age_lo_years);
    c.campaign_age_hi_years = j.value("campaign_age_hi_years", c.campaign_age_hi_years);
    c.onset_from = j.value("onset_from", c.onset_from);
    c.onset_to = j.value("onset_to", c.onset_to);
    c.campaigns = j.value("campaigns", c.campaigns);
    c.campaign_days = j.value("campaign_days", c.campaign_days);
    c.onset_missing = j.value("onset_missing", c.onset_missing);
    c.outcome_missing = j.value("outcome_missing", c.outcome_missing);
    return c;
  }
};

struct DuplicatePlan {
  std::size_t followup = 200;
  std::size_t multi_reporter = 200;
  std::size_t literature = 100;
  std::size_t same_reporter = 50;
  std::size_t same_event = 50;

  std::size_t duplicates() const { return followup + multi_reporter + literature; }
  std::size_t related() const { return same_reporter + same_event; }
};

struct PerturbationConfig {
  double followup_link = 0.6;       // A.1.11.2 set to the original's A.1.0.1
  double followup_add_drug = 0.3;
  double followup_add_event = 0.4;
  double recode_drug = 0.1;         // multi_reporter: per-item re-draw
  double recode_event = 0.2;
  double jitter_prob = 0.4;         // multi_reporter: onset moved
  int jitter_days = 3;              // by 1..jitter_days either way
  double drop_sex = 0.1;
  double drop_age = 0.2;
  double drop_onset = 0.05;
  double literature_drop_event = 0.2;
};

struct SynthConfig {
  std::uint64_t seed = 20250101;
  std::size_t n_reports = 10000;
  std::size_t n_substances = 300;
  std::size_t n_vaccines = 15;
  std::size_t n_pts = 500;
  std::size_t n_socs = 26;
  double drugs_per_report = 1.8;   // mean, at least one
  double events_per_report = 2.2;  // mean, at least one
  double event_drug_association = 0.35;  // event drawn from a listed drug's signature PTs
  std::vector<CountryProfile> countries;
  DuplicatePlan plan;
  PerturbationConfig perturbation;

  static SynthConfig defaults() {
    SynthConfig c;
    CountryProfile gb;
    gb.name = "GB";
    gb.share = 0.5;
    CountryProfile us;
    us.name = "US";
    us.share = 0.38;
    us.age_mean_years = 55;
    CountryProfile ug;
    ug.name = "UG";
    ug.share = 0.12;
    ug.drug_skew = 2.2;
    ug.event_skew = 2.0;
    ug.vaccine_share = 0.4;
    ug.female_share = 0.8;
    ug.unknown_sex = 0.02;
    ug.age_missing = 0.05;
    ug.onset_from = "2019-01-01";
    ug.onset_to = "2020-12-31";
    ug.campaigns = 2;
    ug.campaign_days = 7;
    ug.campaign_age_band_share = 0.8;
    ug.onset_missing = 0.02;
    c.countries = {gb, us, ug};
    return c;
  }

  void validate() const {
    auto prob = [](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) throw usage_error(std::string("synth config: ") + what + " must lie in [0, 1]");
    };
    if (countries.empty()) throw usage_error("synth config: at least one country required");
    double total = 0.0;
    std::set<std::string> names;
    for (const auto& c : countries) {
      if (c.name.empty() || !names.insert(c.name).second) throw usage_error("synth config: country names must be unique");
      if (c.share < 0) throw usage_error("synth config: negative country share");
      total += c.share;
      prob(c.vaccine_share, "vaccine_share");
      prob(c.female_share, "female_share");
      prob(c.unknown_sex, "unknown_sex");
      prob(c.age_missing, "age_missing");
      prob(c.campaign_age_band_share, "campaign_age_band_share");
      prob(c.onset_missing, "onset_missing");
      prob(c.outcome_missing, "outcome_missing");
      if (!(c.drug_skew >= 0 && c.event_skew >= 0)) throw usage_error("synth config: skew exponents must be >= 0");
      if (c.campaign_age_lo_years < 0 || c.campaign_age_hi_years < c.campaign_age_lo_years)
        throw usage_error("synth config: invalid age band");
      if (!try_parse_day(c.onset_from) || !try_parse_day(c.onset_to) || parse_day(c.onset_to) < parse_day(c.onset_from))
        throw usage_error("synth config: invalid onset range for " + c.name);
      if (c.campaigns < 0 || c.campaign_days < 1) throw usage_error("synth config: invalid campaign settings");
    }
    if (std::abs(total - 1.0) > 1e-9) throw usage_error("synth config: country shares must sum to 1");
    const auto& p = perturbation;
    for (double v : {p.followup_link, p.followup_add_drug, p.followup_add_event, p.recode_drug, p.recode_event,
                     p.jitter_prob, p.drop_sex, p.drop_age, p.drop_onset, p.literature_drop_event})
      prob(v, "perturbation probabilities");
    if (p.jitter_days < 1) throw usage_error("synth config: jitter_days must be >= 1");
    prob(event_drug_association, "event_drug_association");
    if (n_substances < 2 || n_pts < 2 || n_socs < 1 || n_socs > n_pts)
      throw usage_error("synth config: vocabulary too small");
    if (drugs_per_report < 1 || events_per_report < 1) throw usage_error("synth config: per-report means must be >= 1");
    const std::size_t needed = 2 * plan.duplicates() + 2 * plan.related();
    if (needed > n_reports) throw usage_error("synth config: duplicate plan needs more reports than n_reports");
    if (plan.literature > 0 && countries.size() < 2)
      throw usage_error("synth config: literature duplicates need at least two countries");
  }

  json to_json() const {
    json cs = json::array();
    for (const auto& c : countries) cs.push_back(c.to_json());
    const auto& p = perturbation;
    return {{"seed", seed},
            {"n_reports", n_reports},
            {"n_substances", n_substances},
            {"n_vaccines", n_vaccines},
            {"n_pts", n_pts},
            {"n_socs", n_socs},
            {"drugs_per_report", drugs_per_report},
            {"events_per_report", events_per_report},
            {"event_drug_association", event_drug_association},
            {"countries", cs},
            {"duplicates",
             {{"followup", plan.followup},
              {"multi_reporter", plan.multi_reporter},
              {"literature", plan.literature},
              {"same_reporter", plan.same_reporter},
              {"same_event", plan.same_event}}},
            {"perturbation",
             {{"followup_link", p.followup_link},
              {"followup_add_drug", p.followup_add_drug},
              {"followup_add_event", p.followup_add_event},
              {"recode_drug", p.recode_drug},
              {"recode_event", p.recode_event},
              {"jitter_prob", p.jitter_prob},
              {"jitter_days", p.jitter_days},
              {"drop_sex", p.drop_sex},
              {"drop_age", p.drop_age},
              {"drop_onset", p.drop_onset},
              {"literature_drop_event", p.literature_drop_event}}}};
  }

  /// Missing keys keep their defaults; a missing country list keeps the
  /// default three countries.
  static SynthConfig from_json(const json& j) {
    SynthConfig c = defaults();
    c.seed = j.value("seed", c.seed);
    c.n_reports = j.value("n_reports", c.n_reports);
    c.n_substances = j.value("n_substances", c.n_substances);
    c.n_vaccines = j.value("n_vaccines", c.n_vaccines);
    c.n_pts = j.value("n_pts", c.n_pts);
    c.n_socs = j.value("n_socs", c.n_socs);
    c.drugs_per_report = j.value("drugs_per_report", c.drugs_per_report);
    c.events_per_report = j.value("events_per_report", c.events_per_report);
    c.event_drug_association = j.value("event_drug_association", c.event_drug_association);
    if (j.contains("countries")) {
      c.countries.clear();
      for (const auto& cj : j.at("countries")) c.countries.push_back(CountryProfile::from_json(cj));
    }
    if (j.contains("duplicates")) {
      const auto& d = j.at("duplicates");
      c.plan.followup = d.value("followup", c.plan.followup);
      c.plan.multi_reporter = d.value("multi_reporter", c.plan.multi_reporter);
      c.plan.literature = d.value("literature", c.plan.literature);
      c.plan.same_reporter = d.value("same_reporter", c.plan.same_reporter);
      c.plan.same_event = d.value("same_event", c.plan.same_event);
    }
    if (j.contains("perturbation")) {
      const auto& pj = j.at("perturbation");
      auto& p = c.perturbation;
      p.followup_link = pj.value("followup_link", p.followup_link);
      p.followup_add_drug = pj.value("followup_add_drug", p.followup_add_drug);
      p.followup_add_event = pj.value("followup_add_event", p.followup_add_event);
      p.recode_drug = pj.value("recode_drug", p.recode_drug);
      p.recode_event = pj.value("recode_event", p.recode_event);
      p.jitter_prob = pj.value("jitter_prob", p.jitter_prob);
      p.jitter_days = pj.value("jitter_days", p.jitter_days);
      p.drop_sex = pj.value("drop_sex", p.drop_sex);
      p.drop_age = pj.value("drop_age", p.drop_age);
      p.drop_onset = pj.value("drop_onset", p.drop_onset);
      p.literature_drop_event = pj.value("literature_drop_event", p.literature_drop_event);
    }
    c.validate();
    return c;
  }

  static SynthConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open synth config '" + path + "'");
    try {
      return from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw usage_error("synth config '" + path + "': " + e.what());
    }
  }
};

struct GroundTruthPair {
  std::string id_a;  // id_a < id_b
  std::string id_b;
  Label label = Label::duplicate;
  std::string mechanism;
  bool detectable = true;
  std::string group;  // id of the base report the pair was planted from

  json to_json() const {
    return {{"id_a", id_a},
            {"id_b", id_b},
            {"label", std::string(to_string(label))},
            {"mechanism", mechanism},
            {"detectable", detectable},
            {"group", group}};
  }

  static GroundTruthPair from_json(const json& j) {
    GroundTruthPair g;
    g.id_a = j.at("id_a").get<std::string>();
    g.id_b = j.at("id_b").get<std::string>();
    const auto label = parse_label(j.at("label").get<std::string>());
    if (!label) throw data_error("ground truth: unknown label");
    g.label = *label;
    g.mechanism = j.value("mechanism", std::string{});
    g.detectable = j.value("detectable", true);
    g.group = j.value("group", g.id_a);
    return g;
  }

  friend bool operator==(const GroundTruthPair&, const GroundTruthPair&) = default;
};

inline std::vector<GroundTruthPair> parse_ground_truth(std::istream& in) {
  std::vector<GroundTruthPair> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(GroundTruthPair::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw data_error("ground truth line " + std::to_string(n) + ": " + e.what());
    } catch (const Error& e) {
      throw data_error("ground truth line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<GroundTruthPair> load_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open ground truth '" + path + "'");
  return parse_ground_truth(in);
}

inline void write_ground_truth(std::ostream& out, const std::vector<GroundTruthPair>& truth) {
  for (const auto& g : truth) out << g.to_json().dump() << '\n';
}

inline std::vector<LabelledPair> to_labelled(std::span<const GroundTruthPair> truth, bool detectable_only = true) {
  std::vector<LabelledPair> out;
  for (const auto& g : truth)
    if (!detectable_only || g.detectable) out.push_back({g.id_a, g.id_b, g.label, "synthetic:" + g.mechanism, ""});
  return out;
}

struct SynthOutput {
  Ontology ontology;
  Corpus corpus;
  std::vector<GroundTruthPair> truth;
};

namespace detail {

class SynthBuilder {
 public:
  explicit SynthBuilder(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { build_ontology(); }

  SynthOutput run() {
    build_country_models();
    const auto& plan = cfg_.plan;
    const std::size_t n_base = cfg_.n_reports - plan.duplicates() - plan.related();

    std::discrete_distribution<std::size_t> pick_country = country_distribution();
    for (std::size_t k = 0; k < n_base; ++k) reports_.push_back(base_report(pick_country(rng_)));

    // Sources for duplicates and related reports are distinct base reports.
    std::vector<std::size_t> order(n_base);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    std::size_t cursor = 0;
    auto next_source = [&](auto&& ok) -> std::size_t {
      for (std::size_t tries = 0; tries < n_base; ++tries) {
        const std::size_t s = order[cursor++ % n_base];
        if (ok(reports_[s])) return s;
      }
      throw usage_error("synth: no base report suits the requested mechanism");
    };
    auto any = [](const Draft&) { return true; };

    for (std::size_t k = 0; k < plan.followup; ++k) plant(next_source(any), "followup");
    for (std::size_t k = 0; k < plan.multi_reporter; ++k) plant(next_source(any), "multi_reporter");
    for (std::size_t k = 0; k < plan.literature; ++k) plant(next_source(any), "literature");
    for (std::size_t k = 0; k < plan.same_reporter; ++k) plant(next_source(any), "same_reporter");
    for (std::size_t k = 0; k < plan.same_event; ++k) plant(next_source(any), "same_event");

    return finish();
  }

 private:
  struct Draft {
    std::size_t country = 0;
    Sex sex = Sex::unknown;
    std::optional<AgeInterval> age;
    std::vector<std::uint32_t> substances;  // first is suspected
    std::vector<DrugRole> roles;
    std::vector<std::uint32_t> pts;
    std::optional<Day> onset;
    bool onset_month_only = false;
    std::optional<Day> drug_start;
    std::optional<Day> event_end;
    std::optional<std::string> outcome;
    std::string sender_id;
    std::optional<std::string> previous_id;
    std::string history;  // free-text tail with coarse dates
    bool followup_note = false;
  };

  struct CountryModel {
    std::vector<std::uint32_t> drug_rank;  // rank -> substance (non-vaccine)
    std::vector<std::uint32_t> pt_rank;
    std::discrete_distribution<std::size_t> drug_dist, pt_dist;
    std::vector<Day> campaign_starts;
    std::vector<std::uint32_t> campaign_vaccines;
  };

  struct Planted {
    std::size_t a, b;
    Label label;
    std::string mechanism;
  };

  void build_ontology() {
    std::map<std::string, std::vector<std::string>> drugs;
    std::map<std::string, std::string> events;
    char buf[32];
    for (std::size_t s = 0; s < cfg_.n_substances; ++s) {
      std::snprintf(buf, sizeof buf, "S%04zu", s);
      const char group = static_cast<char>('A' + s % 14 == 'J' ? 'N' : 'A' + s % 14);
      char atc[16];
      std::snprintf(atc, sizeof atc, "%c%02zuAX%02zu", group, s % 17 + 1, s % 97 + 1);
      drugs[buf] = {atc};
    }
    for (std::size_t v = 0; v < cfg_.n_vaccines; ++v) {
      std::snprintf(buf, sizeof buf, "V%03zu", v);
      char atc[16];
      std::snprintf(atc, sizeof atc, "J07%cX%02zu", static_cast<char>('A' + v % 12), v % 97 + 1);
      drugs[buf] = {atc};
    }
    // PT -> SOC: a few large SOCs and a long tail.
    std::vector<double> soc_w(cfg_.n_socs);
    for (std::size_t k = 0; k < cfg_.n_socs; ++k) soc_w[k] = 1.0 / std::pow(static_cast<double>(k + 1), 0.8);
    std::discrete_distribution<std::size_t> soc_pick(soc_w.begin(), soc_w.end());
    for (std::size_t p = 0; p < cfg_.n_pts; ++p) {
      std::snprintf(buf, sizeof buf, "P%04zu", p);
      // Every SOC gets at least one PT.
      const std::size_t soc = p < cfg_.n_socs ? p : soc_pick(rng_);
      char sbuf[16];
      std::snprintf(sbuf, sizeof sbuf, "SOC%02zu", soc + 1);
      events[buf] = sbuf;
    }
    ontology_ = Ontology(std::move(drugs), std::move(events));
    for (std::uint32_t s = 0; s < ontology_.substance_count(); ++s)
      (ontology_.substance_code(s)[0] == 'V' ? vaccines_ : medicines_).push_back(s);
    // Each substance carries three signature PTs.
    std::uniform_int_distribution<std::uint32_t> any_pt(0, static_cast<std::uint32_t>(ontology_.pt_count() - 1));
    signature_.resize(ontology_.substance_count());
    for (auto& sig : signature_)
      for (int k = 0; k < 3; ++k) sig.push_back(any_pt(rng_));
  }

  static std::discrete_distribution<std::size_t> zipf(std::size_t n, double s) {
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k) w[k] = 1.0 / std::pow(static_cast<double>(k + 1), s);
    return {w.begin(), w.end()};
  }

  std::discrete_distribution<std::size_t> country_distribution() const {
    std::vector<double> w;
    for (const auto& c : cfg_.countries) w.push_back(c.share);
    return {w.begin(), w.end()};
  }

  void build_country_models() {
    for (const auto& c : cfg_.countries) {
      CountryModel m;
      m.drug_rank.assign(medicines_.begin(), medicines_.end());
      std::shuffle(m.drug_rank.begin(), m.drug_rank.end(), rng_);
      m.pt_rank.resize(ontology_.pt_count());
      std::iota(m.pt_rank.begin(), m.pt_rank.end(), 0);
      std::shuffle(m.pt_rank.begin(), m.pt_rank.end(), rng_);
      m.drug_dist = zipf(m.drug_rank.size(), c.drug_skew);
      m.pt_dist = zipf(m.pt_rank.size(), c.event_skew);
      const Day from = parse_day(c.onset_from), to = parse_day(c.onset_to);
      std::uniform_int_distribution<int> off(0, static_cast<int>((to - from).count()));
      for (int k = 0; k < c.campaigns && !vaccines_.empty(); ++k) {
        m.campaign_starts.push_back(from + std::chrono::days(off(rng_)));
        m.campaign_vaccines.push_back(vaccines_[static_cast<std::size_t>(uniform(0, static_cast<int>(vaccines_.size()) - 1))]);
      }
      models_.push_back(std::move(m));
    }
  }

  bool coin(double p) { return std::bernoulli_distribution(p)(rng_); }

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  std::size_t count_around(double mean) {
    // 1 + Poisson(mean - 1), capped at 8.
    std::poisson_distribution<int> extra(std::max(1e-9, mean - 1.0));
    return static_cast<std::size_t>(std::min(8, 1 + extra(rng_)));
  }

  std::uint32_t draw_drug(std::size_t country) {
    auto& m = models_[country];
    return m.drug_rank[m.drug_dist(rng_)];
  }

  std::uint32_t draw_pt(std::size_t country, const std::vector<std::uint32_t>& substances) {
    if (!substances.empty() && coin(cfg_.event_drug_association)) {
      const auto s = substances[static_cast<std::size_t>(uniform(0, static_cast<int>(substances.size()) - 1))];
      return signature_[s][static_cast<std::size_t>(uniform(0, 2))];
    }
    auto& m = models_[country];
    return m.pt_rank[m.pt_dist(rng_)];
  }

  template <class Draw>
  static void add_unique(std::vector<std::uint32_t>& v, std::size_t count, Draw&& draw) {
    for (std::size_t tries = 0; v.size() < count && tries < 50 * count; ++tries) {
      const auto x = draw();
      if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
    }
  }

  Sex draw_sex(const CountryProfile& c) {
    if (coin(c.unknown_sex)) return Sex::unknown;
    return coin(c.female_share) ? Sex::female : Sex::male;
  }

  std::optional<AgeInterval> draw_age(const CountryProfile& c, bool campaign) {
    if (coin(c.age_missing)) return std::nullopt;
    if (campaign && coin(c.campaign_age_band_share))
      return AgeInterval{static_cast<std::int32_t>(c.campaign_age_lo_years * 365),
                         static_cast<std::int32_t>((c.campaign_age_hi_years + 1) * 365 - 1)};
    std::normal_distribution<double> years(c.age_mean_years, c.age_sd_years);
    const int y = std::clamp(static_cast<int>(std::lround(years(rng_))), 0, 100);
    return AgeInterval{y * 365, y * 365 + 364};
  }

  std::optional<Day> draw_onset(std::size_t country, std::optional<std::size_t> campaign) {
    const auto& c = cfg_.countries[country];
    if (coin(c.onset_missing)) return std::nullopt;
    if (campaign) return models_[country].campaign_starts[*campaign] + std::chrono::days(uniform(0, c.campaign_days - 1));
    const Day from = parse_day(c.onset_from), to = parse_day(c.onset_to);
    return from + std::chrono::days(uniform(0, static_cast<int>((to - from).count())));
  }

  std::string new_sender_id(std::size_t country) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s-SYN-%07zu", cfg_.countries[country].name.c_str(), ++sender_seq_);
    return buf;
  }

  std::string draw_history() {
    static const char* const conditions[] = {"hypertension", "asthma", "type 2 diabetes", "migraine", "epilepsy"};
    std::string out;
    if (coin(0.3)) {
      out += " Medical history of ";
      out += conditions[uniform(0, 4)];
      out += " since " + std::to_string(uniform(1975, 2014)) + ".";
    }
    if (coin(0.2)) {
      static const char* const months[] = {"January", "February", "March", "April", "May", "June", "July",
                                           "August", "September", "October", "November", "December"};
      out += " Previous review in " + std::string(months[uniform(0, 11)]) + " " + std::to_string(uniform(2010, 2014)) + ".";
    }
    return out;
  }

  Draft base_report(std::size_t country) {
    const auto& c = cfg_.countries[country];
    Draft d;
    d.country = country;
    d.sex = draw_sex(c);
    const bool vaccine = !vaccines_.empty() && coin(c.vaccine_share);
    const std::size_t n_drugs = count_around(cfg_.drugs_per_report);
    const auto& campaigns = models_[country].campaign_vaccines;
    std::optional<std::size_t> campaign;
    if (vaccine && !campaigns.empty()) {
      campaign = static_cast<std::size_t>(uniform(0, static_cast<int>(campaigns.size()) - 1));
      d.substances.push_back(campaigns[*campaign]);
    } else if (vaccine) {
      d.substances.push_back(vaccines_[static_cast<std::size_t>(uniform(0, static_cast<int>(vaccines_.size()) - 1))]);
    }
    d.age = draw_age(c, campaign.has_value());
    add_unique(d.substances, n_drugs, [&] { return draw_drug(country); });
    for (std::size_t k = 0; k < d.substances.size(); ++k)
      d.roles.push_back(k == 0 ? DrugRole::suspected : (coin(0.5) ? DrugRole::suspected : DrugRole::concomitant));
    add_unique(d.pts, count_around(cfg_.events_per_report), [&] { return draw_pt(country, d.substances); });
    d.onset = draw_onset(country, campaign);
    d.onset_month_only = d.onset && coin(0.05);
    if (d.onset && coin(0.7)) d.drug_start = *d.onset - std::chrono::days(uniform(0, 90));
    if (!coin(c.outcome_missing)) {
      static const char* const outcomes[] = {"recovered", "recovering", "not_recovered", "fatal", "unknown"};
      static const double weights[] = {0.45, 0.25, 0.2, 0.03, 0.07};
      d.outcome = outcomes[std::discrete_distribution<int>(std::begin(weights), std::end(weights))(rng_)];
    }
    d.sender_id = new_sender_id(country);
    d.history = draw_history();
    return d;
  }

  void jitter(std::optional<Day>& day) {
    if (!day || !coin(cfg_.perturbation.jitter_prob)) return;
    int shift = uniform(1, cfg_.perturbation.jitter_days);
    if (coin(0.5)) shift = -shift;
    *day += std::chrono::days(shift);
  }

  Draft make_followup(const Draft& src) {
    const auto& p = cfg_.perturbation;
    Draft d = src;
    if (coin(p.followup_add_drug)) {
      const std::size_t before = d.substances.size();
      add_unique(d.substances, before + 1, [&] { return draw_drug(d.country); });
      if (d.substances.size() > before) d.roles.push_back(DrugRole::concomitant);
    }
    if (coin(p.followup_add_event)) add_unique(d.pts, d.pts.size() + 1, [&] { return draw_pt(d.country, d.substances); });
    if (d.onset) d.event_end = *d.onset + std::chrono::days(uniform(2, 30));
    d.sender_id = new_sender_id(d.country);
    d.previous_id.reset();
    if (coin(p.followup_link)) d.previous_id = src.sender_id;
    d.followup_note = true;
    return d;
  }

  Draft make_multi_reporter(const Draft& src) {
    const auto& p = cfg_.perturbation;
    Draft d = src;
    for (std::size_t k = 0; k < d.substances.size(); ++k) {
      if (vaccine_index(d.substances[k]) || !coin(p.recode_drug)) continue;
      const auto x = draw_drug(d.country);
      if (std::find(d.substances.begin(), d.substances.end(), x) == d.substances.end()) d.substances[k] = x;
    }
    for (auto& pt : d.pts) {
      if (!coin(p.recode_event)) continue;
      const auto x = draw_pt(d.country, d.substances);
      if (std::find(d.pts.begin(), d.pts.end(), x) == d.pts.end()) pt = x;
    }
    jitter(d.onset);
    if (d.onset && d.drug_start && *d.drug_start > *d.onset) d.drug_start = d.onset;
    if (coin(p.drop_onset)) d.onset.reset();
    if (coin(p.drop_sex)) d.sex = Sex::unknown;
    if (coin(p.drop_age)) d.age.reset();
    if (coin(0.5)) d.drug_start.reset();
    d.sender_id = new_sender_id(d.country);
    d.previous_id.reset();
    d.history = draw_history();
    return d;
  }

  Draft make_literature(const Draft& src) {
    const auto& p = cfg_.perturbation;
    Draft d = src;
    std::size_t other = static_cast<std::size_t>(uniform(0, static_cast<int>(cfg_.countries.size()) - 2));
    if (other >= src.country) ++other;
    d.country = other;
    if (d.pts.size() > 1 && coin(p.literature_drop_event)) d.pts.erase(d.pts.begin() + uniform(0, static_cast<int>(d.pts.size()) - 1));
    d.sender_id = new_sender_id(d.country);
    d.previous_id.reset();
    d.history = " Case described in a published case report.";
    return d;
  }

  /// Same reporter, different patient: shared suspected drug, fresh patient.
  Draft make_same_reporter(const Draft& src) {
    Draft d = base_report(src.country);
    d.substances = {src.substances.front()};
    d.roles = {DrugRole::suspected};
    d.pts.clear();
    d.pts.push_back(src.pts.front());
    add_unique(d.pts, count_around(cfg_.events_per_report), [&] { return draw_pt(d.country, d.substances); });
    if (src.onset) d.onset = *src.onset + std::chrono::days(uniform(-30, 30));
    return d;
  }

  /// Same event, different patient: same drug, event and onset day.
  Draft make_same_event(const Draft& src) {
    Draft d = base_report(src.country);
    d.substances = src.substances;
    d.roles = src.roles;
    d.pts = {src.pts.front()};
    d.onset = src.onset;
    return d;
  }

  const std::uint32_t* vaccine_index(std::uint32_t s) const {
    auto it = std::find(vaccines_.begin(), vaccines_.end(), s);
    return it == vaccines_.end() ? nullptr : &*it;
  }

  void plant(std::size_t source, const std::string& mechanism) {
    const Draft& src = reports_[source];
    Draft d;
    Label label = Label::duplicate;
    if (mechanism == "followup") d = make_followup(src);
    else if (mechanism == "multi_reporter") d = make_multi_reporter(src);
    else if (mechanism == "literature") d = make_literature(src);
    else if (mechanism == "same_reporter") {
      d = make_same_reporter(src);
      label = Label::otherwise_related;
    } else {
      d = make_same_event(src);
      label = Label::otherwise_related;
    }
    reports_.push_back(std::move(d));
    planted_.push_back({source, reports_.size() - 1, label, mechanism});
  }

  // Narrative rendering ----------------------------------------------------

  std::string render_date(Day day, std::size_t country) {
    const std::chrono::year_month_day ymd{day};
    const int y = static_cast<int>(ymd.year());
    const unsigned m = static_cast<unsigned>(ymd.month()), dd = static_cast<unsigned>(ymd.day());
    static const char* const months[] = {"January", "February", "March", "April", "May", "June", "July",
                                         "August", "September", "October", "November", "December"};
    const bool month_first = cfg_.countries[country].name == "US";
    char buf[64];
    switch (uniform(0, 3)) {
      case 0:
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, dd);
        break;
      case 1:
        if (month_first) std::snprintf(buf, sizeof buf, "%s %u, %04d", months[m - 1], dd, y);
        else std::snprintf(buf, sizeof buf, "%u %s %04d", dd, months[m - 1], y);
        break;
      case 2:
        if (month_first) std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", m, dd, y);
        else std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", dd, m, y);
        break;
      default:
        if (month_first) std::snprintf(buf, sizeof buf, "%s %u, %04d", months[m - 1], dd, y);
        else std::snprintf(buf, sizeof buf, "%u %s %04d", dd, months[m - 1], y);
        break;
    }
    return buf;
  }

  std::string narrative(const Draft& d) {
    std::ostringstream out;
    const char* who = d.sex == Sex::female ? "A female patient" : d.sex == Sex::male ? "A male patient" : "A patient";
    out << who << " received " << ontology_.substance_code(d.substances.front());
    if (d.drug_start) out << " starting " << render_date(*d.drug_start, d.country);
    out << ".";
    if (d.onset && !d.onset_month_only) out << " Symptoms began on " << render_date(*d.onset, d.country) << ".";
    if (d.event_end) out << " Follow-up: the event resolved on " << render_date(*d.event_end, d.country) << ".";
    out << d.history;
    return out.str();
  }

  Report to_report(const Draft& d, std::string id) {
    Report r;
    r.id = std::move(id);
    r.country = cfg_.countries[d.country].name;
    r.sex = d.sex;
    r.age = d.age;
    for (std::size_t k = 0; k < d.substances.size(); ++k) {
      DrugEntry e;
      e.substance_index = d.substances[k];
      e.substance = ontology_.substance_code(d.substances[k]);
      e.atc = ontology_.atc_codes(d.substances[k]).front();
      e.role = d.roles[k];
      r.drugs.push_back(std::move(e));
    }
    for (auto pt : d.pts) {
      EventEntry e;
      e.pt_index = pt;
      e.pt = ontology_.pt_code(pt);
      e.soc_index = ontology_.soc_of(pt);
      e.soc = ontology_.soc_code(e.soc_index);
      r.events.push_back(std::move(e));
    }
    if (d.drug_start) r.dates.push_back({DateKind::drug_start, {*d.drug_start, *d.drug_start, DateSource::structured}});
    if (d.onset) {
      if (d.onset_month_only) {
        const std::chrono::year_month_day ymd{*d.onset};
        const Day first{ymd.year() / ymd.month() / 1};
        const Day last{ymd.year() / ymd.month() / std::chrono::last};
        r.dates.push_back({DateKind::event_onset, {first, last, DateSource::structured}});
      } else {
        r.dates.push_back({DateKind::event_onset, {*d.onset, *d.onset, DateSource::structured}});
      }
    }
    if (d.event_end) r.dates.push_back({DateKind::event_end, {*d.event_end, *d.event_end, DateSource::structured}});
    r.narrative = narrative(d);
    r.outcome = d.outcome;
    r.ids.safety_report_id = d.sender_id;
    r.ids.previous_transmission_id = d.previous_id;
    r.is_vaccine_report = derive_vaccine_flag(r);
    r.earliest_onset = derive_earliest_onset(r);
    return r;
  }

  SynthOutput finish() {
    std::vector<std::size_t> position(reports_.size());
    std::iota(position.begin(), position.end(), 0);
    std::shuffle(position.begin(), position.end(), rng_);
    // position[k] = draft placed at slot k; ids follow slot order.
    std::vector<std::string> id_of(reports_.size());
    std::vector<Report> out(reports_.size());
    for (std::size_t slot = 0; slot < position.size(); ++slot) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "R%06zu", slot + 1);
      id_of[position[slot]] = buf;
    }
    for (std::size_t slot = 0; slot < position.size(); ++slot)
      out[slot] = to_report(reports_[position[slot]], id_of[position[slot]]);

    SynthOutput result;
    result.ontology = ontology_;
    result.corpus = Corpus(std::move(out));
    for (const auto& p : planted_) {
      GroundTruthPair g;
      g.id_a = std::min(id_of[p.a], id_of[p.b]);
      g.id_b = std::max(id_of[p.a], id_of[p.b]);
      g.label = p.label;
      g.mechanism = p.mechanism;
      g.group = id_of[p.a];
      g.detectable = blocking_pass(result.corpus.at(g.id_a), result.corpus.at(g.id_b));
      result.truth.push_back(std::move(g));
    }
    std::sort(result.truth.begin(), result.truth.end(), [](const GroundTruthPair& x, const GroundTruthPair& y) {
      return std::tie(x.id_a, x.id_b) < std::tie(y.id_a, y.id_b);
    });
    return result;
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  Ontology ontology_;
  std::vector<std::uint32_t> medicines_, vaccines_;
  std::vector<std::vector<std::uint32_t>> signature_;
  std::vector<CountryModel> models_;
  std::vector<Draft> reports_;
  std::vector<Planted> planted_;
  std::size_t sender_seq_ = 0;
};

}  // namespace detail

inline SynthOutput generate(const SynthConfig& config) {
  config.validate();
  return detail::SynthBuilder(config).run();
}

struct SplitRatios {
  double train = 0.6;
  double validation = 0.3;
  double test = 0.1;

  void validate() const {
    if (train < 0 || validation < 0 || test < 0 || std::abs(train + validation + test - 1.0) > 1e-9)
      throw usage_error("split ratios must be non-negative and sum to 1");
  }
};

struct HoldoutSplit {
  std::vector<GroundTruthPair> train, validation, test;
};

/// Seeded split by planted group: pairs sharing a group land together.
/// Groups are dealt in shuffled order to whichever split is furthest below
/// its target share.
inline HoldoutSplit holdout_split(std::span<const GroundTruthPair> truth, const SplitRatios& ratios,
                                  std::uint64_t seed) {
  ratios.validate();
  std::map<std::string, std::vector<const GroundTruthPair*>> groups;
  for (const auto& g : truth) groups[g.group].push_back(&g);
  std::vector<const std::vector<const GroundTruthPair*>*> order;
  for (const auto& [_, members] : groups) order.push_back(&members);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  HoldoutSplit out;
  std::array<std::vector<GroundTruthPair>*, 3> parts{&out.train, &out.validation, &out.test};
  const std::array<double, 3> target{ratios.train, ratios.validation, ratios.test};
  std::size_t assigned = 0;
  for (const auto* members : order) {
    std::size_t best = 0;
    double best_deficit = -1e300;
    for (std::size_t k = 0; k < 3; ++k) {
      if (target[k] <= 0) continue;
      const double deficit = target[k] * static_cast<double>(assigned + members->size()) -
                             static_cast<double>(parts[k]->size());
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = k;
      }
    }
    for (const auto* g : *members) parts[best]->push_back(*g);
    assigned += members->size();
  }
  return out;
}

}  // namespace casematch
