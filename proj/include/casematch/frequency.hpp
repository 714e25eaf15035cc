#pragma once

// Marginal and pairwise reporting frequencies, per country and global.
//
// Rates use additive smoothing: f = (count + 0.5) / (N + 1). Countries with
// fewer than `min_country_support` reports get no table of their own and every
// lookup for them falls back to the global rates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "casematch/report.hpp"

namespace casematch {

using ItemId = std::uint32_t;

/// Index of a per-country table, or kGlobalSlot.
using CountrySlot = std::int32_t;
inline constexpr CountrySlot kGlobalSlot = -1;

inline std::uint64_t pair_key(ItemId i, ItemId j) {
  if (i > j) std::swap(i, j);
  return (static_cast<std::uint64_t>(i) << 32) | j;
}

/// Sorted, de-duplicated drug and event items of a report.
inline std::vector<ItemId> report_items(const Report& r, const Ontology& ontology) {
  std::vector<ItemId> items;
  items.reserve(r.drugs.size() + r.events.size());
  for (const auto& d : r.drugs) items.push_back(ontology.drug_item(d.substance_index));
  for (const auto& e : r.events) items.push_back(ontology.event_item(e.pt_index));
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

/// Observed value distribution of one categorical field. Frequencies are
/// unsmoothed relative frequencies over observed (non-missing) values.
struct CategoricalFrequency {
  std::string field;
  std::map<std::string, double> global;
  std::map<std::string, std::map<std::string, double>> per_country;

  bool contains(std::string_view value) const { return global.count(std::string(value)) > 0; }

  double frequency(std::string_view value) const {
    auto it = global.find(std::string(value));
    if (it == global.end())
      throw data_error("value '" + std::string(value) + "' absent from " + field + " frequencies");
    return it->second;
  }

  json to_json() const { return {{"field", field}, {"global", global}, {"per_country", per_country}}; }

  static CategoricalFrequency from_json(const json& j) {
    CategoricalFrequency c;
    c.field = j.at("field").get<std::string>();
    c.global = j.at("global").get<std::map<std::string, double>>();
    c.per_country = j.at("per_country").get<std::map<std::string, std::map<std::string, double>>>();
    return c;
  }

  static CategoricalFrequency from_counts(std::string field,
                                          const std::map<std::string, std::map<std::string, std::uint64_t>>& by_country) {
    CategoricalFrequency c;
    c.field = std::move(field);
    std::map<std::string, std::uint64_t> total;
    std::uint64_t n = 0;
    for (const auto& [country, counts] : by_country) {
      std::uint64_t nc = 0;
      for (const auto& [v, k] : counts) nc += k;
      for (const auto& [v, k] : counts) {
        total[v] += k;
        c.per_country[country][v] = static_cast<double>(k) / static_cast<double>(nc);
      }
      n += nc;
    }
    for (const auto& [v, k] : total) c.global[v] = static_cast<double>(k) / static_cast<double>(n);
    return c;
  }
};

class FrequencyTables;
FrequencyTables build_tables(const Corpus& corpus, const Ontology& ontology,
                             std::uint64_t min_country_support = 1000);

class FrequencyTables {
 public:
  static constexpr int kFormatVersion = 1;

  struct Table {
    std::uint64_t n_reports = 0;
    std::vector<std::uint32_t> item_counts;
    std::unordered_map<std::uint64_t, std::uint32_t> pair_counts;
  };

  FrequencyTables() = default;

  std::size_t item_count() const { return global_.item_counts.size(); }
  std::uint64_t min_country_support() const { return min_country_support_; }

  /// Slot of the country's own table, or kGlobalSlot when it has none.
  CountrySlot slot_for(std::string_view country) const {
    auto it = slot_by_country_.find(std::string(country));
    return it == slot_by_country_.end() ? kGlobalSlot : it->second;
  }

  /// Slot used for a pair: the shared country table when both reports come
  /// from the same supported country, otherwise global.
  static CountrySlot pair_slot(CountrySlot a, CountrySlot b) { return a == b ? a : kGlobalSlot; }

  CountrySlot pair_slot(std::string_view country_a, std::string_view country_b) const {
    if (country_a != country_b) return kGlobalSlot;
    return slot_for(country_a);
  }

  const Table& table(CountrySlot slot) const {
    return slot == kGlobalSlot ? global_ : countries_.at(static_cast<std::size_t>(slot));
  }

  const std::vector<std::string>& table_countries() const { return table_countries_; }
  const std::map<std::string, std::uint64_t>& report_counts() const { return report_counts_; }
  std::uint64_t total_reports() const { return global_.n_reports; }

  /// Smoothed marginal rate for an item in a slot. No bounds check.
  double rate(ItemId item, CountrySlot slot) const {
    const Table& t = table(slot);
    return (t.item_counts[item] + 0.5) / (static_cast<double>(t.n_reports) + 1.0);
  }

  double pair_rate(ItemId i, ItemId j, CountrySlot slot) const {
    const Table& t = table(slot);
    auto it = t.pair_counts.find(pair_key(i, j));
    const double c = it == t.pair_counts.end() ? 0.0 : it->second;
    return (c + 0.5) / (static_cast<double>(t.n_reports) + 1.0);
  }

  double lookup_rate(ItemId item, std::string_view country_a, std::string_view country_b) const {
    check_item(item);
    return rate(item, pair_slot(country_a, country_b));
  }

  double pair_rate(ItemId i, ItemId j, std::string_view country_a, std::string_view country_b) const {
    check_item(i);
    check_item(j);
    return pair_rate(i, j, pair_slot(country_a, country_b));
  }

  void check_item(ItemId item) const {
    if (item >= item_count()) throw data_error("unknown item id " + std::to_string(item));
  }

  const CategoricalFrequency& sex() const { return sex_; }
  const CategoricalFrequency& country() const { return country_; }
  const CategoricalFrequency& outcome() const { return outcome_; }

  json to_json(const Ontology& ontology) const {
    json j;
    j["format_version"] = kFormatVersion;
    j["min_country_support"] = min_country_support_;
    std::vector<std::string> items;
    for (ItemId i = 0; i < item_count(); ++i) items.push_back(ontology.item_code(i));
    j["items"] = items;
    j["report_counts"] = report_counts_;
    j["global"] = table_to_json(global_);
    json per = json::object();
    for (std::size_t s = 0; s < countries_.size(); ++s)
      per[table_countries_[s]] = table_to_json(countries_[s]);
    j["countries"] = per;
    j["sex"] = sex_.to_json();
    j["country"] = country_.to_json();
    j["outcome"] = outcome_.to_json();
    return j;
  }

  /// Rejects artifacts with another format version or item vocabulary.
  static FrequencyTables from_json(const json& j, const Ontology& ontology) {
    if (j.value("format_version", 0) != kFormatVersion)
      throw data_error("frequency tables: unsupported format_version");
    const auto items = j.at("items").get<std::vector<std::string>>();
    if (items.size() != ontology.item_count())
      throw data_error("frequency tables: item vocabulary does not match ontology");
    for (ItemId i = 0; i < items.size(); ++i)
      if (items[i] != ontology.item_code(i))
        throw data_error("frequency tables: item '" + items[i] + "' does not match ontology");
    FrequencyTables t;
    t.min_country_support_ = j.at("min_country_support").get<std::uint64_t>();
    t.report_counts_ = j.at("report_counts").get<std::map<std::string, std::uint64_t>>();
    t.global_ = table_from_json(j.at("global"));
    for (const auto& [country, tj] : j.at("countries").items()) {
      t.slot_by_country_[country] = static_cast<CountrySlot>(t.countries_.size());
      t.table_countries_.push_back(country);
      t.countries_.push_back(table_from_json(tj));
    }
    t.sex_ = CategoricalFrequency::from_json(j.at("sex"));
    t.country_ = CategoricalFrequency::from_json(j.at("country"));
    t.outcome_ = CategoricalFrequency::from_json(j.at("outcome"));
    return t;
  }

  friend FrequencyTables build_tables(const Corpus&, const Ontology&, std::uint64_t);

 private:
  static json table_to_json(const Table& t) {
    std::vector<std::uint64_t> keys;
    keys.reserve(t.pair_counts.size());
    for (const auto& [k, _] : t.pair_counts) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    json pairs = json::array();
    for (auto k : keys)
      pairs.push_back({static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xffffffffu),
                       t.pair_counts.at(k)});
    return {{"n_reports", t.n_reports}, {"item_counts", t.item_counts}, {"pair_counts", pairs}};
  }

  static Table table_from_json(const json& j) {
    Table t;
    t.n_reports = j.at("n_reports").get<std::uint64_t>();
    t.item_counts = j.at("item_counts").get<std::vector<std::uint32_t>>();
    for (const auto& p : j.at("pair_counts"))
      t.pair_counts[pair_key(p.at(0).get<ItemId>(), p.at(1).get<ItemId>())] = p.at(2).get<std::uint32_t>();
    return t;
  }

  std::uint64_t min_country_support_ = 1000;
  Table global_;
  std::vector<Table> countries_;
  std::vector<std::string> table_countries_;
  std::unordered_map<std::string, CountrySlot> slot_by_country_;
  std::map<std::string, std::uint64_t> report_counts_;
  CategoricalFrequency sex_, country_, outcome_;
};

inline FrequencyTables build_tables(const Corpus& corpus, const Ontology& ontology,
                                    std::uint64_t min_country_support) {
  if (corpus.empty()) throw data_error("cannot build frequency tables from an empty corpus");
  FrequencyTables t;
  t.min_country_support_ = min_country_support;
  const std::size_t n_items = ontology.item_count();

  for (const auto& r : corpus) ++t.report_counts_[r.country];
  // std::map iteration gives a deterministic slot order.
  for (const auto& [country, n] : t.report_counts_) {
    if (n < min_country_support) continue;
    t.slot_by_country_[country] = static_cast<CountrySlot>(t.countries_.size());
    t.table_countries_.push_back(country);
    t.countries_.emplace_back();
  }

  auto init = [&](FrequencyTables::Table& tab) { tab.item_counts.assign(n_items, 0); };
  init(t.global_);
  for (auto& c : t.countries_) init(c);

  auto accumulate = [](FrequencyTables::Table& tab, const std::vector<ItemId>& items) {
    ++tab.n_reports;
    for (std::size_t a = 0; a < items.size(); ++a) {
      ++tab.item_counts[items[a]];
      for (std::size_t b = a + 1; b < items.size(); ++b) ++tab.pair_counts[pair_key(items[a], items[b])];
    }
  };

  std::map<std::string, std::map<std::string, std::uint64_t>> sex_counts, country_counts, outcome_counts;
  for (const auto& r : corpus) {
    const auto items = report_items(r, ontology);
    accumulate(t.global_, items);
    if (auto slot = t.slot_for(r.country); slot != kGlobalSlot)
      accumulate(t.countries_[static_cast<std::size_t>(slot)], items);
    if (r.sex != Sex::unknown) ++sex_counts[r.country][std::string(to_string(r.sex))];
    ++country_counts[r.country][r.country];
    if (r.outcome) ++outcome_counts[r.country][*r.outcome];
  }
  t.sex_ = CategoricalFrequency::from_counts("sex", sex_counts);
  t.country_ = CategoricalFrequency::from_counts("country", country_counts);
  t.outcome_ = CategoricalFrequency::from_counts("outcome", outcome_counts);
  return t;
}

}  // namespace casematch
