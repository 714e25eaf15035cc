#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "casematch/report.hpp"

namespace casematch {

/// Accepted prefixes for previous-transmission case identifiers.
class PrefixWhitelist {
 public:
  PrefixWhitelist() : PrefixWhitelist(defaults()) {}

  explicit PrefixWhitelist(std::vector<std::string> prefixes) : prefixes_(std::move(prefixes)) {
    if (prefixes_.empty()) throw usage_error("prefix whitelist must not be empty");
    for (const auto& p : prefixes_)
      if (p.empty()) throw usage_error("prefix whitelist entries must be nonempty");
  }

  static std::vector<std::string> defaults() {
    return {"DE-", "GB-", "FR-", "IT-", "NL-", "GR-", "BE-", "PT-", "CA-", "ES-",
            "PL-", "CZ-", "JP-", "US-", "DK-", "FI-", "AT-", "AU-", "SE-", "PHH",
            "RO-", "IE-", "CH-", "HU-", "NO-", "IN-", "SK-", "BR-", "HR-", "EG-"};
  }

  bool accepts(std::string_view id) const {
    return std::any_of(prefixes_.begin(), prefixes_.end(),
                       [&](const std::string& p) { return id.starts_with(p); });
  }

  const std::vector<std::string>& prefixes() const { return prefixes_; }

 private:
  std::vector<std::string> prefixes_;
};

namespace detail {
inline bool links_to(const SenderIds& from, const SenderIds& to, const PrefixWhitelist& whitelist) {
  if (!from.previous_transmission_id) return false;
  const std::string& id = *from.previous_transmission_id;
  if (!whitelist.accepts(id)) return false;
  return (to.safety_report_id && *to.safety_report_id == id) ||
         (to.regulator_case_id && *to.regulator_case_id == id) ||
         (to.other_case_id && *to.other_case_id == id);
}
}  // namespace detail

/// 1 when either report's A.1.11.2 exactly equals one of the other report's
/// A.1.0.1 / A.1.10.1 / A.1.10.2 values and starts with a whitelisted prefix.
inline int externally_indicated(const SenderIds& a, const SenderIds& b, const PrefixWhitelist& whitelist) {
  return (detail::links_to(a, b, whitelist) || detail::links_to(b, a, whitelist)) ? 1 : 0;
}

inline int externally_indicated(const Report& a, const Report& b, const PrefixWhitelist& whitelist) {
  return externally_indicated(a.ids, b.ids, whitelist);
}

}  // namespace casematch
