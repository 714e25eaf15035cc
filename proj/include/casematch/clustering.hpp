#pragma once

// Duplicate groups as connected components of the suspected-pair graph.

#include <algorithm>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "casematch/core.hpp"

namespace casematch {

struct DuplicateGroup {
  std::vector<std::string> members;  // sorted, size >= 2
  std::string representative;        // members.front()

  friend bool operator==(const DuplicateGroup&, const DuplicateGroup&) = default;
};

struct ClusterResult {
  std::vector<DuplicateGroup> groups;  // ordered by representative
  std::uint64_t remaining = 0;         // reports left after keeping one per group

  json to_json() const {
    json g = json::array();
    for (const auto& d : groups) g.push_back({{"representative", d.representative}, {"members", d.members}});
    return {{"groups", g}, {"group_count", groups.size()}, {"remaining", remaining}};
  }
};

/// remaining = n_total - sum over groups of (|group| - 1).
inline ClusterResult cluster_groups(std::span<const std::pair<std::string, std::string>> pairs, std::uint64_t n_total) {
  std::map<std::string, std::size_t> index;
  for (const auto& [a, b] : pairs) {
    if (a == b) throw usage_error("cluster: pair joins report '" + a + "' with itself");
    index.emplace(a, 0);
    index.emplace(b, 0);
  }
  std::vector<std::string> names;
  names.reserve(index.size());
  for (auto& [name, i] : index) {
    i = names.size();
    names.push_back(name);
  }
  std::vector<std::size_t> parent(names.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [a, b] : pairs) {
    const auto ra = find(index.at(a)), rb = find(index.at(b));
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  // Names are sorted, so the smallest index in a component is its
  // lexicographically smallest member.
  std::map<std::size_t, DuplicateGroup> by_root;
  for (std::size_t i = 0; i < names.size(); ++i) by_root[find(i)].members.push_back(names[i]);
  ClusterResult out;
  std::uint64_t removed = 0;
  for (auto& [_, g] : by_root) {
    g.representative = g.members.front();
    removed += g.members.size() - 1;
    out.groups.push_back(std::move(g));
  }
  if (removed > n_total) throw usage_error("cluster: more grouped reports than the corpus holds");
  out.remaining = n_total - removed;
  return out;
}

}  // namespace casematch
