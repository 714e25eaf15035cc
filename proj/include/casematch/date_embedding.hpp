#pragma once

// Sparse day-vector embedding of a report's dates and its cosine similarity.
//
// Each eligible date sets a one at its day index (days since 1900-01-01);
// the vector is then convolved with a 7-day kernel so that near matches
// score partially.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "casematch/core.hpp"

namespace casematch {

/// Odd-length convolution kernel centred on offset 0.
struct DateKernel {
  std::vector<double> weights;

  int radius() const { return static_cast<int>(weights.size() / 2); }

  /// (4 - |offset|) / 4 over offsets -3..+3.
  static DateKernel triangular() { return {{0.25, 0.5, 0.75, 1.0, 0.75, 0.5, 0.25}}; }
  static DateKernel box() { return {{1, 1, 1, 1, 1, 1, 1}}; }
};

class DateVector {
 public:
  using Entry = std::pair<std::int32_t, double>;

  DateVector() = default;

  /// Entries must be sorted by index with strictly positive magnitudes.
  explicit DateVector(std::vector<Entry> entries) : entries_(std::move(entries)) {
    double sq = 0;
    for (const auto& [_, v] : entries_) sq += v * v;
    norm_ = std::sqrt(sq);
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  double norm() const { return norm_; }
  const std::vector<Entry>& entries() const { return entries_; }

  double at(std::int32_t index) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), index,
                               [](const Entry& e, std::int32_t i) { return e.first < i; });
    return (it != entries_.end() && it->first == index) ? it->second : 0.0;
  }

  friend bool operator==(const DateVector&, const DateVector&) = default;

 private:
  std::vector<Entry> entries_;
  double norm_ = 0.0;
};

inline DateVector build_date_vector(std::span<const Day> dates, const DateKernel& kernel = DateKernel::triangular()) {
  std::map<std::int32_t, double> acc;
  const int r = kernel.radius();
  std::vector<Day> unique(dates.begin(), dates.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  for (const Day d : unique) {
    if (!in_global_range(d)) throw data_error("date " + format_day(d) + " outside 1900-01-01..2050-12-31");
    const std::int32_t centre = day_index(d);
    for (int off = -r; off <= r; ++off) {
      const std::int32_t idx = centre + off;
      if (idx < 0 || idx > kLastDayIndex) continue;
      const double w = kernel.weights[static_cast<std::size_t>(off + r)];
      if (w > 0) acc[idx] += w;
    }
  }
  return DateVector(std::vector<DateVector::Entry>(acc.begin(), acc.end()));
}

/// Cosine of two sparse day vectors; 0 when either is empty. Walks the
/// smaller vector and gallops through the larger one.
inline double date_similarity(const DateVector& a, const DateVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  const auto& small = a.size() <= b.size() ? a.entries() : b.entries();
  const auto& large = a.size() <= b.size() ? b.entries() : a.entries();
  double dot = 0.0;
  auto cursor = large.begin();
  for (const auto& [idx, v] : small) {
    cursor = std::lower_bound(cursor, large.end(), idx,
                              [](const DateVector::Entry& e, std::int32_t i) { return e.first < i; });
    if (cursor == large.end()) break;
    if (cursor->first == idx) dot += v * cursor->second;
  }
  const double cos = dot / (a.norm() * b.norm());
  return std::clamp(cos, 0.0, 1.0);
}

}  // namespace casematch
