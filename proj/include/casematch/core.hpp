#pragma once

// Shared error type and calendar helpers.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace casematch {

/// Distinguishes caller mistakes from bad input data; the CLI maps these to
/// exit codes 1 and 2.
enum class ErrorKind { usage, data };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error data_error(const std::string& message) {
  return Error(ErrorKind::data, message);
}

inline Error usage_error(const std::string& message) {
  return Error(ErrorKind::usage, message);
}

using Day = std::chrono::sys_days;

inline constexpr Day kFirstDay{std::chrono::year{1900} / std::chrono::January / 1};
inline constexpr Day kLastDay{std::chrono::year{2050} / std::chrono::December / 31};

/// Days since 1900-01-01.
inline std::int32_t day_index(Day d) {
  return static_cast<std::int32_t>((d - kFirstDay).count());
}

inline Day day_from_index(std::int32_t index) {
  return kFirstDay + std::chrono::days{index};
}

inline constexpr std::int32_t kLastDayIndex =
    static_cast<std::int32_t>((kLastDay - kFirstDay).count());

inline bool in_global_range(Day d) { return d >= kFirstDay && d <= kLastDay; }

/// nullopt for impossible calendar dates such as 31 February.
inline std::optional<Day> make_day(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) return std::nullopt;
  return Day{ymd};
}

inline std::optional<Day> last_day_of_month(int year, unsigned month) {
  const std::chrono::year_month_day_last ymdl{
      std::chrono::year{year},
      std::chrono::month_day_last{std::chrono::month{month}}};
  if (!ymdl.ok()) return std::nullopt;
  return Day{ymdl};
}

namespace detail {
inline bool parse_uint(std::string_view text, int& out) {
  if (text.empty()) return false;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end;
}
}  // namespace detail

/// Strict YYYY-MM-DD.
inline std::optional<Day> try_parse_day(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!detail::parse_uint(text.substr(0, 4), y) ||
      !detail::parse_uint(text.substr(5, 2), m) ||
      !detail::parse_uint(text.substr(8, 2), d))
    return std::nullopt;
  if (m < 1 || d < 1) return std::nullopt;
  return make_day(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

inline Day parse_day(std::string_view text) {
  auto d = try_parse_day(text);
  if (!d) throw data_error("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  return *d;
}

inline std::string format_day(Day d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline bool is_january_first(Day d) {
  const std::chrono::year_month_day ymd{d};
  return ymd.month() == std::chrono::January && ymd.day() == std::chrono::day{1};
}

/// Closed interval on an integer day axis. Used for ages (in days) and for
/// calendar intervals (as day indices).
struct DayInterval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool valid() const { return lo <= hi; }
  friend bool operator==(const DayInterval&, const DayInterval&) = default;
};

/// 0 when the intervals overlap, otherwise the number of days between them.
inline std::int64_t interval_gap(const DayInterval& a, const DayInterval& b) {
  if (a.hi < b.lo) return b.lo - a.hi;
  if (b.hi < a.lo) return a.lo - b.hi;
  return 0;
}

}  // namespace casematch
