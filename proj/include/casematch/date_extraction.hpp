#pragma once

// Extracts date mentions from free-text narratives and normalises them to
// day intervals. Partial dates widen to the interval they denote
// ("March 2021" -> 2021-03-01..2021-03-31, "2019" -> the whole year).

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "casematch/report.hpp"

namespace casematch {

/// How a pattern's capture groups map to a date.
enum class DateLayout {
  year_month_day,        // (y)(m)(d)
  day_monthname_year,    // (d)(month name)(y)
  monthname_day_year,    // (month name)(d)(y)
  numeric_day_month,     // (a)(b)(y): order resolved by value and locale
  monthname_year,        // (month name)(y)
  year_only,             // (y)
};

inline std::optional<DateLayout> parse_layout(std::string_view s) {
  if (s == "year_month_day") return DateLayout::year_month_day;
  if (s == "day_monthname_year") return DateLayout::day_monthname_year;
  if (s == "monthname_day_year") return DateLayout::monthname_day_year;
  if (s == "numeric_day_month") return DateLayout::numeric_day_month;
  if (s == "monthname_year") return DateLayout::monthname_year;
  if (s == "year_only") return DateLayout::year_only;
  return std::nullopt;
}

struct DatePattern {
  std::string name;
  std::string regex;
  DateLayout layout;
};

struct DateMention {
  std::string raw;
  DateInterval interval;
  std::string pattern_id;
  std::size_t offset = 0;
};

namespace detail {

inline const std::string kMonthAlternation =
    "(jan(?:uary)?|feb(?:ruary)?|mar(?:ch)?|apr(?:il)?|may|june?|july?|aug(?:ust)?|"
    "sep(?:t(?:ember)?)?|oct(?:ober)?|nov(?:ember)?|dec(?:ember)?)\\b\\.?";

inline unsigned month_from_name(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  static const char* const prefixes[] = {"jan", "feb", "mar", "apr", "may", "jun",
                                         "jul", "aug", "sep", "oct", "nov", "dec"};
  for (unsigned m = 0; m < 12; ++m)
    if (name.rfind(prefixes[m], 0) == 0) return m + 1;
  return 0;
}

}  // namespace detail

/// Built-in pattern set, most specific first. Earlier patterns claim their
/// text span so later, coarser patterns cannot re-match inside it.
inline std::vector<DatePattern> default_date_patterns() {
  const std::string& mon = detail::kMonthAlternation;
  return {
      {"iso", R"(\b(\d{4})-(\d{1,2})-(\d{1,2})\b)", DateLayout::year_month_day},
      {"day_month_year", R"(\b(\d{1,2})(?:st|nd|rd|th)?\s+(?:of\s+)?)" + mon + R"(,?\s+(\d{4})\b)",
       DateLayout::day_monthname_year},
      {"month_day_year", R"(\b)" + mon + R"(\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})\b)",
       DateLayout::monthname_day_year},
      {"numeric", R"(\b(\d{1,2})[/.](\d{1,2})[/.](\d{4})\b)", DateLayout::numeric_day_month},
      {"month_year", R"(\b)" + mon + R"(,?\s+(\d{4})\b)", DateLayout::monthname_year},
      {"year", R"(\b(\d{4})\b)", DateLayout::year_only},
  };
}

/// Countries whose numeric dates are month-first; everything else is
/// day-first.
struct LocaleConfig {
  std::set<std::string> month_first_countries{"US"};

  bool month_first(std::string_view country) const {
    return month_first_countries.count(std::string(country)) > 0;
  }
};

class DateExtractor {
 public:
  DateExtractor() : DateExtractor(default_date_patterns()) {}

  explicit DateExtractor(std::vector<DatePattern> patterns, LocaleConfig locale = {})
      : patterns_(std::move(patterns)), locale_(std::move(locale)) {
    compiled_.reserve(patterns_.size());
    for (const auto& p : patterns_) {
      try {
        compiled_.emplace_back(p.regex, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
      } catch (const std::regex_error& e) {
        throw usage_error("date pattern '" + p.name + "': " + e.what());
      }
    }
  }

  /// Pattern config: {"patterns": [{"name", "regex", "layout"}...],
  /// "month_first_countries": [...]}. Order is significant.
  static DateExtractor from_json(const json& j) {
    std::vector<DatePattern> patterns;
    for (const auto& p : j.at("patterns")) {
      auto layout = parse_layout(p.at("layout").get<std::string>());
      if (!layout) throw usage_error("unknown date layout '" + p.at("layout").get<std::string>() + "'");
      patterns.push_back({p.at("name").get<std::string>(), p.at("regex").get<std::string>(), *layout});
    }
    LocaleConfig locale;
    if (j.contains("month_first_countries"))
      locale.month_first_countries = j.at("month_first_countries").get<std::set<std::string>>();
    return DateExtractor(std::move(patterns), std::move(locale));
  }

  static DateExtractor load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot open date pattern file '" + path + "'");
    return from_json(json::parse(in));
  }

  const std::vector<DatePattern>& patterns() const { return patterns_; }
  const LocaleConfig& locale() const { return locale_; }

  std::vector<DateMention> extract(std::string_view narrative, std::string_view locale_hint) const {
    const std::string text(narrative);
    std::vector<std::pair<std::size_t, std::size_t>> claimed;
    std::vector<DateMention> out;
    const bool month_first = locale_.month_first(locale_hint);

    for (std::size_t p = 0; p < compiled_.size(); ++p) {
      for (auto it = std::sregex_iterator(text.begin(), text.end(), compiled_[p]); it != std::sregex_iterator();
           ++it) {
        const auto& m = *it;
        const std::size_t begin = static_cast<std::size_t>(m.position(0));
        const std::size_t end = begin + static_cast<std::size_t>(m.length(0));
        const bool overlaps = std::any_of(claimed.begin(), claimed.end(), [&](const auto& c) {
          return begin < c.second && c.first < end;
        });
        if (overlaps) continue;
        // An invalid date still claims its span so that, e.g., the year of
        // "31/02/2021" is not picked up by a coarser pattern.
        const auto interval = to_interval(m, patterns_[p].layout, month_first);
        if (patterns_[p].layout != DateLayout::year_only || interval) claimed.emplace_back(begin, end);
        if (!interval) continue;
        out.push_back({m.str(0), *interval, patterns_[p].name, begin});
      }
    }
    std::sort(out.begin(), out.end(), [](const DateMention& a, const DateMention& b) { return a.offset < b.offset; });
    return out;
  }

 private:
  static int to_int(const std::ssub_match& s) { return std::stoi(s.str()); }

  static std::optional<DateInterval> single(int y, int m, int d) {
    if (m < 1 || m > 12 || d < 1 || d > 31) return std::nullopt;
    auto day = make_day(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
    if (!day) return std::nullopt;
    return DateInterval{*day, *day, DateSource::narrative};
  }

  static std::optional<DateInterval> to_interval(const std::smatch& m, DateLayout layout, bool month_first) {
    std::optional<DateInterval> out;
    switch (layout) {
      case DateLayout::year_month_day:
        out = single(to_int(m[1]), to_int(m[2]), to_int(m[3]));
        break;
      case DateLayout::day_monthname_year:
        out = single(to_int(m[3]), static_cast<int>(detail::month_from_name(m[2].str())), to_int(m[1]));
        break;
      case DateLayout::monthname_day_year:
        out = single(to_int(m[3]), static_cast<int>(detail::month_from_name(m[1].str())), to_int(m[2]));
        break;
      case DateLayout::numeric_day_month: {
        const int a = to_int(m[1]), b = to_int(m[2]), y = to_int(m[3]);
        bool day_first = !month_first;
        if (a > 12 && b <= 12) day_first = true;
        else if (b > 12 && a <= 12) day_first = false;
        out = day_first ? single(y, b, a) : single(y, a, b);
        break;
      }
      case DateLayout::monthname_year: {
        const int y = to_int(m[2]);
        const unsigned mon = detail::month_from_name(m[1].str());
        auto first = make_day(y, mon, 1);
        auto last = last_day_of_month(y, mon);
        if (first && last) out = DateInterval{*first, *last, DateSource::narrative};
        break;
      }
      case DateLayout::year_only: {
        const int y = to_int(m[1]);
        auto first = make_day(y, 1, 1);
        auto last = make_day(y, 12, 31);
        if (first && last) out = DateInterval{*first, *last, DateSource::narrative};
        break;
      }
    }
    if (out && (!in_global_range(out->start) || !in_global_range(out->end))) return std::nullopt;
    return out;
  }

  std::vector<DatePattern> patterns_;
  LocaleConfig locale_;
  std::vector<std::regex> compiled_;
};

inline constexpr int kMaxEmbeddingUncertaintyDays = 7;

/// Start days of intervals usable for the date embedding: uncertainty of at
/// most 7 days, and never a 1 January start (a common placeholder for an
/// unknown month and day). Result is sorted and de-duplicated.
inline std::vector<Day> eligible_embedding_dates(std::span<const DateInterval> dates) {
  std::vector<Day> out;
  for (const auto& d : dates) {
    if (d.uncertainty_days() > kMaxEmbeddingUncertaintyDays) continue;
    if (is_january_first(d.start)) continue;
    out.push_back(d.start);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// All of a report's intervals: structured dates plus narrative mentions.
inline std::vector<DateInterval> report_date_intervals(const Report& r, const DateExtractor& extractor) {
  std::vector<DateInterval> out;
  for (const auto& d : r.dates) out.push_back(d.interval);
  for (const auto& m : extractor.extract(r.narrative, r.country)) out.push_back(m.interval);
  return out;
}

}  // namespace casematch
