#pragma once
// UTC timestamp parsing/formatting at second resolution.

#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "riskradar/text.hpp"

namespace riskradar::timeutil {

using Seconds = std::int64_t;  // since the Unix epoch, UTC

namespace detail {

inline std::optional<int> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  for (char c : s)
    if (c < '0' || c > '9') return std::nullopt;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

inline std::optional<Seconds> from_civil(int y, int mo, int d, int h, int mi, int s) {
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Seconds>(days) * 86400 + h * 3600 + mi * 60 + s;
}

inline std::string format_utc(Seconds t) {
  using namespace std::chrono;
  auto day_count = t >= 0 ? t / 86400 : (t - 86399) / 86400;
  Seconds rem = t - day_count * 86400;
  year_month_day ymd{sys_days{days{day_count}}};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600,
                     (rem / 60) % 60, rem % 60);
}

inline std::string format_compact(Seconds t) {
  std::string iso = format_utc(t);
  return iso.substr(0, 4) + iso.substr(5, 2) + iso.substr(8, 2) + iso.substr(11, 2) + iso.substr(14, 2) +
         iso.substr(17, 2);
}

// GDELT style YYYYMMDDHHMMSS.
inline std::optional<Seconds> parse_compact(std::string_view s) {
  if (s.size() != 14) return std::nullopt;
  auto y = detail::parse_int(s.substr(0, 4));
  auto mo = detail::parse_int(s.substr(4, 2));
  auto d = detail::parse_int(s.substr(6, 2));
  auto h = detail::parse_int(s.substr(8, 2));
  auto mi = detail::parse_int(s.substr(10, 2));
  auto se = detail::parse_int(s.substr(12, 2));
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
  return from_civil(*y, *mo, *d, *h, *mi, *se);
}

// RFC 3339 / ISO 8601: YYYY-MM-DDTHH:MM:SS[.frac](Z|+hh:mm|-hh:mm).
inline std::optional<Seconds> parse_rfc3339(std::string_view s) {
  s = text::trim(s);
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':')
    return std::nullopt;
  auto y = detail::parse_int(s.substr(0, 4));
  auto mo = detail::parse_int(s.substr(5, 2));
  auto d = detail::parse_int(s.substr(8, 2));
  auto h = detail::parse_int(s.substr(11, 2));
  auto mi = detail::parse_int(s.substr(14, 2));
  auto se = detail::parse_int(s.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !se) return std::nullopt;
  auto base = from_civil(*y, *mo, *d, *h, *mi, *se);
  if (!base) return std::nullopt;

  std::string_view rest = s.substr(19);
  if (!rest.empty() && rest.front() == '.') {
    rest.remove_prefix(1);
    while (!rest.empty() && rest.front() >= '0' && rest.front() <= '9') rest.remove_prefix(1);
  }
  if (rest == "Z" || rest == "z") return base;
  if (rest.size() == 6 && (rest[0] == '+' || rest[0] == '-') && rest[3] == ':') {
    auto oh = detail::parse_int(rest.substr(1, 2));
    auto om = detail::parse_int(rest.substr(4, 2));
    if (!oh || !om) return std::nullopt;
    Seconds offset = *oh * 3600 + *om * 60;
    return rest[0] == '+' ? *base - offset : *base + offset;
  }
  return std::nullopt;
}

// RFC 822 / 2822 as used by RSS pubDate: [Day, ]DD Mon YYYY HH:MM[:SS] zone.
inline std::optional<Seconds> parse_rfc822(std::string_view s) {
  auto parts = text::split_whitespace(s);
  if (!parts.empty() && parts.front().back() == ',') parts.erase(parts.begin());
  if (parts.size() < 4) return std::nullopt;

  static constexpr std::array<std::string_view, 12> kMonths{"jan", "feb", "mar", "apr", "may", "jun",
                                                            "jul", "aug", "sep", "oct", "nov", "dec"};
  auto day = detail::parse_int(parts[0]);
  std::string mon = text::to_lower(parts[1].substr(0, 3));
  int month = 0;
  for (std::size_t i = 0; i < kMonths.size(); ++i)
    if (kMonths[i] == mon) month = static_cast<int>(i) + 1;
  auto year = detail::parse_int(parts[2]);
  if (!day || month == 0 || !year) return std::nullopt;
  if (*year < 100) *year += *year < 50 ? 2000 : 1900;

  auto hms = text::split(parts[3], ':');
  if (hms.size() < 2 || hms.size() > 3) return std::nullopt;
  auto h = detail::parse_int(hms[0]);
  auto mi = detail::parse_int(hms[1]);
  auto se = hms.size() == 3 ? detail::parse_int(hms[2]) : std::optional<int>(0);
  if (!h || !mi || !se) return std::nullopt;
  auto base = from_civil(*year, month, *day, *h, *mi, *se);
  if (!base) return std::nullopt;

  if (parts.size() < 5) return base;
  std::string zone = text::to_lower(parts[4]);
  if (zone == "gmt" || zone == "ut" || zone == "utc" || zone == "z") return base;
  if (zone.size() == 5 && (zone[0] == '+' || zone[0] == '-')) {
    auto oh = detail::parse_int(std::string_view(zone).substr(1, 2));
    auto om = detail::parse_int(std::string_view(zone).substr(3, 2));
    if (!oh || !om) return std::nullopt;
    Seconds offset = *oh * 3600 + *om * 60;
    return zone[0] == '+' ? *base - offset : *base + offset;
  }
  struct Named {
    std::string_view name;
    int hours;
  };
  static constexpr std::array<Named, 8> kZones{{{"est", -5}, {"edt", -4}, {"cst", -6}, {"cdt", -5},
                                                {"mst", -7}, {"mdt", -6}, {"pst", -8}, {"pdt", -7}}};
  for (const auto& z : kZones)
    if (z.name == zone) return *base - z.hours * 3600;
  return std::nullopt;
}

}  // namespace riskradar::timeutil
