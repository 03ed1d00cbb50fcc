#pragma once

#include <imbfc/error.hpp>

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace imbfc {

inline constexpr int quarters_per_day = 96;
inline constexpr int minutes_per_quarter = 15;

/// A 15-minute market period, counted from 1970-01-01T00:00Z.
struct QuarterIndex {
    std::int64_t epoch_quarter = 0;

    constexpr auto operator<=>(const QuarterIndex&) const = default;

    constexpr QuarterIndex operator+(std::int64_t k) const { return {epoch_quarter + k}; }
    constexpr QuarterIndex operator-(std::int64_t k) const { return {epoch_quarter - k}; }
    constexpr std::int64_t operator-(QuarterIndex other) const { return epoch_quarter - other.epoch_quarter; }
    QuarterIndex& operator+=(std::int64_t k) {
        epoch_quarter += k;
        return *this;
    }
};

/// Half-open span of quarters [begin, end).
struct QuarterSpan {
    QuarterIndex begin;
    QuarterIndex end;

    constexpr std::int64_t size() const { return end - begin; }
    constexpr bool contains(QuarterIndex q) const { return begin <= q && q < end; }
    constexpr bool empty() const { return end <= begin; }
    constexpr bool operator==(const QuarterSpan&) const = default;
};

namespace detail {

inline int parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole) {
    int value = 0;
    if (pos + len > s.size()) {
        throw AlignmentError("malformed timestamp '" + std::string(whole) + "'");
    }
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, value);
    if (ec != std::errc{} || ptr != s.data() + pos + len) {
        throw AlignmentError("malformed timestamp '" + std::string(whole) + "'");
    }
    return value;
}

} // namespace detail

inline QuarterIndex quarter_from_date(int year, unsigned month, unsigned day, int hour = 0, int minute = 0) {
    using namespace std::chrono;
    const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw AlignmentError("invalid calendar date");
    }
    const auto days_since_epoch = sys_days{ymd}.time_since_epoch().count();
    const std::int64_t minutes = days_since_epoch * 1440LL + hour * 60LL + minute;
    if (minutes % minutes_per_quarter != 0) {
        throw AlignmentError("time is not on the 15-minute grid");
    }
    return {minutes / minutes_per_quarter};
}

/// Parses `YYYY-MM-DDTHH:MM[:SS]` followed by `Z` or `+00:00` (UTC only).
inline QuarterIndex parse_timestamp(std::string_view text) {
    std::string_view s = text;
    if (s.ends_with("Z")) {
        s.remove_suffix(1);
    } else if (s.ends_with("+00:00")) {
        s.remove_suffix(6);
    } else {
        throw AlignmentError("timestamp '" + std::string(text) + "' is not UTC (expected 'Z' suffix)");
    }
    if (s.size() != 16 && s.size() != 19) {
        throw AlignmentError("malformed timestamp '" + std::string(text) + "'");
    }
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        (s.size() == 19 && s[16] != ':')) {
        throw AlignmentError("malformed timestamp '" + std::string(text) + "'");
    }
    const int year = detail::parse_fixed_int(s, 0, 4, text);
    const int month = detail::parse_fixed_int(s, 5, 2, text);
    const int day = detail::parse_fixed_int(s, 8, 2, text);
    const int hour = detail::parse_fixed_int(s, 11, 2, text);
    const int minute = detail::parse_fixed_int(s, 14, 2, text);
    const int second = s.size() == 19 ? detail::parse_fixed_int(s, 17, 2, text) : 0;
    if (hour > 23 || minute > 59 || second > 59) {
        throw AlignmentError("malformed timestamp '" + std::string(text) + "'");
    }
    if (second != 0 || minute % minutes_per_quarter != 0) {
        throw AlignmentError("timestamp '" + std::string(text) + "' is not on the 15-minute grid");
    }
    if (month < 1 || month > 12) {
        throw AlignmentError("malformed timestamp '" + std::string(text) + "'");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                          std::chrono::day{static_cast<unsigned>(day)}};
    if (!ymd.ok()) {
        throw AlignmentError("invalid calendar date in '" + std::string(text) + "'");
    }
    return quarter_from_date(year, static_cast<unsigned>(month), static_cast<unsigned>(day), hour, minute);
}

struct CivilTime {
    int year;
    unsigned month;
    unsigned day;
    int hour;
    int minute;
};

inline CivilTime to_civil(QuarterIndex q) {
    using namespace std::chrono;
    const std::int64_t minutes = q.epoch_quarter * minutes_per_quarter;
    std::int64_t days = minutes / 1440;
    std::int64_t rem = minutes % 1440;
    if (rem < 0) {
        rem += 1440;
        --days;
    }
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
            static_cast<int>(rem / 60), static_cast<int>(rem % 60)};
}

/// Canonical `YYYY-MM-DDTHH:MM:SSZ` form.
inline std::string format_timestamp(QuarterIndex q) {
    const CivilTime c = to_civil(q);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:00Z", c.year, c.month, c.day, c.hour, c.minute);
    return buf;
}

inline std::string format_date(QuarterIndex q) {
    const CivilTime c = to_civil(q);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

/// First quarter of the calendar month containing `q`.
inline QuarterIndex month_start(QuarterIndex q) {
    const CivilTime c = to_civil(q);
    return quarter_from_date(c.year, c.month, 1);
}

/// First quarter of the month `n` months after the month containing `q`.
inline QuarterIndex add_months(QuarterIndex q, int n) {
    const CivilTime c = to_civil(q);
    int m0 = static_cast<int>(c.month) - 1 + n;
    int y = c.year + (m0 >= 0 ? m0 / 12 : -((11 - m0) / 12));
    int m = ((m0 % 12) + 12) % 12;
    return quarter_from_date(y, static_cast<unsigned>(m + 1), 1);
}

inline int minute_of_day(QuarterIndex q) {
    const CivilTime c = to_civil(q);
    return c.hour * 60 + c.minute;
}

} // namespace imbfc
