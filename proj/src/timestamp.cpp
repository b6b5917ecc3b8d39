#include "pathmon/timestamp.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

#include "pathmon/error.hpp"

namespace pathmon {
namespace {

bool parse_fixed(std::string_view text, std::size_t pos, std::size_t width, int& out) {
    if (pos + width > text.size()) return false;
    for (std::size_t i = pos; i < pos + width; ++i) {
        if (text[i] < '0' || text[i] > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + width, out);
    return ec == std::errc{} && ptr == text.data() + pos + width;
}

std::optional<std::int32_t> parse_offset(std::string_view text) {
    if (text == "Z" || text == "UTC" || text == "utc" || text.empty()) return 0;
    if (text[0] != '+' && text[0] != '-') return std::nullopt;
    const int sign = text[0] == '-' ? -1 : 1;
    int hh = 0;
    int mm = 0;
    if (text.size() == 6 && text[3] == ':') {
        if (!parse_fixed(text, 1, 2, hh) || !parse_fixed(text, 4, 2, mm)) return std::nullopt;
    } else if (text.size() == 5) {
        if (!parse_fixed(text, 1, 2, hh) || !parse_fixed(text, 3, 2, mm)) return std::nullopt;
    } else if (text.size() == 3) {
        if (!parse_fixed(text, 1, 2, hh)) return std::nullopt;
    } else {
        return std::nullopt;
    }
    if (hh > 23 || mm > 59) return std::nullopt;
    return sign * (hh * 3600 + mm * 60);
}

struct Date {
    int year;
    unsigned month;
    unsigned day;
};

std::optional<Date> parse_date(std::string_view text) {
    int y = 0;
    int m = 0;
    int d = 0;
    if (text.size() != 10 || (text[4] != '-' && text[4] != '/') || text[7] != text[4]) {
        return std::nullopt;
    }
    if (!parse_fixed(text, 0, 4, y) || !parse_fixed(text, 5, 2, m) || !parse_fixed(text, 8, 2, d)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                          std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date{y, unsigned(m), unsigned(d)};
}

// "HH:MM", "HH:MM:SS" or "HH:MM:SS.fff" (fraction truncated).
std::optional<int> parse_time_of_day(std::string_view text) {
    int h = 0;
    int m = 0;
    int s = 0;
    if (text.size() < 5 || text[2] != ':') return std::nullopt;
    if (!parse_fixed(text, 0, 2, h) || !parse_fixed(text, 3, 2, m)) return std::nullopt;
    if (text.size() > 5) {
        if (text.size() < 8 || text[5] != ':' || !parse_fixed(text, 6, 2, s)) return std::nullopt;
        if (text.size() > 8) {
            if (text[8] != '.' || text.size() == 9) return std::nullopt;
            for (std::size_t i = 9; i < text.size(); ++i) {
                if (text[i] < '0' || text[i] > '9') return std::nullopt;
            }
        }
    }
    if (h > 23 || m > 59 || s > 60) return std::nullopt;
    return h * 3600 + m * 60 + s;
}

}  // namespace

UtcOffset UtcOffset::parse(std::string_view text) {
    auto seconds = parse_offset(text);
    if (!seconds) throw Error("bad_timezone", "unsupported timezone '" + std::string(text) + "'");
    return UtcOffset{*seconds};
}

Timestamp Timestamp::from_civil(int year, unsigned month, unsigned day, int hour, int minute,
                                int second) {
    using namespace std::chrono;
    const sys_days days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
    return Timestamp(std::int64_t(days.time_since_epoch().count()) * 86400 + hour * 3600 +
                     minute * 60 + second);
}

std::optional<Timestamp> Timestamp::parse_iso(std::string_view text, UtcOffset assumed) {
    if (text.size() < 10) return std::nullopt;
    auto date = parse_date(text.substr(0, 10));
    if (!date) return std::nullopt;
    const Timestamp midnight = from_civil(date->year, date->month, date->day);
    if (text.size() == 10) return midnight + (-assumed.seconds);
    if (text[10] != 'T' && text[10] != ' ') return std::nullopt;
    std::string_view rest = text.substr(11);

    std::int32_t offset = assumed.seconds;
    const auto zone_pos = rest.find_first_of("Z+-");
    if (zone_pos != std::string_view::npos) {
        auto parsed = parse_offset(rest.substr(zone_pos));
        if (!parsed) return std::nullopt;
        offset = *parsed;
        rest = rest.substr(0, zone_pos);
    }
    auto tod = parse_time_of_day(rest);
    if (!tod) return std::nullopt;
    return midnight + (*tod - offset);
}

std::string Timestamp::to_iso() const {
    using namespace std::chrono;
    std::int64_t days = seconds_ / 86400;
    std::int64_t rem = seconds_ % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), int(rem / 3600), int(rem / 60 % 60),
                  int(rem % 60));
    return buf;
}

BuiltTimestamp build_timestamp(const std::optional<std::string>& date_value,
                               const std::optional<std::string>& time_value, UtcOffset offset) {
    BuiltTimestamp out;
    if (!date_value || date_value->empty()) return out;

    auto date = parse_date(std::string_view(*date_value).substr(0, 10));
    if (!date || date_value->size() > 10) {
        // Tolerate a full datetime in the date column when no time column is given.
        if (!time_value) {
            out.value = Timestamp::parse_iso(*date_value, offset);
            out.malformed = !out.value;
            return out;
        }
        out.malformed = true;
        return out;
    }
    const Timestamp midnight = Timestamp::from_civil(date->year, date->month, date->day);
    if (!time_value || time_value->empty()) {
        out.value = midnight + (-offset.seconds);
        out.time_inferred = true;
        return out;
    }
    auto tod = parse_time_of_day(*time_value);
    if (!tod) {
        out.malformed = true;
        return out;
    }
    out.value = midnight + (*tod - offset.seconds);
    return out;
}

}  // namespace pathmon
