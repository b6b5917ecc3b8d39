#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace pathmon {

// Offset east of UTC, in seconds. Source tables declare one of these; every
// Timestamp is stored in UTC.
struct UtcOffset {
    std::int32_t seconds = 0;

    // Accepts "UTC", "Z", "+HH:MM", "-HH:MM", "+HHMM".
    static UtcOffset parse(std::string_view text);
};

// Second-resolution instant, UTC.
class Timestamp {
public:
    constexpr Timestamp() = default;
    constexpr explicit Timestamp(std::int64_t epoch_seconds) : seconds_(epoch_seconds) {}

    static Timestamp from_civil(int year, unsigned month, unsigned day, int hour = 0,
                                int minute = 0, int second = 0);

    // Parses "YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|+HH:MM]". A string without an
    // explicit offset is interpreted in `assumed`. Returns nullopt on malformed
    // input.
    static std::optional<Timestamp> parse_iso(std::string_view text, UtcOffset assumed = {});

    constexpr std::int64_t epoch_seconds() const noexcept { return seconds_; }

    // "YYYY-MM-DDTHH:MM:SSZ"
    std::string to_iso() const;

    constexpr Timestamp operator+(std::int64_t delta) const { return Timestamp(seconds_ + delta); }
    constexpr std::int64_t operator-(Timestamp other) const { return seconds_ - other.seconds_; }

    constexpr auto operator<=>(const Timestamp&) const = default;

private:
    std::int64_t seconds_ = 0;
};

// Result of combining separate date and time fields.
struct BuiltTimestamp {
    std::optional<Timestamp> value;
    bool time_inferred = false;  // date present, time absent: placed at midnight
    bool malformed = false;
};

// Combine a date field and an optional time field ("HH:MM" or "HH:MM:SS") into
// one instant. A missing date yields no timestamp; a missing time yields
// midnight with `time_inferred` set; unparseable fields yield no timestamp and
// `malformed`.
BuiltTimestamp build_timestamp(const std::optional<std::string>& date_value,
                               const std::optional<std::string>& time_value,
                               UtcOffset offset = {});

}  // namespace pathmon
