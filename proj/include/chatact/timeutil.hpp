#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace chatact {

using Microseconds = std::chrono::microseconds;
using Timestamp = std::chrono::sys_time<Microseconds>;

// Accepts RFC3339 ("2021-03-01T10:00:00Z", "...T10:00:00.25+02:00") or epoch
// seconds with an optional decimal fraction ("1614592800.000200"). Throws
// DataError on anything else.
Timestamp parse_timestamp(std::string_view text);

// Epoch seconds given as a JSON number.
Timestamp timestamp_from_epoch_seconds(double seconds);

// UTC RFC3339. Fractional digits are emitted only when non-zero, trimmed to
// microsecond precision.
std::string format_rfc3339(Timestamp ts);

// "90s", "10m", "1h", "1h30m", "2d" or a bare number of seconds.
Microseconds parse_duration(std::string_view text);

}  // namespace chatact
