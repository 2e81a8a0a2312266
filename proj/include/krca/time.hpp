#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace krca {

// Seconds since the Unix epoch, UTC. All collection timestamps are
// second-precision; fractional seconds in the input are truncated.
using Timestamp = std::int64_t;

// Parses an RFC 3339 timestamp ("2020-12-10T00:00:00Z", offsets allowed).
std::optional<Timestamp> parse_rfc3339(std::string_view text);

// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_rfc3339(Timestamp t);

}  // namespace krca
