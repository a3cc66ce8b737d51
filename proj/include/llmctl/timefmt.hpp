#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace llmctl {

/// Seconds since the Unix epoch, UTC, no leap seconds.
using EpochSeconds = std::int64_t;

/// Parses `YYYY-MM-DD HH:MM:SS`. Throws ValidationError on anything else.
EpochSeconds parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DD HH:MM:SS`, the ordering-preserving form used by
/// the history tables.
std::string format_timestamp(EpochSeconds t);

/// Formats as `YYYY-MM-DDTHH:MM:SS` for run identifiers.
std::string format_iso_compact(EpochSeconds t);

/// Current wall clock, whole seconds.
EpochSeconds now_epoch_seconds();

}  // namespace llmctl
