#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace checkguard::text {

/// Replaces every invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view in);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

/// Splits on '\n'. A trailing newline does not produce an empty last element.
std::vector<std::string_view> split_lines(std::string_view s);

/// Lowercased maximal runs of ASCII alphanumerics. Everything else
/// (including '_') separates tokens, so "TORCH_CHECK" yields {"torch", "check"}.
std::vector<std::string> word_tokens(std::string_view s);

/// True when `needle` occurs as a contiguous run inside `hay`. An empty
/// needle never matches.
bool contains_token_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

using TimePoint = std::chrono::sys_seconds;

/// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(TimePoint t);

/// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM:SS" with optional "Z" or a
/// "+HH:MM"/"-HH:MM" offset. Throws std::invalid_argument.
TimePoint parse_iso8601(std::string_view s);

/// Half-up decimal rounding, robust to binary representation of values
/// such as 94.515.
double round_half_up(double value, int decimals);
std::string format_fixed(double value, int decimals);

} // namespace checkguard::text
