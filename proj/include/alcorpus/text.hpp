#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace alcorpus::text {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Strict parse: the whole field must be a finite decimal number.
std::optional<double> parse_double(std::string_view field);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

/// 64-bit FNV-1a, printed as 16 hex digits by hex64().
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace alcorpus::text
