#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace snscl::text {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Strict parsers: the whole field must be consumed. Throw std::invalid_argument.
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::uint64_t parse_uint(std::string_view s);
bool parse_bool(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// 64-bit FNV-1a, rendered as 16 hex digits by `hex64`.
std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

}  // namespace snscl::text
