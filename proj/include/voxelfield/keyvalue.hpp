#pragma once

#include <map>
#include <string>
#include <string_view>

namespace voxelfield {

/// `key=value` lines; blank lines and `#` comments skipped, whitespace around both sides
/// trimmed. Throws std::invalid_argument naming the line on malformed input or repeated keys.
std::map<std::string, std::string> parse_key_values(std::string_view text);

double parse_double_field(std::string_view key, std::string_view value);
long long parse_int_field(std::string_view key, std::string_view value);

} // namespace voxelfield
