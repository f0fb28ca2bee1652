#include "voxelfield/keyvalue.hpp"

#include <charconv>
#include <stdexcept>

namespace voxelfield {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text) {
    std::map<std::string, std::string> out;
    std::size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
        }
    }
    return out;
}

double parse_double_field(std::string_view key, std::string_view value) {
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw std::invalid_argument(std::string(key) + ": expected a number, got '" + std::string(value) + "'");
    }
    return out;
}

long long parse_int_field(std::string_view key, std::string_view value) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw std::invalid_argument(std::string(key) + ": expected an integer, got '" + std::string(value) + "'");
    }
    return out;
}

} // namespace voxelfield
