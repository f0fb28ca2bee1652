#include "voxelfield/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <string_view>

namespace voxelfield {

int resolve_threads(int fallback) {
    if (const char* env = std::getenv("VOXELFIELD_THREADS")) {
        const std::string_view s(env);
        int n = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec == std::errc{} && ptr == s.data() + s.size() && n > 0) return n;
    }
    return fallback < 1 ? 1 : fallback;
}

} // namespace voxelfield
