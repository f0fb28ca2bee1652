#pragma once

#include <iosfwd>

namespace voxelfield {

/// Entry point of the `voxelfield` tool. Returns 0 on success, 1 on a runtime failure
/// (one-line diagnostic on `err`) and 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace voxelfield
