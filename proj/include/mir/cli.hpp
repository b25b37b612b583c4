#pragma once

namespace mir::cli {

// Full command-line surface. Returns the process exit status: 0 on success,
// 1 on usage errors (bad flags, missing files), 2 on data errors (corrupt
// containers, shape mismatches).
int run(int argc, const char* const* argv);

}  // namespace mir::cli
