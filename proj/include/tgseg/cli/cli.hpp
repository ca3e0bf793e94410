#pragma once

namespace tgseg::cli {

// Full command-line surface. Exit 0 on success, 2 on usage or argument
// parse errors (with usage text), 1 on runtime failures (one-line error on
// stderr).
int run(int argc, const char* const* argv);

}  // namespace tgseg::cli
