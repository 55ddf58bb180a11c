#pragma once

namespace ct::cli {

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on runtime
/// failure and 2 on usage errors.
int run(int argc, const char* const* argv);

}  // namespace ct::cli
