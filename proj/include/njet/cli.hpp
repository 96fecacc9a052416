#pragma once

namespace njet::cli {

/// Subcommand dispatch for the njet tool. Returns the process exit code:
/// 0 success, 1 usage error, 2 runtime failure.
int run(int argc, char** argv);

}  // namespace njet::cli
