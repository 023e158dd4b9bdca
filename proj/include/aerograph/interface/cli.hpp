#pragma once

#include <iosfwd>

namespace aerograph {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

/// The `aerograph` command line. Reports go to `out`, diagnostics to `err`.
/// Returns the process exit code: 0 success, 1 usage, 2 data or validation,
/// 3 runtime or numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aerograph
