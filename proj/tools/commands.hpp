#pragma once

#include <iosfwd>

namespace rcabs::cli {

/// Exit codes: 0 success, 2 configuration or usage error, 3 numerical
/// failure, 4 I/O failure. Errors are also reported on err as one JSON line.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rcabs::cli
