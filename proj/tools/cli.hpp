#pragma once

#include <iosfwd>

namespace taskalloc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Parses argv and runs one subcommand. Usage errors return 2, data and
/// model errors return 1 with the library's message on `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace taskalloc::cli
