#ifndef MILES_TOOLS_CLI_HPP
#define MILES_TOOLS_CLI_HPP

#include <iosfwd>
#include <span>
#include <string>

namespace miles::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Entry point of the `miles_cli` tool. `args` excludes the program name.
int cli_main(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace miles::cli

#endif  // MILES_TOOLS_CLI_HPP
