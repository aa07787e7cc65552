#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace floodens {

/// Process exit codes of the command-line tool.
namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kConfig = 2;
inline constexpr int kRefuseOverwrite = 3;
inline constexpr int kDataGap = 4;
}  // namespace exit_code

/// Runs one command; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace floodens
