#pragma once

#include <string>
#include <vector>

namespace waitk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Runs one `waitk` invocation; `args` excludes the program name. Returns the
// process exit code. Errors are reported on stderr.
int run(std::vector<std::string> args);
int run(int argc, char** argv);

// Expands `--config path`: each `key=value` line becomes `--key=value`
// unless that flag is already given. Throws DataError if the file is
// unreadable.
std::vector<std::string> expand_config(std::vector<std::string> args);

}  // namespace waitk::cli
