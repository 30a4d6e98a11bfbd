#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace loopcoord::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 2,
    kNumerical = 3,
};

/// Parses argv and runs one subcommand. Diagnostics go to `err`, human
/// summaries to `out`; results are written to the files named by --out.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace loopcoord::cli
