#ifndef HETBATCH_TOOLS_CLI_COMMANDS_H_
#define HETBATCH_TOOLS_CLI_COMMANDS_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace hetbatch::cli {

enum ExitCode {
  kExitOk = 0,
  kExitInfeasible = 2,
  kExitInput = 3,
  kExitInvariant = 4,
};

// Runs the hetbatch command line with args excluding the program name.
// Reports go to --out when given, otherwise to out; diagnostics go to err.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace hetbatch::cli

#endif  // HETBATCH_TOOLS_CLI_COMMANDS_H_
