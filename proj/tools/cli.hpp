#ifndef CONMIX_TOOLS_CLI_HPP
#define CONMIX_TOOLS_CLI_HPP

#include <iosfwd>

namespace conmix::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kValidation = 2, kNotConverged = 3, kNumeric = 4 };

/// Entry point of the conmix tool: subcommands fit, simulate, moments, corr
/// and compare.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace conmix::cli

#endif
