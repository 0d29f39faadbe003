#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zslgmm::cli {

/// Runs one command line (without the program name). Returns the process
/// exit status: 0 on success, 1 on any error, 2 when a report was written but
/// too many trials failed.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zslgmm::cli
