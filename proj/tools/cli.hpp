#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dhtv::cli {

/// Runs one command line (args[0] is the program name). Returns the process
/// exit code: 0 success, 2 usage or input error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dhtv::cli
