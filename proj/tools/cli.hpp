#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ncm::cli {

inline constexpr const char* kToolVersion = "ncmeter 1.0.0";

// Runs one command line (args excludes the program name). Data goes to
// `out`, structured errors to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::string& path);

}  // namespace ncm::cli
