#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace dart {

inline constexpr const char* kToolVersion = "dart 0.1.0";

// Full command line minus the program name. Writes results to `out` and
// diagnostics to `err`. Returns 0 on success, 1 on usage errors, 2 on
// data or validation errors, 3 on numeric divergence.
int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                std::ostream& err = std::cerr);

}  // namespace dart
