#pragma once

#include <string>
#include <vector>

namespace ssad::tools {

/// Runs the `ssad` command line. Returns 0 on success, 1 on usage errors and
/// 2 on runtime failures; diagnostics go to stderr.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace ssad::tools
