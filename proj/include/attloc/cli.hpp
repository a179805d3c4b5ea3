#pragma once

#include <string>
#include <vector>

namespace attloc {

// Full command-line entry point (synth / train / eval / localize / gradcheck).
// `args` excludes the program name. Returns the process exit code:
// 0 success, 1 usage, 2 data error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace attloc
