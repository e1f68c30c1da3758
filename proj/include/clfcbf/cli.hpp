#pragma once

namespace clfcbf {

// Command-line front end: verify | verify-safety | synthesize | simulate |
// plot-region. Exit codes: 0 verified/success, 1 usage or I/O error,
// 2 unknown (no certificate at the chosen degrees), 3 incompatibility
// witness found.
int run(int argc, const char* const* argv);

}  // namespace clfcbf
