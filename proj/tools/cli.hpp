#pragma once

#include <string>
#include <vector>

namespace cgt::cli {

struct RunResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

// Parses argv-style args (without the program name), executes the command and
// captures the emitted report. Exit codes: 0 ok, 1 usage, 2 domain, 3 bound.
RunResult run(const std::vector<std::string>& args);

int main_entry(int argc, char** argv);

}  // namespace cgt::cli
