#pragma once

#include <ostream>

namespace flex {

// Exit codes: 0 ok, 1 validation, 2 parse, 3 numerical, 4 I/O.
enum ExitCode : int {
  exit_ok = 0,
  exit_validation = 1,
  exit_parse = 2,
  exit_numerical = 3,
  exit_io = 4,
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flex
