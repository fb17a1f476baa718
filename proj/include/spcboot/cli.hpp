#pragma once

#include <iosfwd>

namespace spcboot {

inline constexpr int exit_ok = 0;
inline constexpr int exit_input_error = 2;
inline constexpr int exit_numerical_error = 3;

/// Entry point of the spcboot command-line tool. `in` feeds `monitor --data -`.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace spcboot
