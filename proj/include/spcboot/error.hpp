#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spcboot {

enum class ErrorCode {
  invalid_argument,
  degenerate_sample,
  non_positive_data,
  incompatible_model_chart,
  non_finite_observation,
  target_unattainable,
  zero_exceedance,
  non_absorbing,
  bracket_failure,
  transform_domain,
  degenerate_resample,
  too_many_failures,
  rank_deficient,
  separation,
  no_convergence,
  parse_error,
  truncated_runs,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Input-side errors (bad data or configuration) as opposed to numerical failures.
bool is_input_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace spcboot
