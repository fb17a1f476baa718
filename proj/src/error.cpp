#include "spcboot/error.hpp"

namespace spcboot {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::degenerate_sample: return "DegenerateSample";
    case ErrorCode::non_positive_data: return "NonPositiveData";
    case ErrorCode::incompatible_model_chart: return "IncompatibleModelChart";
    case ErrorCode::non_finite_observation: return "NonFiniteObservation";
    case ErrorCode::target_unattainable: return "TargetUnattainable";
    case ErrorCode::zero_exceedance: return "ZeroExceedance";
    case ErrorCode::non_absorbing: return "NonAbsorbing";
    case ErrorCode::bracket_failure: return "BracketFailure";
    case ErrorCode::transform_domain: return "TransformDomain";
    case ErrorCode::degenerate_resample: return "DegenerateResample";
    case ErrorCode::too_many_failures: return "TooManyFailures";
    case ErrorCode::rank_deficient: return "RankDeficient";
    case ErrorCode::separation: return "Separation";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::truncated_runs: return "TruncatedRuns";
  }
  return "Unknown";
}

bool is_input_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::degenerate_sample:
    case ErrorCode::non_positive_data:
    case ErrorCode::incompatible_model_chart:
    case ErrorCode::non_finite_observation:
    case ErrorCode::parse_error:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace spcboot
