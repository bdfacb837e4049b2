#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace scpf {

enum class ErrorCode {
  invalid_argument,
  singular_routing,
  zero_load_slice,
  undefined_relative_load,
  zero_vector,
  degenerate_geometry,
  infeasible_target,
  slice_overloaded,
  solver_stall,
  line_search_exhausted,
  no_convergence,
  empty_polytope,
  infeasible_under_ss,
  horizon_too_short,
  all_zero,
  nonpositive_distance,
  insufficient_samples,
  config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::singular_routing: return "SingularRouting";
    case ErrorCode::zero_load_slice: return "ZeroLoadSlice";
    case ErrorCode::undefined_relative_load: return "UndefinedRelativeLoad";
    case ErrorCode::zero_vector: return "ZeroVector";
    case ErrorCode::degenerate_geometry: return "DegenerateGeometry";
    case ErrorCode::infeasible_target: return "InfeasibleTarget";
    case ErrorCode::slice_overloaded: return "SliceOverloaded";
    case ErrorCode::solver_stall: return "SolverStall";
    case ErrorCode::line_search_exhausted: return "LineSearchExhausted";
    case ErrorCode::no_convergence: return "NoConvergence";
    case ErrorCode::empty_polytope: return "EmptyPolytope";
    case ErrorCode::infeasible_under_ss: return "InfeasibleUnderSS";
    case ErrorCode::horizon_too_short: return "HorizonTooShort";
    case ErrorCode::all_zero: return "AllZero";
    case ErrorCode::nonpositive_distance: return "NonpositiveDistance";
    case ErrorCode::insufficient_samples: return "InsufficientSamples";
    case ErrorCode::config: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can report which module rejected the input.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorCode::invalid_argument, what);
}

}  // namespace scpf
