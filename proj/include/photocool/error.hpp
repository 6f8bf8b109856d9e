#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace photocool {

enum class ErrorKind {
  invalid_parameter,
  degenerate_detuning,
  instability,
  heating_regime,
  grid_too_coarse,
  negative_occupancy,
  nonstationary_trajectory,
  too_few_segments,
  instability_detected,
  nan_detected,
  heating_detuning,
  no_feasible_point,
  fit_diverged,
  underdetermined,
  parse_error,
  validation_error,
  io_error,
};

std::string_view to_string(ErrorKind kind);

/// Every failure the library reports carries a kind; the CLI maps kinds to
/// exit codes (see exit_code_for).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// 0 ok, 2 validation, 3 instability/heating, 4 simulation abort,
/// 5 optimization/fit failure.
int exit_code_for(ErrorKind kind);

/// %g formatting for diagnostics; std::to_string prints tiny values as 0.
inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace photocool
