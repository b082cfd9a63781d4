#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eco {

/// Failure categories. Each maps onto one CLI exit code.
enum class ErrorKind {
  usage,         // bad arguments, unknown ids
  input_format,  // malformed files, dimension mismatches
  numeric,       // degeneracy, divergence
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::input_format: return "input_format";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

enum class ErrorCode {
  behind_camera,
  degenerate_axes,
  degenerate_baseline,
  degenerate_orientation,
  invalid_span,
  oversized_warp,
  singular_warp,
  strip_too_wide,
  invalid_weight,
  empty_input,
  dimension_mismatch,
  bad_format,
  invalid_rotation,
  invalid_intrinsics,
  training_diverged,
  not_found,
  invalid_edit,
  invalid_argument,
  io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::behind_camera: return "behind_camera";
    case ErrorCode::degenerate_axes: return "degenerate_axes";
    case ErrorCode::degenerate_baseline: return "degenerate_baseline";
    case ErrorCode::degenerate_orientation: return "degenerate_orientation";
    case ErrorCode::invalid_span: return "invalid_span";
    case ErrorCode::oversized_warp: return "oversized_warp";
    case ErrorCode::singular_warp: return "singular_warp";
    case ErrorCode::strip_too_wide: return "strip_too_wide";
    case ErrorCode::invalid_weight: return "invalid_weight";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::bad_format: return "bad_format";
    case ErrorCode::invalid_rotation: return "invalid_rotation";
    case ErrorCode::invalid_intrinsics: return "invalid_intrinsics";
    case ErrorCode::training_diverged: return "training_diverged";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::invalid_edit: return "invalid_edit";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

constexpr ErrorKind kind_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::behind_camera:
    case ErrorCode::degenerate_axes:
    case ErrorCode::degenerate_baseline:
    case ErrorCode::degenerate_orientation:
    case ErrorCode::invalid_span:
    case ErrorCode::oversized_warp:
    case ErrorCode::singular_warp:
    case ErrorCode::training_diverged:
      return ErrorKind::numeric;
    case ErrorCode::strip_too_wide:
    case ErrorCode::dimension_mismatch:
    case ErrorCode::bad_format:
    case ErrorCode::invalid_rotation:
    case ErrorCode::invalid_intrinsics:
    case ErrorCode::io:
      return ErrorKind::input_format;
    case ErrorCode::invalid_weight:
    case ErrorCode::empty_input:
    case ErrorCode::not_found:
    case ErrorCode::invalid_edit:
    case ErrorCode::invalid_argument:
      return ErrorKind::usage;
  }
  return ErrorKind::usage;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorKind kind() const noexcept { return kind_of(code_); }

 private:
  ErrorCode code_;
};

/// Iteration index is kept so callers can report where training blew up.
class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(long iteration)
      : Error(ErrorCode::training_diverged,
              "non-finite loss at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace eco
