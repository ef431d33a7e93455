#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rmpm {

// Every distinct failure condition the toolkit can report. Tests match on
// these codes rather than on message text.
enum class Errc {
  // contract / usage
  invalid_argument,
  empty_input,
  // numerics
  non_finite,
  asymmetric,
  not_psd,
  no_variance,
  length_mismatch,
  constant_series,
  // representations and predictions
  alignment,
  shape_mismatch,
  // file formats
  io,
  bad_magic,
  truncated_payload,
  payload_length,
  unsupported_dtype,
  count_mismatch,
  config,
  // training and experiments
  unknown_transform,
  target_unreachable,
  non_finite_loss,
  experiment_failed,
};

// Coarse category used to pick a process exit code.
enum class ErrorCategory { usage, data, experiment };

std::string_view errc_name(Errc code) noexcept;
ErrorCategory category_of(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

inline void require(bool condition, Errc code, const char* what) {
  if (!condition) fail(code, what);
}

}  // namespace rmpm
