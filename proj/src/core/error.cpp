#include "rmpm/error.hpp"

namespace rmpm {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::empty_input: return "empty input";
    case Errc::non_finite: return "non-finite value";
    case Errc::asymmetric: return "asymmetric matrix";
    case Errc::not_psd: return "matrix not positive semi-definite";
    case Errc::no_variance: return "no variance to explain";
    case Errc::length_mismatch: return "length mismatch";
    case Errc::constant_series: return "undefined correlation (constant series)";
    case Errc::alignment: return "sample alignment violated";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::io: return "i/o failure";
    case Errc::bad_magic: return "bad magic";
    case Errc::truncated_payload: return "truncated payload";
    case Errc::payload_length: return "length mismatch";
    case Errc::unsupported_dtype: return "unsupported dtype";
    case Errc::count_mismatch: return "image/label count mismatch";
    case Errc::config: return "configuration error";
    case Errc::unknown_transform: return "unknown transform";
    case Errc::target_unreachable: return "target unreachable";
    case Errc::non_finite_loss: return "non-finite loss";
    case Errc::experiment_failed: return "experiment failed";
  }
  return "unknown error";
}

ErrorCategory category_of(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::config:
      return ErrorCategory::usage;
    case Errc::target_unreachable:
    case Errc::non_finite_loss:
    case Errc::experiment_failed:
      return ErrorCategory::experiment;
    default:
      return ErrorCategory::data;
  }
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace rmpm
