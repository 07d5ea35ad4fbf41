#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loco {

enum class ErrorCode {
  input_shape,
  validation,
  configuration,
  training_divergence,
  fit,
  numerical,
  metric,
  split,
  cell,
  tuning,
  format_version,
  format_size_mismatch,
  format_label_range,
  format_parse,
  io,
  config_parse,
  run_failed,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure in the engine surfaces as one of these; `code()` is what
// callers (and tests) branch on, `what()` is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace loco
