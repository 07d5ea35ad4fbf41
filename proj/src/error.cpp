#include "loco/error.hpp"

namespace loco {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::input_shape: return "input-shape error";
    case ErrorCode::validation: return "validation error";
    case ErrorCode::configuration: return "configuration error";
    case ErrorCode::training_divergence: return "training divergence";
    case ErrorCode::fit: return "fit error";
    case ErrorCode::numerical: return "numerical error";
    case ErrorCode::metric: return "metric error";
    case ErrorCode::split: return "split error";
    case ErrorCode::cell: return "cell error";
    case ErrorCode::tuning: return "tuning error";
    case ErrorCode::format_version: return "format version mismatch";
    case ErrorCode::format_size_mismatch: return "size mismatch";
    case ErrorCode::format_label_range: return "label out of range";
    case ErrorCode::format_parse: return "format parse error";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::config_parse: return "config parse error";
    case ErrorCode::run_failed: return "run failed";
  }
  return "error";
}

}  // namespace loco
