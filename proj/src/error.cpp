#include "cpsim/error.hpp"

namespace cpsim {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kUnreachableLink: return "unreachable_link";
    case ErrorCode::kBehindCamera: return "behind_camera";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kBudget: return "budget";
    case ErrorCode::kCalibrationInfeasible: return "calibration_infeasible";
    case ErrorCode::kGridTooLarge: return "grid_too_large";
    case ErrorCode::kFit: return "fit";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kValidation: return "validation";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void require(bool condition, ErrorCode code, const std::string& field,
             const std::string& message) {
  if (!condition) throw Error(code, field + ": " + message, field);
}

}  // namespace cpsim
