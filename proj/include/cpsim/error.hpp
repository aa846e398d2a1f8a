#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpsim {

enum class ErrorCode {
  kDomain,
  kUnreachableLink,
  kBehindCamera,
  kDegenerate,
  kInfeasible,
  kBudget,
  kCalibrationInfeasible,
  kGridTooLarge,
  kFit,
  kParse,
  kValidation,
  kIo,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type. `field` names the
// offending parameter (config path or argument name) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

// Throws kDomain/kValidation with the field name attached.
void require(bool condition, ErrorCode code, const std::string& field,
             const std::string& message);

}  // namespace cpsim
