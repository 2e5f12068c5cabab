#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace marketeq {

enum class ErrorCode {
  kInvalidParams,
  kInvalidScenario,
  kStateOutsideGlobalBox,
  kEmptyPolytope,
  kNumericalFailure,
  kWrongPricingMode,
  kEmptyBalanceSet,
  kInfeasibleMarket,
  kInfeasiblePoint,
  kAssumptionViolation,
  kTooLargeForOracle,
  kOracleNotConverged,
  kIo,
};

std::string_view ToString(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ToString(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace marketeq
