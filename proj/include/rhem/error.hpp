#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rhem {

enum class ErrorCode {
  // input validation
  UnknownActor,
  DecreasingTime,
  EmptyReceiverSet,
  SelfLoop,
  MissingValue,
  UnknownKind,
  DuplicateActor,
  MalformedInput,
  EmptyStream,
  UnknownAttribute,
  InvalidSpec,
  InvalidConfig,
  ConfigMismatch,
  OutOfOrderEvent,
  OrderExceeded,
  InsufficientControls,
  RiskSetTooLarge,
  InfeasibleSize,
  DimensionMismatch,
  NonIdentifiable,
  Io,
  // numerical failures
  Separation,
  Singular,
  MaxIterations,
};

std::string_view to_string(ErrorCode code);

/// True for failures of the optimizer rather than of the inputs.
constexpr bool is_numerical(ErrorCode code) {
  return code == ErrorCode::Separation || code == ErrorCode::Singular ||
         code == ErrorCode::MaxIterations;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rhem
