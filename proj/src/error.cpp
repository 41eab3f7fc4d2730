#include "rhem/error.hpp"

namespace rhem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownActor: return "UnknownActor";
    case ErrorCode::DecreasingTime: return "DecreasingTime";
    case ErrorCode::EmptyReceiverSet: return "EmptyReceiverSet";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::MissingValue: return "MissingValue";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::DuplicateActor: return "DuplicateActor";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::EmptyStream: return "EmptyStream";
    case ErrorCode::UnknownAttribute: return "UnknownAttribute";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::OutOfOrderEvent: return "OutOfOrderEvent";
    case ErrorCode::OrderExceeded: return "OrderExceeded";
    case ErrorCode::InsufficientControls: return "InsufficientControls";
    case ErrorCode::RiskSetTooLarge: return "RiskSetTooLarge";
    case ErrorCode::InfeasibleSize: return "InfeasibleSize";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonIdentifiable: return "NonIdentifiable";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Separation: return "Separation";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::MaxIterations: return "MaxIterations";
  }
  return "Unknown";
}

}  // namespace rhem
