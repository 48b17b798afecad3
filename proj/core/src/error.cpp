#include "mapfw/error.hpp"

namespace mapfw {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownCellChar: return "UnknownCellChar";
    case ErrorCode::TooManyAgents: return "TooManyAgents";
    case ErrorCode::NoReachableGoal: return "NoReachableGoal";
    case ErrorCode::StateInvalid: return "StateInvalid";
    case ErrorCode::EmptyPath: return "EmptyPath";
    case ErrorCode::WrongStart: return "WrongStart";
    case ErrorCode::GoalOnObstacle: return "GoalOnObstacle";
    case ErrorCode::Unsolved: return "Unsolved";
    case ErrorCode::UnreachablePosition: return "UnreachablePosition";
    case ErrorCode::EgoNotInState: return "EgoNotInState";
    case ErrorCode::BadDataset: return "BadDataset";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::ZeroWeightSum: return "ZeroWeightSum";
    case ErrorCode::DatasetEmpty: return "DatasetEmpty";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::MissingNodeRef: return "MissingNodeRef";
    case ErrorCode::EmptyBBox: return "EmptyBBox";
    case ErrorCode::MapTooSmall: return "MapTooSmall";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::BadDimensions: return "BadDimensions";
    case ErrorCode::ParamsIncompatible: return "ParamsIncompatible";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::BadConfig: return "BadConfig";
  }
  return "Unknown";
}

}  // namespace mapfw
