#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mapfw {

enum class ErrorCode {
  // grid
  MalformedHeader,
  DimensionMismatch,
  UnknownCellChar,
  TooManyAgents,
  NoReachableGoal,
  StateInvalid,
  EmptyPath,
  WrongStart,
  GoalOnObstacle,
  // solvers
  Unsolved,
  UnreachablePosition,
  // tokenizer
  EgoNotInState,
  BadDataset,
  // neural
  ShapeMismatch,
  NonFiniteActivation,
  ZeroWeightSum,
  DatasetEmpty,
  DivergenceDetected,
  BadMagic,
  VersionMismatch,
  // mapgen
  MalformedXml,
  MissingNodeRef,
  EmptyBBox,
  MapTooSmall,
  Degenerate,
  BadDimensions,
  // bench / runtime
  ParamsIncompatible,
  IoFailure,
  PreconditionViolated,
  BadConfig,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mapfw
