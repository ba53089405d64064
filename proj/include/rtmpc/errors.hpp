#pragma once

#include <stdexcept>
#include <string>

namespace rtmpc {

enum class ErrorCode {
  InvalidArgument,
  Unbounded,
  DimensionUnsupported,
  NoConvergence,
  NoFiniteDetermination,
  EmptyTightening,
  EmptyStageSet,
  Infeasible,
  StageInfeasible,
  TemplateTooLarge,
  Config,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown by the decoupled stage solve; `stage() == 0` means the measured
/// state is outside the region where the tube controller is feasible.
class StageInfeasibleError : public Error {
 public:
  StageInfeasibleError(int stage, const std::string& what)
      : Error(ErrorCode::StageInfeasible, what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

}  // namespace rtmpc
