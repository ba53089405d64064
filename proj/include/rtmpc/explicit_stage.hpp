#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/problem.hpp"

namespace rtmpc {

/// Critical region {p | F p <= g} with optimizer xi(p) = A_law p + b_law.
struct CriticalRegion {
  MatrixXd F;
  VectorXd g;
  MatrixXd A_law;
  VectorXd b_law;
  std::vector<int> active;
};

/// Piecewise affine solution of a stage QP over the parameter p = theta
/// (middle/terminal) or p = (theta, x0) (first stage).
struct ExplicitStageMap {
  StageKind kind = StageKind::Middle;
  int param_dim = 0;
  int num_vars = 0;
  VectorXd box_lo, box_hi;
  std::vector<CriticalRegion> regions;
};

struct EnumerationOptions {
  int max_rows = 64;          ///< TemplateTooLarge above this
  double min_radius = 1e-7;   ///< Chebyshev radius below which a region is dropped
  double licq_tol = 1e-9;
  bool prune_rows = true;     ///< LP redundancy pass on every region
};

/// Enumerates all LICQ active sets of size <= num_vars, keeps those whose
/// critical region meets the parameter box with a nonempty interior.
ExplicitStageMap enumerate_regions(const StageTemplate& st, const VectorXd& box_lo,
                                   const VectorXd& box_hi, const EnumerationOptions& opts = {});

/// Point location by sequential scan. `cache` holds the last hit region (or -1)
/// and is tried first. Returns nullopt when no region contains p.
std::optional<VectorXd> evaluate(const ExplicitStageMap& map, const VectorXd& p,
                                 int* cache = nullptr, double tol = 1e-9);

/// Parameter vector of a stage: theta, with x0 appended for the first stage.
VectorXd stage_parameter(const StageTemplate& st, const VectorXd& theta, const VectorXd& x0);

struct ExplicitStageMaps {
  ExplicitStageMap first;
  ExplicitStageMap middle;
  ExplicitStageMap terminal;

  const ExplicitStageMap& for_kind(StageKind k) const {
    return k == StageKind::First ? first : (k == StageKind::Middle ? middle : terminal);
  }
};

/// Symmetric boxes [-r, r] per stage kind.
struct ParameterBoxes {
  VectorXd first, middle, terminal;
};

ExplicitStageMaps build_explicit_maps(const TubeProblem& prob, const ParameterBoxes& boxes,
                                      const EnumerationOptions& opts = {});

}  // namespace rtmpc
