#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/geometry.hpp"
#include "rtmpc/optkit.hpp"
#include "rtmpc/synthesis.hpp"

namespace rtmpc {

/// Stage constraint sets of the separable problem. Stage variables are
/// y_k = (q_k, v_k) for k < N and y_N = q_N.
struct StageSets {
  int nx = 0, nu = 0;
  HPolytope Y0_base;    ///< stage-0 rows that do not involve x0
  MatrixXd Y0_param_F;  ///< F_Z: membership rows F_Z (x0 - q0) <= g_Z
  VectorXd Y0_param_g;
  HPolytope Yk;  ///< q in X(-)Z, v in U(-)KZ, Aq + Bv in X(-)Z
  HPolytope YN;  ///< X_T

  /// Stage-0 rows F y0 <= g instantiated at x0.
  void first_stage_rows(const VectorXd& x0, MatrixXd& F, VectorXd& g) const;
};

/// Throws Error(EmptyStageSet) when a stage set is empty.
StageSets build_stage_sets(const TubeSynthesis& syn, const PlantModel& model);

/// Dynamics coupling G y = 0 with block row k (k = 1..N) reading
/// D y_k - C y_{k-1} (D = I on the terminal stage), and stage weights
/// J_k(y) = y'H_k y.
struct CouplingStructure {
  int N = 0, nx = 0, nu = 0;
  MatrixXd C;  ///< [A B]
  MatrixXd D;  ///< [I 0]
  std::vector<MatrixXd> H;  ///< H_0..H_N, blkdiag(Q,R) then P

  int stage_dim(int k) const { return k < N ? nx + nu : nx; }
  /// Dense G (N*nx rows).
  MatrixXd G() const;
};

CouplingStructure build_coupling(const TubeSynthesis& syn, const PlantModel& model, int N);

/// J(y) = sum_k y_k'H_k y_k.
double stage_cost_sum(const CouplingStructure& cs, const std::vector<VectorXd>& y);

/// Linear coefficients of y_k in lambda'G y: g_0 = -C'l_1,
/// g_k = D'l_k - C'l_{k+1}, g_N = l_N. `lambda` is indexed 1..N.
std::vector<VectorXd> stage_linear_terms(const CouplingStructure& cs,
                                         const std::vector<VectorXd>& lambda);

/// max-abs of G y.
double dynamics_residual(const CouplingStructure& cs, const std::vector<VectorXd>& y);

enum class StageKind { First, Middle, Terminal };

const char* to_string(StageKind kind);

/// Decoupled stage QP  min 1/2 xi'H xi + theta'xi  s.t.  F xi <= g + E x0.
/// E has zero columns except for the first stage.
struct StageTemplate {
  StageKind kind = StageKind::Middle;
  MatrixXd H;
  MatrixXd F;
  VectorXd g;
  MatrixXd E;

  int num_vars() const { return static_cast<int>(H.rows()); }
  int num_rows() const { return static_cast<int>(F.rows()); }
  int x0_dim() const { return static_cast<int>(E.cols()); }
  int param_dim() const { return num_vars() + x0_dim(); }
};

/// Everything the online controllers need, built once per horizon.
struct TubeProblem {
  PlantModel model;
  TubeSynthesis syn;
  int N = 0;
  StageSets sets;
  CouplingStructure coupling;
  StageTemplate first, middle, terminal;
  TrackingLqr lqr;

  int nx() const { return model.nx(); }
  int nu() const { return model.nu(); }
  const StageTemplate& stage(int k) const {
    return k == 0 ? first : (k == N ? terminal : middle);
  }
};

TubeProblem build_problem(const PlantModel& model, const TubeSynthesis& syn, int N);

/// Condensed form of the tube MPC problem in z = (q0, v0, ..., v_{N-1}):
/// min 1/2 z'Hz  s.t.  F z <= g0 + E x0.
struct CondensedQP {
  struct RowOrigin {
    int stage;
    int row;       ///< row in the stage's F
    double scale;  ///< local multiplier = condensed multiplier * scale
  };

  int N = 0, nx = 0, nu = 0;
  MatrixXd H;
  VectorXd c;
  MatrixXd F;
  VectorXd g0;
  MatrixXd E;
  std::vector<std::vector<RowOrigin>> origins;  ///< per condensed row
  std::vector<MatrixXd> S;                      ///< y_k = S_k z

  int num_vars() const { return static_cast<int>(H.rows()); }
  VectorXd g(const VectorXd& x0) const { return g0 + E * x0; }
  std::vector<VectorXd> expand(const VectorXd& z) const;
};

/// Rows are normalized and exact duplicates merged.
CondensedQP build_condensed(const TubeProblem& prob);

/// Dynamics multipliers lambda_1..lambda_N (entry 0 empty) from a primal
/// optimum y and per-stage inequality multipliers mu_k, by the costate
/// recursion of the stage stationarity conditions.
std::vector<VectorXd> recover_duals(const TubeProblem& prob, const std::vector<VectorXd>& y,
                                    const std::vector<VectorXd>& mu);

/// u = v0 + K (x0 - q0).
VectorXd tube_feedback(const VectorXd& x0, const VectorXd& q0, const VectorXd& v0,
                       const MatrixXd& K);

/// Short description of which block makes the problem infeasible at x0.
std::string diagnose_infeasibility(const TubeProblem& prob, const VectorXd& x0);

}  // namespace rtmpc
