#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/geometry.hpp"

namespace rtmpc {

/// x+ = A x + B u + w with x in X, u in U, w in W.
struct PlantModel {
  MatrixXd A;
  MatrixXd B;
  HPolytope X;
  HPolytope U;
  HPolytope W;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  /// Dimension checks only; the set assumptions are part of validation.
  void check_dimensions() const;
};

/// Stage cost q'Qq + v'Rv.
struct CostWeights {
  MatrixXd Q;
  MatrixXd R;
  /// Throws Error(InvalidArgument) unless Q, R are symmetric positive definite.
  void check(int nx, int nu) const;
};

struct DareResult {
  MatrixXd P;
  MatrixXd K;  ///< u = K x
  int iterations = 0;
};

/// Riccati fixed-point iteration from P = Q until the increment drops below
/// `tol` (max-abs). Throws Error(NoConvergence) after `max_iter` sweeps.
DareResult solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                      const MatrixXd& R, double tol = 1e-12, int max_iter = 100000);

/// Residual P - A'PA + A'PB (R + B'PB)^{-1} B'PA - Q (max-abs).
double dare_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P);

struct RpiResult {
  SupportSet Z;        ///< (1 - alpha)^{-1} (A_K^0 W (+) ... (+) A_K^{s-1} W)
  double alpha = 0.0;  ///< A_K^s W is contained in alpha W
  int s = 0;
  double M = 0.0;      ///< max_j sum_i h_W(+-(A_K^i)' e_j), i < s
};

/// Outer epsilon-approximation of the minimal RPI set of z+ = A_K z + w.
/// Picks the smallest s with alpha(s) <= eps / (eps + M(s)).
RpiResult compute_rpi(const MatrixXd& A_K, const HPolytope& W, double eps = 1e-4,
                      int max_s = 1000);

/// Maximal positively invariant set of q+ = A_K q inside
/// {q | q in X_tight, K q in U_tight}, by adding A_K^t-propagated constraints
/// until a whole block is redundant.
HPolytope compute_mpi_terminal(const MatrixXd& A_K, const HPolytope& X_tight,
                               const HPolytope& U_tight, const MatrixXd& K,
                               int max_t = 500);

struct TubeSynthesis {
  MatrixXd Q, R;
  MatrixXd K, P;
  SupportSet Z;
  HPolytope Z_h;                 ///< explicit H-form of Z
  bool Z_h_approximate = false;  ///< true for nx > 2 (sampled outer approximation)
  double alpha = 0.0;
  int s = 0;
  double rpi_M = 0.0;
  HPolytope X_T;
  HPolytope X_tight;  ///< X (-) Z
  HPolytope U_tight;  ///< U (-) KZ

  MatrixXd closed_loop(const PlantModel& m) const { return m.A + m.B * K; }
};

struct SynthesisOptions {
  double eps_rpi = 1e-4;
  int outer_directions = 32;  ///< only used for nx > 2
};

/// Runs DARE, RPI, tightening and MPI. Throws Error(EmptyTightening) when a
/// tightened set is empty or loses the origin from its interior.
TubeSynthesis synthesize(const PlantModel& model, const CostWeights& weights,
                         const SynthesisOptions& opts = {});

/// max over facets f of Z_h of h_Z(A_K' f) + h_W(f) - h_Z(f). Nonpositive when
/// A_K Z (+) W is inside Z.
double rpi_invariance_violation(const TubeSynthesis& syn, const PlantModel& model);

struct ValidationItem {
  std::string name;
  bool pass = false;
  double margin = 0.0;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_pass() const;
  const ValidationItem* find(const std::string& name) const;
};

/// Set inclusions of the terminal ingredients, the Lyapunov matrix inequality
/// P - A_K'PA_K - Q - K'RK >= -1e-8 I, and the standing set assumptions.
ValidationReport validate_assumptions(const TubeSynthesis& syn, const PlantModel& model);

/// The double-integrator example: A = [1 1; 0 1], B = [0.5; 1],
/// X = {x2 <= 2}, U = {|u| <= 1}, W = {||w||_inf <= 0.1}.
PlantModel case_study_model();
CostWeights case_study_weights();

}  // namespace rtmpc
