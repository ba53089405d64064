#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace rtmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Linear programming

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;  ///< optimal value of max c.x (only when Optimal)
  VectorXd x;          ///< optimal vertex (only when Optimal)
};

/// max c.x  s.t.  F x <= g, x free.
///
/// Two-phase dense tableau simplex. Dantzig pricing, switching to Bland's rule
/// after a run of degenerate pivots so that it always terminates.
LpResult solve_lp(const VectorXd& c, const MatrixXd& F, const VectorXd& g);

// ---------------------------------------------------------------------------
// Strictly convex QP:  min 1/2 x'Hx + c'x  s.t.  Ae x = be,  F x <= g.
// Multipliers follow L = f + mu_eq'(Ae x - be) + mu_ineq'(F x - g).

struct DenseQP {
  MatrixXd H;
  VectorXd c;
  MatrixXd F;
  VectorXd g;
  MatrixXd Ae;
  VectorXd be;

  int num_vars() const { return static_cast<int>(H.rows()); }
  /// Throws Error(InvalidArgument) on inconsistent sizes, asymmetric H or
  /// min eig(H) <= 0.
  void validate() const;
};

enum class QpStatus { Optimal, Infeasible, IterLimit };

struct QPSolution {
  QpStatus status = QpStatus::Infeasible;
  VectorXd x;
  VectorXd mu_ineq;
  VectorXd mu_eq;
  std::vector<int> active_set;  ///< active inequality indices, ascending
  int iterations = 0;
  double objective = 0.0;
};

/// max of stationarity, primal infeasibility, dual infeasibility and
/// complementarity violations.
double kkt_residual(const DenseQP& qp, const QPSolution& sol);

/// Dual active-set (Goldfarb-Idnani) solver with a Cholesky factor of H
/// computed once at construction.
///
/// Each iteration works with the Schur complement of the active normals in the
/// H^{-1} metric (QR of L^{-1} N). A warm active set is honored: it is loaded,
/// constraints with negative multipliers are shed, and the dual iteration
/// continues from there. Ties between violated constraints go to the lowest
/// index.
class QpSolver {
 public:
  QpSolver() = default;
  explicit QpSolver(const MatrixXd& H);

  int num_vars() const { return static_cast<int>(L_.rows()); }
  const MatrixXd& cholesky_factor() const { return L_; }

  QPSolution solve(const VectorXd& c, const MatrixXd& F, const VectorXd& g,
                   const MatrixXd& Ae, const VectorXd& be,
                   const std::vector<int>* warm = nullptr,
                   int max_iter = -1) const;

  QPSolution solve(const VectorXd& c, const MatrixXd& F, const VectorXd& g,
                   const std::vector<int>* warm = nullptr) const;

 private:
  MatrixXd L_;  // H = L L'
};

QPSolution solve_qp(const DenseQP& qp, const std::vector<int>* warm = nullptr);

// ---------------------------------------------------------------------------
// Equality-constrained tracking QP with block-tridiagonal KKT system:
//
//   min  sum_{k=0}^{N} (y_k - r_k)' H_k (y_k - r_k)
//   s.t. D y_{k+1} = C y_k   (k = 0..N-2)   | Delta_{k+1}
//        y_N       = C y_{N-1}              | Delta_N
//
// with C = [A B], D = [I 0], y_k = (q_k, v_k) for k < N and y_N = q_N, and a
// free initial stage. Multipliers enter the Lagrangian with a plus sign:
// L = sum J_k(y_k - r_k) + sum Delta_k'(D y_k - C y_{k-1}).

class TrackingLqr {
 public:
  TrackingLqr() = default;
  /// stage_H holds H_0..H_{N-1} (each (nx+nu)^2); terminal_H is H_N (nx^2).
  TrackingLqr(const MatrixXd& C, const MatrixXd& D,
              std::vector<MatrixXd> stage_H, MatrixXd terminal_H);

  int horizon() const { return N_; }
  int nx() const { return nx_; }
  int nu() const { return nu_; }

  /// Backward/forward sweep using the precomputed factorization. `r` and `y`
  /// hold N+1 stage vectors; `delta` is indexed 1..N (entry 0 is left empty).
  void solve(const std::vector<VectorXd>& r, std::vector<VectorXd>& y,
             std::vector<VectorXd>& delta) const;

 private:
  int N_ = 0, nx_ = 0, nu_ = 0;
  MatrixXd A_, B_;
  std::vector<MatrixXd> H_;      // H_0..H_N
  std::vector<MatrixXd> S_;      // quadratic value weight, S_0..S_N
  std::vector<MatrixXd> gain_;   // v_k = gain_k q_k + ff_k
  std::vector<MatrixXd> Minv_;   // (H_vv + B'S_{k+1}B)^{-1}
  Eigen::LLT<MatrixXd> S0_llt_;
  // workspace
  mutable std::vector<VectorXd> s_, ff_;
};

/// Convenience wrapper: factorize and solve once.
void solve_eqqp_tridiag(const std::vector<MatrixXd>& stage_H,
                        const MatrixXd& terminal_H,
                        const std::vector<VectorXd>& r, const MatrixXd& C,
                        const MatrixXd& D, std::vector<VectorXd>& y,
                        std::vector<VectorXd>& delta);

}  // namespace rtmpc
