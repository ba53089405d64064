#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/controller.hpp"
#include "rtmpc/explicit_stage.hpp"
#include "rtmpc/problem.hpp"
#include "rtmpc/worker_pool.hpp"

namespace rtmpc {

struct RtiConfig {
  int m_bar = 5;
  double gamma = 1.0;
  bool warm_shift = true;
  int workers = 1;
};

/// Primal iterate y_0..y_N and dual iterate lambda_1..lambda_N (lambda[0] is
/// empty), plus the inner iteration counter.
struct AladinState {
  std::vector<VectorXd> y;
  std::vector<VectorXd> lambda;
  int j = 0;

  static AladinState zeros(const CouplingStructure& cs);
  void scale(double s);
};

/// J*(lambda) = sum_k 1/4 c_k' H_k^{-1} c_k with c_k the stage linear terms.
double conjugate_value(const std::vector<VectorXd>& lambda, const CouplingStructure& cs);

/// J(y) + J*(lambda).
double merit(const AladinState& s, const CouplingStructure& cs);

/// Scales y and lambda by sqrt(thr / f) when f = J(y) + J*(lambda) >= thr,
/// thr = gamma^2 x0'Qx0. With thr = 0 and f > 0 the state becomes zero.
/// Returns true when the state was scaled.
bool rescale(AladinState& s, const VectorXd& x0, double gamma, const CouplingStructure& cs,
             const MatrixXd& Q);

/// Solves the stage problems either with the online QP solver or by
/// evaluating explicit maps (falling back to the QP on a location miss).
class StageSolver {
 public:
  explicit StageSolver(const TubeProblem& prob, std::shared_ptr<const ExplicitStageMaps> maps = nullptr);

  bool explicit_mode() const { return maps_ != nullptr; }

  /// Per-stage mutable data: warm active sets and last-hit region caches.
  struct Workspace {
    std::vector<std::vector<int>> warm;
    std::vector<int> cache;
    std::vector<int> misses;
  };
  Workspace make_workspace() const;

  /// argmin 1/2 xi'H xi + theta'xi over stage k's set. Throws
  /// StageInfeasibleError(k).
  VectorXd solve(int k, const VectorXd& theta, const VectorXd& x0, Workspace& ws) const;

 private:
  const TubeProblem* prob_;
  QpSolver first_, middle_, terminal_;
  std::shared_ptr<const ExplicitStageMaps> maps_;
};

/// theta_k = g_k - 2 H_k y_k for every stage.
std::vector<VectorXd> stage_parameters(const TubeProblem& prob, const AladinState& s);

/// Decoupled proximal stage problems min J_k(xi) + g_k'xi + J_k(xi - y_k) over Y_k.
void solve_decoupled(const TubeProblem& prob, const AladinState& s, const VectorXd& x0,
                     const StageSolver& solver, StageSolver::Workspace& ws,
                     std::vector<VectorXd>& xi, WorkerPool* pool = nullptr);

/// Coupled tracking step with references r_k = 2 xi_k - y_k; fills y_next and
/// the multiplier increments delta (indexed 1..N).
void coupled_step(const TubeProblem& prob, const AladinState& s, const std::vector<VectorXd>& xi,
                  std::vector<VectorXd>& y_next, std::vector<VectorXd>& delta);

/// Step 4 shift: y <- (y_1..y_{N-1}, (y_N, 0), 0), lambda <- (lambda_2..lambda_N, 0).
void warm_shift(AladinState& s, const CouplingStructure& cs);

struct IterationDiag {
  long sample = 0;
  int iter = 0;
  double primal_res = 0.0;  ///< max_k ||xi_k - y_k^{j+1}||_inf
  double dual_res = 0.0;    ///< ||Delta||_inf
  double us = 0.0;
};

void write_diagnostics_header(std::ostream& os);
void write_diagnostics_csv(std::ostream& os, const std::vector<IterationDiag>& rows);

/// The real-time ALADIN iteration as a controller: one rti_step per sample.
class AladinController : public TubeController {
 public:
  AladinController(const TubeProblem& prob, RtiConfig cfg,
                   std::shared_ptr<const ExplicitStageMaps> maps = nullptr);

  ControlStep step(const VectorXd& x0) override;
  void reset() override;
  std::string name() const override { return "aladin"; }

  AladinState& state() { return state_; }
  const AladinState& state() const { return state_; }
  const RtiConfig& config() const { return cfg_; }
  const std::vector<VectorXd>& last_xi() const { return xi_; }
  bool last_rescaled() const { return rescaled_; }
  int explicit_misses() const;

  /// Per-iteration diagnostics are appended here when set.
  void set_diagnostics(std::vector<IterationDiag>* sink) { diag_ = sink; }

 private:
  const TubeProblem* prob_;
  RtiConfig cfg_;
  StageSolver solver_;
  StageSolver::Workspace ws_;
  std::unique_ptr<WorkerPool> pool_;
  AladinState state_;
  std::vector<VectorXd> xi_, y_next_, delta_;
  std::vector<IterationDiag>* diag_ = nullptr;
  long sample_ = 0;
  bool rescaled_ = false;
};

struct ContractionEstimate {
  double kappa = 0.0;
  std::vector<double> errors;  ///< e_j = J(y^j - y*) + J*(lambda^j - lambda*)
  bool contracting = false;
  bool tail_monotone = false;
};

/// Runs j_max iterations at fixed x0 from a cold start and fits the tail
/// ratio of e_j by a geometric mean.
ContractionEstimate estimate_contraction(const TubeProblem& prob, const CentralSolution& star,
                                         const VectorXd& x0, int j_max);

/// Symmetric feasibility box of the centralized problem found by bisection
/// along each coordinate axis.
VectorXd feasible_box(const CentralizedSolver& central, double t_max = 1e3);

/// gamma with gamma^2 = safety * max over a grid of (J(y*) + J*(lambda*)) / x0'Qx0.
double calibrate_gamma(const CentralizedSolver& central, double safety = 1.1, int grid = 21);

/// Uniform draws from feasible_box() scaled by `shrink`, keeping those where
/// the centralized problem is feasible.
std::vector<VectorXd> sample_feasible_states(const CentralizedSolver& central, int count,
                                             std::uint64_t seed, double shrink = 1.0);

}  // namespace rtmpc
