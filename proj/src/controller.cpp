#include "rtmpc/controller.hpp"

#include <chrono>

#include "rtmpc/errors.hpp"

namespace rtmpc {

CentralizedSolver::CentralizedSolver(const TubeProblem& prob)
    : prob_(&prob), cq_(build_condensed(prob)), qp_(cq_.H) {}

std::optional<CentralSolution> CentralizedSolver::solve(const VectorXd& x0,
                                                        const std::vector<int>* warm,
                                                        bool with_duals) const {
  CentralSolution out;
  out.qp = qp_.solve(cq_.c, cq_.F, cq_.g(x0), warm);
  if (out.qp.status != QpStatus::Optimal) return std::nullopt;
  out.z = out.qp.x;
  out.y = cq_.expand(out.z);
  out.value = stage_cost_sum(prob_->coupling, out.y);
  if (with_duals) {
    out.mu.resize(prob_->N + 1);
    for (int k = 0; k <= prob_->N; ++k) out.mu[k] = VectorXd::Zero(prob_->stage(k).num_rows());
    for (int r = 0; r < cq_.F.rows(); ++r) {
      const double m = out.qp.mu_ineq(r);
      if (m == 0.0) continue;
      const auto& o = cq_.origins[r].front();
      out.mu[o.stage](o.row) += m * o.scale;
    }
    out.lambda = recover_duals(*prob_, out.y, out.mu);
  }
  return out;
}

CentralizedController::CentralizedController(const TubeProblem& prob)
    : prob_(&prob), solver_(prob) {}

ControlStep CentralizedController::step(const VectorXd& x0) {
  const auto t0 = std::chrono::steady_clock::now();
  auto sol = solver_.solve(x0, warm_.empty() ? nullptr : &warm_, false);
  const auto t1 = std::chrono::steady_clock::now();
  if (!sol) {
    throw Error(ErrorCode::Infeasible, "centralized problem infeasible: " + diagnose_infeasibility(*prob_, x0));
  }
  warm_ = sol->qp.active_set;
  last_value_ = sol->value;
  ControlStep s;
  const int nx = prob_->nx();
  s.q0 = sol->y[0].head(nx);
  s.v0 = sol->y[0].tail(prob_->nu());
  s.u = tube_feedback(x0, s.q0, s.v0, prob_->syn.K);
  s.solve_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
  return s;
}

}  // namespace rtmpc
