#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/optkit.hpp"
#include "rtmpc/problem.hpp"

namespace rtmpc {

/// One sampling instant of a tube controller.
struct ControlStep {
  VectorXd u;
  VectorXd q0;  ///< nominal state used in the feedback law
  VectorXd v0;
  double solve_us = 0.0;
};

class TubeController {
 public:
  virtual ~TubeController() = default;
  /// Throws StageInfeasibleError / Error(Infeasible) when no certified input exists.
  virtual ControlStep step(const VectorXd& x0) = 0;
  virtual void reset() = 0;
  virtual std::string name() const = 0;
};

struct CentralSolution {
  VectorXd z;
  std::vector<VectorXd> y;       ///< expanded trajectory y_0..y_N
  std::vector<VectorXd> mu;      ///< stage inequality multipliers
  std::vector<VectorXd> lambda;  ///< dynamics multipliers, 1..N
  double value = 0.0;            ///< J(y*)
  QPSolution qp;
};

/// Condensed tube MPC problem solved to optimality with the dual active-set
/// solver; the Hessian factorization is shared by all solves.
class CentralizedSolver {
 public:
  explicit CentralizedSolver(const TubeProblem& prob);

  const CondensedQP& condensed() const { return cq_; }
  const TubeProblem& problem() const { return *prob_; }

  /// nullopt when infeasible.
  std::optional<CentralSolution> solve(const VectorXd& x0,
                                       const std::vector<int>* warm = nullptr,
                                       bool with_duals = true) const;

 private:
  const TubeProblem* prob_;
  CondensedQP cq_;
  QpSolver qp_;
};

/// Baseline controller: full optimization each sample, warm-started from the
/// previous active set.
class CentralizedController : public TubeController {
 public:
  explicit CentralizedController(const TubeProblem& prob);
  ControlStep step(const VectorXd& x0) override;
  void reset() override { warm_.clear(); }
  std::string name() const override { return "centralized"; }

  /// Value J(y*) of the last solve.
  double last_value() const { return last_value_; }

 private:
  const TubeProblem* prob_;
  CentralizedSolver solver_;
  std::vector<int> warm_;
  double last_value_ = 0.0;
};

}  // namespace rtmpc
