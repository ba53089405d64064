#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/aladin.hpp"
#include "rtmpc/controller.hpp"
#include "rtmpc/geometry.hpp"
#include "rtmpc/problem.hpp"

namespace rtmpc {

enum class DisturbanceMode { Uniform, Vertex, Zero };

DisturbanceMode parse_disturbance_mode(const std::string& s);
const char* to_string(DisturbanceMode m);

/// Seeded disturbance source over a bounded W. Uniform draws are iid over W
/// (rejection from the bounding box), vertex draws pick a vertex of W
/// uniformly.
class DisturbanceSampler {
 public:
  DisturbanceSampler(const HPolytope& W, DisturbanceMode mode, std::uint64_t seed);
  VectorXd next();

 private:
  HPolytope W_;
  DisturbanceMode mode_;
  std::mt19937_64 rng_;
  VectorXd lo_, hi_;
  std::vector<VectorXd> vertices_;
};

/// Single draw with a fresh generator.
VectorXd sample_disturbance(const HPolytope& W, DisturbanceMode mode, std::uint64_t seed);

struct SimTrace {
  std::vector<VectorXd> x;  ///< x_0..x_T (x_T is the state after the last input)
  std::vector<VectorXd> q;  ///< nominal q0 used at each step
  std::vector<VectorXd> v;
  std::vector<VectorXd> u;
  std::vector<VectorXd> w;
  std::vector<double> stage_cost;    ///< x'Qx + u'Ru
  std::vector<double> nominal_cost;  ///< q'Qq + v'Rv
  std::vector<double> value;         ///< optimal value (centralized only, NaN otherwise)
  std::vector<double> rti_us;
  std::vector<bool> feasible;
  int infeasible_step = -1;
  std::string failure;

  int steps() const { return static_cast<int>(u.size()); }
  bool ok() const { return infeasible_step < 0; }
};

/// T samples of x+ = A x + B u + w with u from the controller. A controller
/// failure stops the run and is recorded in infeasible_step / failure.
SimTrace run_closed_loop(TubeController& ctrl, const TubeProblem& prob, const VectorXd& x0,
                         int steps, DisturbanceMode mode, std::uint64_t seed);

/// Sum of realized stage costs.
double closed_loop_cost(const SimTrace& trace);

struct TraceAudit {
  int x_violations = 0;
  int u_violations = 0;
  int tube_violations = 0;  ///< x_k not in {q_k} (+) Z
  double replay_error = 0.0;
  int descent_violations = 0;  ///< V(x+) > V(x) - l(q, v) + 1e-8, when values exist

  bool constraints_ok() const { return x_violations == 0 && u_violations == 0 && tube_violations == 0; }
};

TraceAudit audit_trace(const SimTrace& trace, const TubeProblem& prob, double tol = 1e-7);

void write_trace_csv(std::ostream& os, const SimTrace& trace);

/// Max |theta| (and |x0| for the first stage) per stage kind seen along online
/// closed-loop rollouts, times `factor`.
ParameterBoxes calibrate_parameter_boxes(const TubeProblem& prob, const RtiConfig& cfg,
                                         const std::vector<VectorXd>& starts, int steps,
                                         std::uint64_t seed, double factor = 2.0);

/// Parameter boxes from rollouts started at `starts`, then region enumeration.
std::shared_ptr<const ExplicitStageMaps> build_calibrated_maps(const TubeProblem& prob,
                                                               const RtiConfig& cfg,
                                                               const std::vector<VectorXd>& starts,
                                                               int steps, std::uint64_t seed);

}  // namespace rtmpc
