#include "rtmpc/sim.hpp"

#include <cmath>
#include <limits>

#include "rtmpc/errors.hpp"

namespace rtmpc {

DisturbanceMode parse_disturbance_mode(const std::string& s) {
  if (s == "uniform") return DisturbanceMode::Uniform;
  if (s == "vertex") return DisturbanceMode::Vertex;
  if (s == "zero") return DisturbanceMode::Zero;
  throw Error(ErrorCode::InvalidArgument, "unknown disturbance mode '" + s + "' (uniform|vertex|zero)");
}

const char* to_string(DisturbanceMode m) {
  switch (m) {
    case DisturbanceMode::Uniform: return "uniform";
    case DisturbanceMode::Vertex: return "vertex";
    case DisturbanceMode::Zero: return "zero";
  }
  return "?";
}

DisturbanceSampler::DisturbanceSampler(const HPolytope& W, DisturbanceMode mode, std::uint64_t seed)
    : W_(W), mode_(mode), rng_(seed) {
  const int n = W.dim();
  if (mode == DisturbanceMode::Zero) return;
  if (!W.is_bounded()) throw Error(ErrorCode::InvalidArgument, "disturbance set must be bounded");
  lo_.resize(n);
  hi_.resize(n);
  for (int j = 0; j < n; ++j) {
    VectorXd e = VectorXd::Zero(n);
    e(j) = 1.0;
    hi_(j) = support(W, e);
    lo_(j) = -support(W, -e);
  }
  if (mode == DisturbanceMode::Vertex) {
    if (n == 2) {
      for (const Point2& p : polygon_vertices(W)) vertices_.push_back(p);
    } else {
      for (long mask = 0; mask < (1L << n); ++mask) {
        VectorXd c(n);
        for (int j = 0; j < n; ++j) c(j) = (mask >> j) & 1 ? hi_(j) : lo_(j);
        if (contains(W, c)) vertices_.push_back(c);
      }
      if (vertices_.empty()) {
        throw Error(ErrorCode::DimensionUnsupported, "vertex sampling needs a box-shaped W when n > 2");
      }
    }
  }
}

VectorXd DisturbanceSampler::next() {
  const int n = W_.dim();
  switch (mode_) {
    case DisturbanceMode::Zero:
      return VectorXd::Zero(n);
    case DisturbanceMode::Vertex: {
      std::uniform_int_distribution<std::size_t> pick(0, vertices_.size() - 1);
      return vertices_[pick(rng_)];
    }
    case DisturbanceMode::Uniform:
      break;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    VectorXd w(n);
    for (int j = 0; j < n; ++j) w(j) = lo_(j) + (hi_(j) - lo_(j)) * unit(rng_);
    if (contains(W_, w, 0.0)) return w;
  }
}

VectorXd sample_disturbance(const HPolytope& W, DisturbanceMode mode, std::uint64_t seed) {
  DisturbanceSampler s(W, mode, seed);
  return s.next();
}

SimTrace run_closed_loop(TubeController& ctrl, const TubeProblem& prob, const VectorXd& x0,
                         int steps, DisturbanceMode mode, std::uint64_t seed) {
  const PlantModel& m = prob.model;
  const MatrixXd& Q = prob.syn.Q;
  const MatrixXd& R = prob.syn.R;
  DisturbanceSampler dist(m.W, mode, seed);
  auto* central = dynamic_cast<CentralizedController*>(&ctrl);
  SimTrace tr;
  tr.x.push_back(x0);
  VectorXd x = x0;
  for (int k = 0; k < steps; ++k) {
    ControlStep cs;
    try {
      cs = ctrl.step(x);
    } catch (const Error& e) {
      tr.feasible.push_back(false);
      tr.infeasible_step = k;
      tr.failure = e.what();
      return tr;
    }
    const VectorXd w = dist.next();
    tr.q.push_back(cs.q0);
    tr.v.push_back(cs.v0);
    tr.u.push_back(cs.u);
    tr.w.push_back(w);
    tr.stage_cost.push_back(x.dot(Q * x) + cs.u.dot(R * cs.u));
    tr.nominal_cost.push_back(cs.q0.dot(Q * cs.q0) + cs.v0.dot(R * cs.v0));
    tr.value.push_back(central ? central->last_value() : std::numeric_limits<double>::quiet_NaN());
    tr.rti_us.push_back(cs.solve_us);
    tr.feasible.push_back(true);
    x = m.A * x + m.B * cs.u + w;
    tr.x.push_back(x);
  }
  return tr;
}

double closed_loop_cost(const SimTrace& trace) {
  double c = 0.0;
  for (double s : trace.stage_cost) c += s;
  return c;
}

TraceAudit audit_trace(const SimTrace& tr, const TubeProblem& prob, double tol) {
  TraceAudit a;
  const PlantModel& m = prob.model;
  for (int k = 0; k < tr.steps(); ++k) {
    if (!contains(m.X, tr.x[k], tol)) ++a.x_violations;
    if (!contains(m.U, tr.u[k], tol)) ++a.u_violations;
    if (!contains(prob.syn.Z_h, tr.x[k] - tr.q[k], tol)) ++a.tube_violations;
    const VectorXd next = m.A * tr.x[k] + m.B * tr.u[k] + tr.w[k];
    a.replay_error = std::max(a.replay_error, (next - tr.x[k + 1]).cwiseAbs().maxCoeff());
    if (k + 1 < tr.steps() && std::isfinite(tr.value[k]) && std::isfinite(tr.value[k + 1])) {
      if (tr.value[k + 1] > tr.value[k] - tr.nominal_cost[k] + 1e-8) ++a.descent_violations;
    }
  }
  if (tr.steps() < static_cast<int>(tr.x.size()) && !contains(m.X, tr.x.back(), tol) && tr.ok()) {
    ++a.x_violations;
  }
  return a;
}

void write_trace_csv(std::ostream& os, const SimTrace& tr) {
  const int nx = tr.x.empty() ? 0 : static_cast<int>(tr.x[0].size());
  const int nu = tr.u.empty() ? 1 : static_cast<int>(tr.u[0].size());
  os << "k";
  for (int i = 1; i <= nx; ++i) os << ",x" << i;
  for (int i = 1; i <= nx; ++i) os << ",q" << i;
  if (nu == 1) {
    os << ",u";
  } else {
    for (int i = 1; i <= nu; ++i) os << ",u" << i;
  }
  for (int i = 1; i <= nx; ++i) os << ",w" << i;
  os << ",stage_cost,rti_us,feasible\n";
  os.precision(17);
  for (int k = 0; k < tr.steps(); ++k) {
    os << k;
    for (int i = 0; i < nx; ++i) os << ',' << tr.x[k](i);
    for (int i = 0; i < nx; ++i) os << ',' << tr.q[k](i);
    for (int i = 0; i < nu; ++i) os << ',' << tr.u[k](i);
    for (int i = 0; i < nx; ++i) os << ',' << tr.w[k](i);
    os << ',' << tr.stage_cost[k] << ',' << tr.rti_us[k] << ',' << (tr.feasible[k] ? 1 : 0) << '\n';
  }
}

ParameterBoxes calibrate_parameter_boxes(const TubeProblem& prob, const RtiConfig& cfg,
                                         const std::vector<VectorXd>& starts, int steps,
                                         std::uint64_t seed, double factor) {
  const CouplingStructure& cs = prob.coupling;
  const int nx = prob.nx(), nu = prob.nu();
  ParameterBoxes box;
  box.first = VectorXd::Zero(nx + nu + nx);
  box.middle = VectorXd::Zero(nx + nu);
  box.terminal = VectorXd::Zero(nx);
  StageSolver solver(prob);
  std::vector<VectorXd> xi, y_next, delta;
  const DisturbanceMode modes[] = {DisturbanceMode::Zero, DisturbanceMode::Uniform, DisturbanceMode::Vertex};
  std::uint64_t run = 0;
  for (const VectorXd& start : starts) {
    for (DisturbanceMode mode : modes) {
      auto ws = solver.make_workspace();
      AladinState s = AladinState::zeros(cs);
      DisturbanceSampler dist(prob.model.W, mode, seed + run++);
      VectorXd x = start;
      bool alive = true;
      for (int t = 0; t < steps && alive; ++t) {
        rescale(s, x, cfg.gamma, cs, prob.syn.Q);
        try {
          for (int it = 0; it < cfg.m_bar; ++it) {
            const std::vector<VectorXd> theta = stage_parameters(prob, s);
            box.first.head(nx + nu) = box.first.head(nx + nu).cwiseMax(theta[0].cwiseAbs());
            box.first.tail(nx) = box.first.tail(nx).cwiseMax(x.cwiseAbs());
            for (int k = 1; k < prob.N; ++k) box.middle = box.middle.cwiseMax(theta[k].cwiseAbs());
            box.terminal = box.terminal.cwiseMax(theta[prob.N].cwiseAbs());
            solve_decoupled(prob, s, x, solver, ws, xi);
            coupled_step(prob, s, xi, y_next, delta);
            for (int k = 1; k <= cs.N; ++k) s.lambda[k] += delta[k];
            std::swap(s.y, y_next);
          }
        } catch (const StageInfeasibleError&) {
          alive = false;
          break;
        }
        const VectorXd u = tube_feedback(x, xi[0].head(nx), xi[0].tail(nu), prob.syn.K);
        if (cfg.warm_shift) warm_shift(s, cs);
        x = prob.model.A * x + prob.model.B * u + dist.next();
      }
    }
  }
  auto inflate = [&](VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) v(i) = factor * std::max(v(i), 1e-3);
  };
  inflate(box.first);
  inflate(box.middle);
  inflate(box.terminal);
  return box;
}

std::shared_ptr<const ExplicitStageMaps> build_calibrated_maps(const TubeProblem& prob,
                                                               const RtiConfig& cfg,
                                                               const std::vector<VectorXd>& starts,
                                                               int steps, std::uint64_t seed) {
  const ParameterBoxes boxes = calibrate_parameter_boxes(prob, cfg, starts, steps, seed);
  return std::make_shared<const ExplicitStageMaps>(build_explicit_maps(prob, boxes));
}

}  // namespace rtmpc
