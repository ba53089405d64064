#include "rtmpc/aladin.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "rtmpc/errors.hpp"

namespace rtmpc {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_us(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

}  // namespace

AladinState AladinState::zeros(const CouplingStructure& cs) {
  AladinState s;
  s.y.resize(cs.N + 1);
  for (int k = 0; k <= cs.N; ++k) s.y[k] = VectorXd::Zero(cs.stage_dim(k));
  s.lambda.resize(cs.N + 1);
  s.lambda[0].resize(0);
  for (int k = 1; k <= cs.N; ++k) s.lambda[k] = VectorXd::Zero(cs.nx);
  return s;
}

void AladinState::scale(double f) {
  for (auto& v : y) v *= f;
  for (auto& v : lambda) v *= f;
}

double conjugate_value(const std::vector<VectorXd>& lambda, const CouplingStructure& cs) {
  const std::vector<VectorXd> c = stage_linear_terms(cs, lambda);
  double val = 0.0;
  for (int k = 0; k <= cs.N; ++k) val += 0.25 * c[k].dot(cs.H[k].llt().solve(c[k]));
  return val;
}

double merit(const AladinState& s, const CouplingStructure& cs) {
  return stage_cost_sum(cs, s.y) + conjugate_value(s.lambda, cs);
}

bool rescale(AladinState& s, const VectorXd& x0, double gamma, const CouplingStructure& cs,
             const MatrixXd& Q) {
  const double thr = gamma * gamma * x0.dot(Q * x0);
  const double f = merit(s, cs);
  if (f <= 0.0 || f < thr) return false;
  s.scale(std::sqrt(thr / f));
  return true;
}

StageSolver::StageSolver(const TubeProblem& prob, std::shared_ptr<const ExplicitStageMaps> maps)
    : prob_(&prob),
      first_(prob.first.H),
      middle_(prob.middle.H),
      terminal_(prob.terminal.H),
      maps_(std::move(maps)) {}

StageSolver::Workspace StageSolver::make_workspace() const {
  Workspace ws;
  ws.warm.assign(prob_->N + 1, {});
  ws.cache.assign(prob_->N + 1, -1);
  ws.misses.assign(prob_->N + 1, 0);
  return ws;
}

VectorXd StageSolver::solve(int k, const VectorXd& theta, const VectorXd& x0, Workspace& ws) const {
  const StageTemplate& st = prob_->stage(k);
  if (maps_) {
    const auto hit = evaluate(maps_->for_kind(st.kind), stage_parameter(st, theta, x0), &ws.cache[k]);
    if (hit) return *hit;
    ++ws.misses[k];
  }
  const QpSolver& qp = st.kind == StageKind::First ? first_
                       : st.kind == StageKind::Middle ? middle_ : terminal_;
  QPSolution sol;
  if (st.x0_dim() > 0) {
    sol = qp.solve(theta, st.F, st.g + st.E * x0, &ws.warm[k]);
  } else {
    sol = qp.solve(theta, st.F, st.g, &ws.warm[k]);
  }
  if (sol.status != QpStatus::Optimal) {
    ws.warm[k].clear();
    throw StageInfeasibleError(k, k == 0 ? "stage 0 infeasible: x0 is outside the feasible region of the tube controller"
                                         : "stage " + std::to_string(k) + " problem infeasible");
  }
  ws.warm[k] = std::move(sol.active_set);
  return sol.x;
}

std::vector<VectorXd> stage_parameters(const TubeProblem& prob, const AladinState& s) {
  std::vector<VectorXd> theta = stage_linear_terms(prob.coupling, s.lambda);
  for (int k = 0; k <= prob.N; ++k) theta[k].noalias() -= 2.0 * prob.coupling.H[k] * s.y[k];
  return theta;
}

void solve_decoupled(const TubeProblem& prob, const AladinState& s, const VectorXd& x0,
                     const StageSolver& solver, StageSolver::Workspace& ws,
                     std::vector<VectorXd>& xi, WorkerPool* pool) {
  const std::vector<VectorXd> theta = stage_parameters(prob, s);
  xi.resize(prob.N + 1);
  std::vector<std::string> failed(prob.N + 1);
  auto job = [&](int k) {
    try {
      xi[k] = solver.solve(k, theta[k], x0, ws);
    } catch (const StageInfeasibleError& e) {
      failed[k] = e.what();
    }
  };
  if (pool) {
    pool->parallel_for(prob.N + 1, job);
  } else {
    for (int k = 0; k <= prob.N; ++k) job(k);
  }
  for (int k = 0; k <= prob.N; ++k) {
    if (!failed[k].empty()) throw StageInfeasibleError(k, failed[k]);
  }
}

void coupled_step(const TubeProblem& prob, const AladinState& s, const std::vector<VectorXd>& xi,
                  std::vector<VectorXd>& y_next, std::vector<VectorXd>& delta) {
  std::vector<VectorXd> r(prob.N + 1);
  for (int k = 0; k <= prob.N; ++k) r[k] = 2.0 * xi[k] - s.y[k];
  prob.lqr.solve(r, y_next, delta);
}

void warm_shift(AladinState& s, const CouplingStructure& cs) {
  const int N = cs.N;
  for (int k = 0; k + 1 < N; ++k) s.y[k] = s.y[k + 1];
  VectorXd last = VectorXd::Zero(cs.nx + cs.nu);
  last.head(cs.nx) = s.y[N];
  s.y[N - 1] = last;
  s.y[N].setZero();
  for (int k = 1; k < N; ++k) s.lambda[k] = s.lambda[k + 1];
  s.lambda[N].setZero();
}

void write_diagnostics_header(std::ostream& os) {
  os << "sample,iter,primal_res,dual_res,us\n";
}

void write_diagnostics_csv(std::ostream& os, const std::vector<IterationDiag>& rows) {
  for (const auto& d : rows) {
    os << d.sample << ',' << d.iter << ',' << d.primal_res << ',' << d.dual_res << ',' << d.us << '\n';
  }
}

AladinController::AladinController(const TubeProblem& prob, RtiConfig cfg,
                                   std::shared_ptr<const ExplicitStageMaps> maps)
    : prob_(&prob), cfg_(cfg), solver_(prob, std::move(maps)) {
  if (cfg_.m_bar < 1) throw Error(ErrorCode::InvalidArgument, "m_bar must be at least 1");
  if (!(cfg_.gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
  if (cfg_.workers > 1) pool_ = std::make_unique<WorkerPool>(cfg_.workers);
  reset();
}

void AladinController::reset() {
  ws_ = solver_.make_workspace();
  state_ = AladinState::zeros(prob_->coupling);
  sample_ = 0;
}

int AladinController::explicit_misses() const {
  int n = 0;
  for (int m : ws_.misses) n += m;
  return n;
}

ControlStep AladinController::step(const VectorXd& x0) {
  const auto t0 = Clock::now();
  const CouplingStructure& cs = prob_->coupling;
  rescaled_ = rescale(state_, x0, cfg_.gamma, cs, prob_->syn.Q);
  for (int it = 0; it < cfg_.m_bar; ++it) {
    const auto ti = Clock::now();
    solve_decoupled(*prob_, state_, x0, solver_, ws_, xi_, pool_.get());
    coupled_step(*prob_, state_, xi_, y_next_, delta_);
    double dual = 0.0, primal = 0.0;
    for (int k = 1; k <= cs.N; ++k) {
      state_.lambda[k] += delta_[k];
      if (diag_) dual = std::max(dual, delta_[k].cwiseAbs().maxCoeff());
    }
    if (diag_) {
      for (int k = 0; k <= cs.N; ++k) primal = std::max(primal, (xi_[k] - y_next_[k]).cwiseAbs().maxCoeff());
    }
    std::swap(state_.y, y_next_);
    ++state_.j;
    if (diag_) diag_->push_back({sample_, it + 1, primal, dual, elapsed_us(ti)});
  }
  ControlStep out;
  const int nx = prob_->nx();
  out.q0 = xi_[0].head(nx);
  out.v0 = xi_[0].tail(prob_->nu());
  out.u = tube_feedback(x0, out.q0, out.v0, prob_->syn.K);
  if (cfg_.warm_shift) warm_shift(state_, cs);
  ++sample_;
  out.solve_us = elapsed_us(t0);
  return out;
}

ContractionEstimate estimate_contraction(const TubeProblem& prob, const CentralSolution& star,
                                         const VectorXd& x0, int j_max) {
  const CouplingStructure& cs = prob.coupling;
  StageSolver solver(prob);
  auto ws = solver.make_workspace();
  AladinState s = AladinState::zeros(cs);
  std::vector<VectorXd> xi, y_next, delta;
  ContractionEstimate est;
  auto error = [&]() {
    std::vector<VectorXd> dy(cs.N + 1), dl(cs.N + 1);
    for (int k = 0; k <= cs.N; ++k) dy[k] = s.y[k] - star.y[k];
    dl[0].resize(0);
    for (int k = 1; k <= cs.N; ++k) dl[k] = s.lambda[k] - star.lambda[k];
    return stage_cost_sum(cs, dy) + conjugate_value(dl, cs);
  };
  est.errors.push_back(error());
  for (int j = 0; j < j_max; ++j) {
    solve_decoupled(prob, s, x0, solver, ws, xi);
    coupled_step(prob, s, xi, y_next, delta);
    for (int k = 1; k <= cs.N; ++k) s.lambda[k] += delta[k];
    std::swap(s.y, y_next);
    ++s.j;
    est.errors.push_back(error());
  }
  const double e0 = est.errors.front();
  if (e0 <= 0.0) {
    est.kappa = 0.0;
    est.contracting = true;
    est.tail_monotone = true;
    return est;
  }
  // Tail: second half of the run, cut where the error reaches the rounding floor.
  int last = static_cast<int>(est.errors.size()) - 1;
  while (last > 0 && est.errors[last] <= 1e-13 * e0) --last;
  const int first = last / 2;
  if (last - first < 1) {
    est.kappa = 0.0;
  } else {
    est.kappa = std::pow(est.errors[last] / est.errors[first], 1.0 / (last - first));
  }
  est.tail_monotone = true;
  for (int j = first; j < last; ++j) {
    if (est.errors[j + 1] > est.errors[j] * (1.0 + 1e-9)) est.tail_monotone = false;
  }
  est.contracting = est.kappa < 1.0;
  return est;
}

VectorXd feasible_box(const CentralizedSolver& central, double t_max) {
  const int nx = central.problem().nx();
  VectorXd r(nx);
  auto feasible = [&](const VectorXd& x) { return central.solve(x, nullptr, false).has_value(); };
  for (int j = 0; j < nx; ++j) {
    double best = 0.0;
    for (double sign : {1.0, -1.0}) {
      VectorXd e = VectorXd::Zero(nx);
      e(j) = sign;
      double lo = 0.0, hi = t_max;
      if (feasible(hi * e)) {
        best = std::max(best, hi);
        continue;
      }
      for (int it = 0; it < 50 && hi - lo > 1e-6 * (1.0 + lo); ++it) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid * e) ? lo : hi) = mid;
      }
      best = std::max(best, lo);
    }
    r(j) = best;
  }
  return r;
}

double calibrate_gamma(const CentralizedSolver& central, double safety, int grid) {
  const TubeProblem& prob = central.problem();
  const int nx = prob.nx();
  const VectorXd r = feasible_box(central);
  std::vector<VectorXd> pts;
  if (nx <= 3) {
    std::vector<int> idx(nx, 0);
    for (;;) {
      VectorXd x(nx);
      for (int j = 0; j < nx; ++j) x(j) = -r(j) + 2.0 * r(j) * idx[j] / std::max(1, grid - 1);
      pts.push_back(x);
      int j = 0;
      while (j < nx && ++idx[j] == grid) idx[j++] = 0;
      if (j == nx) break;
    }
  } else {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
      VectorXd x(nx);
      for (int j = 0; j < nx; ++j) x(j) = r(j) * u(rng);
      pts.push_back(x);
    }
  }
  double worst = 0.0;
  for (const VectorXd& x : pts) {
    if (x.norm() < 1e-6) continue;
    const auto sol = central.solve(x);
    if (!sol) continue;
    const double ratio = (sol->value + conjugate_value(sol->lambda, prob.coupling)) / x.dot(prob.syn.Q * x);
    worst = std::max(worst, ratio);
  }
  if (!(worst > 0.0)) throw Error(ErrorCode::Infeasible, "calibrate_gamma: no feasible sample");
  return std::sqrt(safety * worst);
}

std::vector<VectorXd> sample_feasible_states(const CentralizedSolver& central, int count,
                                             std::uint64_t seed, double shrink) {
  const VectorXd r = shrink * feasible_box(central);
  const int nx = static_cast<int>(r.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<VectorXd> out;
  for (long tries = 0; static_cast<int>(out.size()) < count; ++tries) {
    if (tries > 1000L * count) throw Error(ErrorCode::Infeasible, "sample_feasible_states: feasible region too thin");
    VectorXd x(nx);
    for (int j = 0; j < nx; ++j) x(j) = r(j) * u(rng);
    if (central.solve(x, nullptr, false)) out.push_back(x);
  }
  return out;
}

}  // namespace rtmpc
