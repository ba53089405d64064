#include <random>

#include "doctest.h"
#include "rtmpc/aladin.hpp"
#include "rtmpc/errors.hpp"
#include "rtmpc/sim.hpp"
#include "support.hpp"

using namespace rtmpc;
using testsupport::case_study;
using testsupport::max_abs;
using testsupport::vec;

namespace {

AladinState random_state(const CouplingStructure& cs, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> N01;
  AladinState s = AladinState::zeros(cs);
  for (auto& v : s.y) v = scale * VectorXd::NullaryExpr(v.size(), [&] { return N01(rng); });
  for (int k = 1; k <= cs.N; ++k) s.lambda[k] = scale * VectorXd::NullaryExpr(cs.nx, [&] { return N01(rng); });
  return s;
}

// max_y lambda'G y - y'H y with G and H assembled densely here.
double conjugate_oracle(const std::vector<VectorXd>& lambda, const CouplingStructure& cs) {
  const int N = cs.N, nx = cs.nx, nu = cs.nu;
  const int nv = N * (nx + nu) + nx;
  MatrixXd G = MatrixXd::Zero(N * nx, nv), H = MatrixXd::Zero(nv, nv);
  VectorXd L(N * nx);
  for (int k = 0; k <= N; ++k) {
    const int d = cs.stage_dim(k);
    H.block(k * (nx + nu), k * (nx + nu), d, d) = cs.H[k];
  }
  for (int k = 1; k <= N; ++k) {
    const int r = (k - 1) * nx;
    G.block(r, (k - 1) * (nx + nu), nx, nx) = -cs.C.leftCols(nx);
    G.block(r, (k - 1) * (nx + nu) + nx, nx, nu) = -cs.C.rightCols(nu);
    G.block(r, k * (nx + nu), nx, nx) = MatrixXd::Identity(nx, nx);
    L.segment(r, nx) = lambda[k];
  }
  const VectorXd b = G.transpose() * L;
  const VectorXd y = 0.5 * H.ldlt().solve(b);
  return b.dot(y) - y.dot(H * y);
}

}  // namespace

TEST_CASE("conjugate value") {
  const auto& cs = case_study().prob.coupling;
  AladinState s = AladinState::zeros(cs);
  CHECK(conjugate_value(s.lambda, cs) == 0.0);

  SUBCASE("terminal multiplier only") {
    const VectorXd l = vec({0.7, -1.3});
    s.lambda[cs.N] = l;
    const VectorXd c = -cs.C.transpose() * l;  // enters stage N-1
    const double stage_prev = 0.25 * c.dot(cs.H[cs.N - 1].ldlt().solve(c));
    const double terminal = 0.25 * l.dot(cs.H[cs.N].ldlt().solve(l));
    CHECK(conjugate_value(s.lambda, cs) - stage_prev == doctest::Approx(terminal).epsilon(1e-12));
  }
  SUBCASE("random multipliers, short horizon") {
    const TubeProblem p4 = build_problem(case_study().model, case_study().syn, 4);
    std::mt19937_64 rng(31);
    for (int t = 0; t < 20; ++t) {
      const AladinState r = random_state(p4.coupling, rng, 1.0);
      CHECK(conjugate_value(r.lambda, p4.coupling) ==
            doctest::Approx(conjugate_oracle(r.lambda, p4.coupling)).epsilon(1e-10));
    }
  }
}

TEST_CASE("rescale") {
  const auto& c = case_study();
  const CouplingStructure& cs = c.prob.coupling;
  std::mt19937_64 rng(5);
  AladinState s = random_state(cs, rng, 1.0);
  const double f = merit(s, cs);
  const MatrixXd& Q = c.syn.Q;

  SUBCASE("below the threshold nothing changes") {
    AladinState t = s;
    CHECK_FALSE(rescale(t, vec({std::sqrt(2.0 * f), 0.0}), 1.0, cs, Q));
    for (int k = 0; k <= cs.N; ++k) CHECK(t.y[k] == s.y[k]);
  }
  SUBCASE("four times the threshold halves the state") {
    AladinState t = s;
    CHECK(rescale(t, vec({std::sqrt(f / 4.0), 0.0}), 1.0, cs, Q));
    for (int k = 0; k <= cs.N; ++k) CHECK(max_abs(t.y[k] - 0.5 * s.y[k]) <= 1e-14);
    for (int k = 1; k <= cs.N; ++k) CHECK(max_abs(t.lambda[k] - 0.5 * s.lambda[k]) <= 1e-14);
  }
  SUBCASE("merit after rescaling is at the threshold") {
    AladinState t = s;
    const VectorXd x0 = vec({0.3, -0.2});
    const double gamma = 2.0;
    rescale(t, x0, gamma, cs, Q);
    CHECK(merit(t, cs) <= gamma * gamma * x0.dot(Q * x0) * (1.0 + 1e-12));
  }
}

TEST_CASE("decoupled and coupled steps at the centralized optimum") {
  const auto& c = case_study();
  const TubeProblem& prob = c.prob;
  const CentralizedSolver central(prob);
  for (const VectorXd& x0 : {vec({-7, -2}), vec({3, -1}), vec({-2, 1.5})}) {
    const auto star = central.solve(x0);
    REQUIRE(star.has_value());
    AladinState s = AladinState::zeros(prob.coupling);
    s.y = star->y;
    s.lambda = star->lambda;
    StageSolver solver(prob);
    auto ws = solver.make_workspace();
    std::vector<VectorXd> xi, y_next, delta;
    solve_decoupled(prob, s, x0, solver, ws, xi);
    for (int k = 0; k <= prob.N; ++k) CHECK(max_abs(xi[k] - star->y[k]) <= 1e-7);
    coupled_step(prob, s, xi, y_next, delta);
    for (int k = 1; k <= prob.N; ++k) CHECK(max_abs(delta[k]) <= 1e-7);
    for (int k = 0; k <= prob.N; ++k) CHECK(max_abs(y_next[k] - star->y[k]) <= 1e-7);
  }
}

TEST_CASE("origin is a fixed point") {
  const TubeProblem& prob = case_study().prob;
  AladinState s = AladinState::zeros(prob.coupling);
  StageSolver solver(prob);
  auto ws = solver.make_workspace();
  std::vector<VectorXd> xi, y_next, delta;
  solve_decoupled(prob, s, vec({0, 0}), solver, ws, xi);
  for (const auto& v : xi) CHECK(max_abs(v) == 0.0);
  coupled_step(prob, s, xi, y_next, delta);
  for (int k = 1; k <= prob.N; ++k) CHECK(max_abs(delta[k]) == 0.0);
}

TEST_CASE("coupled step on a short horizon against dense KKT") {
  const auto& c = case_study();
  const TubeProblem prob = build_problem(c.model, c.syn, 3);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    AladinState s = random_state(prob.coupling, rng, 1.0);
    AladinState x = random_state(prob.coupling, rng, 1.0);
    std::vector<VectorXd> y_next, delta, yo, dd, r(4);
    coupled_step(prob, s, x.y, y_next, delta);
    for (int k = 0; k <= 3; ++k) r[k] = 2.0 * x.y[k] - s.y[k];
    testsupport::dense_tracking_kkt(prob.coupling.C, prob.coupling.D, prob.coupling.H, r, yo, dd);
    for (int k = 0; k <= 3; ++k) CHECK(max_abs(y_next[k] - yo[k]) <= 1e-9);
    for (int k = 1; k <= 3; ++k) CHECK(max_abs(delta[k] - dd[k]) <= 1e-9);
  }
}

TEST_CASE("coupled step leaves a consistent iterate unchanged") {
  const auto& c = case_study();
  const CentralizedSolver central(c.prob);
  const auto star = central.solve(vec({2, -1}));
  REQUIRE(star.has_value());
  AladinState s = AladinState::zeros(c.prob.coupling);
  s.y = star->y;
  std::vector<VectorXd> y_next, delta;
  coupled_step(c.prob, s, star->y, y_next, delta);
  for (int k = 0; k <= c.prob.N; ++k) CHECK(max_abs(y_next[k] - star->y[k]) <= 1e-10);
  for (int k = 1; k <= c.prob.N; ++k) CHECK(max_abs(delta[k]) <= 1e-10);
}

TEST_CASE("warm shift") {
  const auto& cs = case_study().prob.coupling;
  std::mt19937_64 rng(3);
  AladinState s = random_state(cs, rng, 1.0);
  const AladinState before = s;
  warm_shift(s, cs);
  for (int k = 0; k + 1 < cs.N; ++k) CHECK(s.y[k] == before.y[k + 1]);
  CHECK(s.y[cs.N - 1].head(cs.nx) == before.y[cs.N]);
  CHECK(s.y[cs.N - 1].tail(cs.nu).isZero(0));
  CHECK(s.y[cs.N].isZero(0));
  for (int k = 1; k < cs.N; ++k) CHECK(s.lambda[k] == before.lambda[k + 1]);
  CHECK(s.lambda[cs.N].isZero(0));
}

TEST_CASE("many inner iterations reproduce the centralized input") {
  const auto& c = case_study();
  const CentralizedSolver central(c.prob);
  const VectorXd x0 = vec({-7, -2});
  const auto star = central.solve(x0);
  REQUIRE(star.has_value());
  const VectorXd u_star = tube_feedback(x0, star->y[0].head(2), star->y[0].tail(1), c.syn.K);
  AladinController ctrl(c.prob, RtiConfig{200, 1.0, true, 1});
  const ControlStep st = ctrl.step(x0);
  CHECK(max_abs(st.u - u_star) <= 1e-6);
}

TEST_CASE("inside the terminal set the closed loop is the LQR loop") {
  const auto& c = case_study();
  AladinController ctrl(c.prob, RtiConfig{200, 1.0, true, 1});
  const SimTrace tr = run_closed_loop(ctrl, c.prob, vec({0.4, -0.3}), 15, DisturbanceMode::Zero, 1);
  REQUIRE(tr.ok());
  for (int k = 0; k < tr.steps(); ++k) CHECK(max_abs(tr.u[k] - c.syn.K * tr.x[k]) <= 1e-6);
}

TEST_CASE("two and five inner iterations on the case-study scenario") {
  const auto& c = case_study();
  double cost[2];
  int i = 0;
  for (int m : {2, 5}) {
    AladinController ctrl(c.prob, RtiConfig{m, 1.0, true, 1});
    const SimTrace tr = run_closed_loop(ctrl, c.prob, vec({-7, -2}), 50, DisturbanceMode::Uniform, 42);
    CHECK(tr.ok());
    CHECK(audit_trace(tr, c.prob).constraints_ok());
    cost[i++] = closed_loop_cost(tr);
  }
  CHECK(cost[1] <= cost[0] * 1.01);
}

TEST_CASE("contraction estimate") {
  const auto& c = case_study();
  const CentralizedSolver central(c.prob);
  SUBCASE("case-study initial state") {
    const VectorXd x0 = vec({-7, -2});
    const auto star = central.solve(x0);
    REQUIRE(star.has_value());
    const ContractionEstimate est = estimate_contraction(c.prob, *star, x0, 400);
    MESSAGE("kappa = " << est.kappa);
    CHECK(est.kappa < 1.0);
    CHECK(est.contracting);
    CHECK(est.tail_monotone);
  }
  SUBCASE("origin") {
    const auto star = central.solve(vec({0, 0}));
    REQUIRE(star.has_value());
    const ContractionEstimate est = estimate_contraction(c.prob, *star, vec({0, 0}), 20);
    for (double e : est.errors) CHECK(e == 0.0);
  }
}

TEST_CASE("stage 0 stays feasible after the warm shift for every disturbance") {
  const auto& c = case_study();
  const TubeProblem& prob = c.prob;
  const auto vertices = polygon_vertices(c.model.W);
  REQUIRE(vertices.size() == 4);
  StageSolver probe(prob);
  for (int m : {1, 2, 5}) {
    AladinController ctrl(prob, RtiConfig{m, 1.0, true, 1});
    DisturbanceSampler dist(c.model.W, DisturbanceMode::Uniform, 9);
    VectorXd x = vec({-7, -2});
    for (int t = 0; t < 30; ++t) {
      const ControlStep st = ctrl.step(x);
      const VectorXd nominal = c.model.A * x + c.model.B * st.u;
      for (const auto& w : vertices) {
        auto ws = probe.make_workspace();
        CHECK_NOTHROW(probe.solve(0, VectorXd::Zero(3), nominal + w, ws));
      }
      x = nominal + dist.next();
    }
  }
}

TEST_CASE("worker count does not change the iterates") {
  const auto& c = case_study();
  AladinController a(c.prob, RtiConfig{5, 1.0, true, 1});
  AladinController b(c.prob, RtiConfig{5, 1.0, true, 3});
  const SimTrace ta = run_closed_loop(a, c.prob, vec({-7, -2}), 20, DisturbanceMode::Uniform, 3);
  const SimTrace tb = run_closed_loop(b, c.prob, vec({-7, -2}), 20, DisturbanceMode::Uniform, 3);
  REQUIRE(ta.steps() == tb.steps());
  for (int k = 0; k < ta.steps(); ++k) CHECK(ta.u[k] == tb.u[k]);
}

TEST_CASE("per-iteration diagnostics") {
  const auto& c = case_study();
  AladinController ctrl(c.prob, RtiConfig{4, 1.0, true, 1});
  std::vector<IterationDiag> diag;
  ctrl.set_diagnostics(&diag);
  ctrl.step(vec({-7, -2}));
  ctrl.step(vec({-6, -1}));
  REQUIRE(diag.size() == 8);
  CHECK(diag[0].sample == 0);
  CHECK(diag[7].sample == 1);
  CHECK(diag[7].iter == 4);
}

TEST_CASE("infeasible measured state raises a stage-0 error") {
  const auto& c = case_study();
  AladinController ctrl(c.prob, RtiConfig{});
  try {
    ctrl.step(vec({0, 5}));
    FAIL("expected an exception");
  } catch (const StageInfeasibleError& e) {
    CHECK(e.stage() == 0);
  }
  CHECK_THROWS_AS(AladinController(c.prob, RtiConfig{0, 1.0, true, 1}), Error);
}
