#include <random>

#include "doctest.h"
#include "rtmpc/aladin.hpp"
#include "rtmpc/controller.hpp"
#include "rtmpc/problem.hpp"
#include "support.hpp"

using namespace rtmpc;
using testsupport::case_study;
using testsupport::max_abs;
using testsupport::vec;

TEST_CASE("stage sets of the case study") {
  const auto& cs = case_study();
  const StageSets& S = cs.prob.sets;
  // q in X(-)Z: 1 row, v in U(-)KZ: 2 rows, Aq + Bv in X(-)Z: 1 row
  CHECK(S.Yk.num_rows() == 4);
  CHECK(S.Yk.dim() == 3);
  CHECK(S.YN.F() == cs.syn.X_T.F());
  CHECK(S.YN.g() == cs.syn.X_T.g());
  CHECK(cs.prob.middle.num_rows() == 4);
  CHECK(cs.prob.first.x0_dim() == 2);
  CHECK(cs.prob.middle.x0_dim() == 0);
}

TEST_CASE("a vanishing disturbance leaves the raw constraints") {
  PlantModel m = case_study_model();
  m.W = HPolytope::Box(2, 1e-9);
  const TubeSynthesis syn = synthesize(m, case_study_weights());
  const StageSets S = build_stage_sets(syn, m);
  // q2 <= 2, |v| <= 1, (Aq + Bv)_2 <= 2
  CHECK(support(S.Yk, vec({0, 1, 0})) == doctest::Approx(2.0));
  CHECK(support(S.Yk, vec({0, 0, 1})) == doctest::Approx(1.0));
  CHECK(support(S.Yk, vec({0, 0, -1})) == doctest::Approx(1.0));
}

TEST_CASE("coupling structure") {
  const auto& cs = case_study();
  const CouplingStructure& c = cs.prob.coupling;
  CHECK(c.G().rows() == 20 * 2);
  CHECK(c.G().cols() == 20 * 3 + 2);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N01;
  std::vector<VectorXd> lambda(21), y(21);
  for (int k = 1; k <= 20; ++k) lambda[k] = VectorXd::NullaryExpr(2, [&] { return N01(rng); });
  for (int k = 0; k <= 20; ++k) y[k] = VectorXd::NullaryExpr(c.stage_dim(k), [&] { return N01(rng); });
  // lambda' G y through the dense matrix against the stage linear terms
  VectorXd L(40), Y(62);
  for (int k = 1; k <= 20; ++k) L.segment(2 * (k - 1), 2) = lambda[k];
  for (int k = 0, o = 0; k <= 20; o += c.stage_dim(k), ++k) Y.segment(o, c.stage_dim(k)) = y[k];
  const auto g = stage_linear_terms(c, lambda);
  double lin = 0.0;
  for (int k = 0; k <= 20; ++k) lin += g[k].dot(y[k]);
  CHECK(lin == doctest::Approx(L.dot(c.G() * Y)).epsilon(1e-12));
}

TEST_CASE("condensed problem") {
  const auto& cs = case_study();
  const TubeProblem& prob = cs.prob;
  const CentralizedSolver central(prob);
  const CondensedQP& cq = central.condensed();
  const auto states = sample_feasible_states(central, 20, 4);
  REQUIRE(states.size() == 20);
  for (const VectorXd& x0 : states) {
    const auto sol = central.solve(x0);
    REQUIRE(sol.has_value());
    const auto& y = sol->y;
    // dynamics G y* = 0
    CHECK(dynamics_residual(prob.coupling, y) <= 1e-10);
    // condensed objective equals the separable one
    CHECK(0.5 * sol->z.dot(cq.H * sol->z) == doctest::Approx(stage_cost_sum(prob.coupling, y)).epsilon(1e-10));
    CHECK(sol->value == doctest::Approx(stage_cost_sum(prob.coupling, y)).epsilon(1e-10));
    // every stage constraint of the separable form holds
    for (int k = 0; k <= prob.N; ++k) {
      const StageTemplate& st = prob.stage(k);
      VectorXd rhs = st.g;
      if (st.x0_dim()) rhs += st.E * x0;
      CHECK((st.F * y[k] - rhs).maxCoeff() <= 1e-9);
    }
    // condensed solution against an interior point reference
    const auto ref = testsupport::ipm_qp(cq.H, cq.c, cq.F, cq.g(x0));
    REQUIRE(ref.converged);
    CHECK(max_abs(sol->z - ref.x) <= 1e-6);
  }
}

TEST_CASE("recovered multipliers satisfy stage stationarity") {
  const auto& cs = case_study();
  const TubeProblem& prob = cs.prob;
  const CentralizedSolver central(prob);
  const VectorXd x0 = vec({-7, -2});
  const auto sol = central.solve(x0);
  REQUIRE(sol.has_value());
  const auto g = stage_linear_terms(prob.coupling, sol->lambda);
  for (int k = 0; k <= prob.N; ++k) {
    const StageTemplate& st = prob.stage(k);
    // 2 H_k y_k + g_k + F_k' mu_k = 0
    const VectorXd r = 2.0 * prob.coupling.H[k] * sol->y[k] + g[k] + st.F.transpose() * sol->mu[k];
    CHECK(max_abs(r) <= 1e-8);
    CHECK(sol->mu[k].minCoeff() >= -1e-10);
  }
}

TEST_CASE("regression value at the case-study initial state") {
  const auto& cs = case_study();
  const CentralizedSolver central(cs.prob);
  const auto sol = central.solve(vec({-7, -2}));
  REQUIRE(sol.has_value());
  CHECK(std::isfinite(sol->value));
  CHECK(sol->value == doctest::Approx(460.5500376941).epsilon(1e-9));
}

TEST_CASE("unconstrained instances follow the LQR law") {
  const auto& cs = case_study();
  const CentralizedSolver central(cs.prob);
  // deep inside X_T the nominal trajectory is the LQR one
  for (const VectorXd& x0 : {vec({0.5, 0.1}), vec({-0.3, 0.2}), vec({0.2, -0.4})}) {
    const auto sol = central.solve(x0);
    REQUIRE(sol.has_value());
    for (int k = 0; k < cs.prob.N; ++k) {
      const VectorXd q = sol->y[k].head(2), v = sol->y[k].tail(1);
      CHECK(max_abs(v - cs.syn.K * q) <= 1e-9);
    }
  }
}

TEST_CASE("horizon one against a dense solve") {
  const auto& cs = case_study();
  const TubeProblem prob = build_problem(cs.model, cs.syn, 1);
  const CentralizedSolver central(prob);
  const VectorXd x0 = vec({1.2, -0.8});
  const auto sol = central.solve(x0);
  REQUIRE(sol.has_value());
  // variables (q0, v0, q1) with the equality q1 = A q0 + B v0 eliminated by hand
  const MatrixXd& A = cs.model.A;
  const MatrixXd& B = cs.model.B;
  MatrixXd S1(2, 3);
  S1 << A, B;
  const MatrixXd H = 2.0 * (prob.coupling.H[0] + S1.transpose() * prob.coupling.H[1] * S1);
  const StageTemplate& f = prob.first;
  const StageTemplate& t = prob.terminal;
  MatrixXd F(f.num_rows() + t.num_rows(), 3);
  VectorXd g(F.rows());
  F << f.F, t.F * S1;
  g << f.g + f.E * x0, t.g;
  const auto ref = testsupport::ipm_qp(H, VectorXd::Zero(3), F, g);
  REQUIRE(ref.converged);
  CHECK(max_abs(sol->y[0] - ref.x) <= 1e-8);
  CHECK(max_abs(sol->y[1] - S1 * ref.x) <= 1e-8);
}

TEST_CASE("tube feedback") {
  const MatrixXd K = case_study().syn.K;
  CHECK(tube_feedback(vec({1, 2}), vec({1, 2}), vec({0.3}), K)(0) == doctest::Approx(0.3));
  CHECK(tube_feedback(vec({1, 2}), vec({0, 0}), vec({0}), K)(0) == doctest::Approx((K * vec({1, 2}))(0)));
}

TEST_CASE("infeasible initial states are reported") {
  const auto& cs = case_study();
  const CentralizedSolver central(cs.prob);
  CHECK_FALSE(central.solve(vec({0, 5})).has_value());
  CHECK_FALSE(diagnose_infeasibility(cs.prob, vec({0, 5})).empty());
}
