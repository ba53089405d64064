#include <chrono>
#include <random>

#include "doctest.h"
#include "rtmpc/errors.hpp"
#include "rtmpc/synthesis.hpp"
#include "support.hpp"

using namespace rtmpc;
using testsupport::case_study;
using testsupport::vec;

TEST_CASE("dare: case-study gain") {
  const PlantModel m = case_study_model();
  const CostWeights w = case_study_weights();
  const auto t0 = std::chrono::steady_clock::now();
  const DareResult d = solve_dare(m.A, m.B, w.Q, w.R);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  CHECK(std::abs(d.K(0, 0) + 0.62) <= 0.005);
  CHECK(std::abs(d.K(0, 1) + 1.27) <= 0.005);
  CHECK(dare_residual(m.A, m.B, w.Q, w.R, d.P) <= 1e-10);
  CHECK(d.P.isApprox(d.P.transpose()));
}

TEST_CASE("dare: nilpotent A gives P = Q and K = 0") {
  const MatrixXd A = MatrixXd::Zero(2, 2);
  const MatrixXd B = (MatrixXd(2, 1) << 0.3, -1.0).finished();
  const MatrixXd Q = (MatrixXd(2, 2) << 2, 0.5, 0.5, 1).finished();
  const MatrixXd R = MatrixXd::Constant(1, 1, 0.7);
  const DareResult d = solve_dare(A, B, Q, R);
  CHECK((d.P - Q).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(d.K.cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("dare: B = 0 reduces to the Lyapunov equation") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N01;
  for (int t = 0; t < 10; ++t) {
    MatrixXd A = MatrixXd::NullaryExpr(3, 3, [&] { return N01(rng); });
    A *= 0.8 / A.eigenvalues().cwiseAbs().maxCoeff();
    const MatrixXd B = MatrixXd::Zero(3, 1);
    const MatrixXd Q = MatrixXd::Identity(3, 3);
    const MatrixXd R = MatrixXd::Identity(1, 1);
    const DareResult d = solve_dare(A, B, Q, R);
    MatrixXd P = Q;
    for (int i = 0; i < 5000; ++i) P = A.transpose() * P * A + Q;
    CHECK((d.P - P).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("rpi: nilpotent closed loop gives Z = W") {
  const HPolytope W = HPolytope::Box(2, 0.1);
  const RpiResult r = compute_rpi(MatrixXd::Zero(2, 2), W, 1e-4);
  CHECK(r.s == 1);
  CHECK(r.alpha == 0.0);
  for (double t = 0; t < 6.28; t += 0.3) {
    const VectorXd a = vec({std::cos(t), std::sin(t)});
    CHECK(support(r.Z, a) == doctest::Approx(support(W, a)).epsilon(1e-14));
  }
}

TEST_CASE("rpi: geometric series for A_K = 0.5 I") {
  const double eps = 1e-6;
  const RpiResult r = compute_rpi(0.5 * MatrixXd::Identity(2, 2), HPolytope::Box(2, 1.0), eps);
  const double h = support(r.Z, vec({1, 0}));
  CHECK(h >= 2.0 - 1e-12);
  CHECK(h <= 2.0 + eps);
  CHECK(r.alpha <= eps / (eps + r.M) + 1e-15);
}

TEST_CASE("rpi: case-study invariance certificate") {
  const auto& cs = case_study();
  const auto t0 = std::chrono::steady_clock::now();
  const RpiResult r = compute_rpi(cs.syn.closed_loop(cs.model), cs.model.W, 1e-4);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 5.0);
  CHECK(r.s == cs.syn.s);
  CHECK(rpi_invariance_violation(cs.syn, cs.model) <= 1e-4);
  CHECK(cs.syn.alpha > 0.0);
  CHECK(cs.syn.alpha < 1.0);
}

TEST_CASE("mpi: nilpotent closed loop gives the one-step set") {
  const HPolytope X = HPolytope::Box(2, 1.0);
  const HPolytope U = HPolytope::Box(1, 0.5);
  const MatrixXd K = (MatrixXd(1, 2) << 0.2, -0.1).finished();
  const HPolytope XT = compute_mpi_terminal(MatrixXd::Zero(2, 2), X, U, K);
  // {x in X, |Kx| <= 0.5}; the Kx rows are redundant here.
  for (double t = 0; t < 6.28; t += 0.2) {
    const VectorXd a = vec({std::cos(t), std::sin(t)});
    CHECK(support(XT, a) == doctest::Approx(support(X, a)).epsilon(1e-10));
  }
}

TEST_CASE("mpi: case-study terminal ingredients") {
  const auto& cs = case_study();
  const MatrixXd AK = cs.syn.closed_loop(cs.model);
  const HPolytope& XT = cs.syn.X_T;
  CHECK(set_inclusion(SupportSet::FromPolytope(XT).linear_image(AK), XT));
  CHECK(set_inclusion(XT, cs.syn.X_tight));
  CHECK(set_inclusion(SupportSet::FromPolytope(XT).linear_image(cs.syn.K), cs.syn.U_tight));

  SUBCASE("shrinking the input bound shrinks X_T") {
    const HPolytope U10 = cs.syn.U_tight.scaled(0.1);
    const HPolytope small = compute_mpi_terminal(AK, cs.syn.X_tight, U10, cs.syn.K);
    CHECK(set_inclusion(small, XT));
    CHECK_FALSE(set_inclusion(XT, small));
  }
}

TEST_CASE("validation report") {
  const auto& cs = case_study();
  const ValidationReport rep = validate_assumptions(cs.syn, cs.model);
  CHECK(rep.all_pass());
  for (const auto& it : rep.items) {
    INFO(it.name);
    CHECK(it.pass);
  }
  REQUIRE(rep.find("terminal_cost_decrease") != nullptr);
  CHECK(rep.find("terminal_cost_decrease")->margin >= -1e-8);

  SUBCASE("halved P breaks the terminal cost decrease") {
    TubeSynthesis bad = cs.syn;
    bad.P *= 0.5;
    const MatrixXd AK = bad.closed_loop(cs.model);
    const MatrixXd M = bad.P - AK.transpose() * bad.P * AK - bad.Q - bad.K.transpose() * bad.R * bad.K;
    CHECK(Eigen::SelfAdjointEigenSolver<MatrixXd>(M).eigenvalues().minCoeff() < -1e-8);
    const ValidationReport r2 = validate_assumptions(bad, cs.model);
    CHECK_FALSE(r2.all_pass());
    CHECK_FALSE(r2.find("terminal_cost_decrease")->pass);
  }
}

TEST_CASE("synthesis: inflated disturbance empties the tightened sets") {
  PlantModel m = case_study_model();
  m.W = m.W.scaled(100.0);
  // X (-) Z is empty: the supporting LP of Z along x2 exceeds the slack of X.
  CHECK_THROWS_AS(synthesize(m, case_study_weights()), Error);
  try {
    synthesize(m, case_study_weights());
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTightening);
  }
}

TEST_CASE("cost weights are checked") {
  CostWeights w = case_study_weights();
  w.R(0, 0) = 0.0;
  CHECK_THROWS_AS(w.check(2, 1), Error);
  w = case_study_weights();
  w.Q(0, 1) = 0.3;
  CHECK_THROWS_AS(w.check(2, 1), Error);
}
