#include <random>

#include "doctest.h"
#include "rtmpc/aladin.hpp"
#include "rtmpc/explicit_stage.hpp"
#include "rtmpc/io.hpp"
#include "rtmpc/sim.hpp"
#include "support.hpp"

using namespace rtmpc;
using testsupport::case_study;
using testsupport::max_abs;
using testsupport::vec;

namespace {

StageTemplate scalar_template() {
  StageTemplate st;
  st.kind = StageKind::Middle;
  st.H = MatrixXd::Constant(1, 1, 2.0);
  st.F.resize(2, 1);
  st.F << 1, -1;
  st.g = vec({1, 1});
  st.E.resize(2, 0);
  return st;
}

const ExplicitStageMaps& case_maps() {
  static const std::shared_ptr<const ExplicitStageMaps> maps = [] {
    const auto& c = case_study();
    CentralizedSolver central(c.prob);
    std::vector<VectorXd> starts{vec({-7, -2})};
    for (const auto& s : sample_feasible_states(central, 8, 1, 0.9)) starts.push_back(s);
    return build_calibrated_maps(c.prob, RtiConfig{}, starts, 50, 1);
  }();
  return *maps;
}

VectorXd uniform_in(std::mt19937_64& rng, const VectorXd& lo, const VectorXd& hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd p(lo.size());
  for (int i = 0; i < p.size(); ++i) p(i) = lo(i) + (hi(i) - lo(i)) * u(rng);
  return p;
}

}  // namespace

TEST_CASE("unconstrained template has one region") {
  StageTemplate st;
  st.H = (MatrixXd(2, 2) << 4, 1, 1, 3).finished();
  st.F.resize(0, 2);
  st.g.resize(0);
  st.E.resize(0, 0);
  const ExplicitStageMap map = enumerate_regions(st, vec({-1, -1}), vec({1, 1}));
  REQUIRE(map.regions.size() == 1);
  const VectorXd th = vec({0.3, -0.7});
  const auto x = evaluate(map, th);
  REQUIRE(x.has_value());
  CHECK(max_abs(*x + st.H.ldlt().solve(th)) <= 1e-12);
}

TEST_CASE("scalar saturation has three regions") {
  const StageTemplate st = scalar_template();
  const ExplicitStageMap map = enumerate_regions(st, vec({-5}), vec({5}));
  CHECK(map.regions.size() == 3);
  // min xi^2 + theta xi over |xi| <= 1
  for (double th = -5.0; th <= 5.0; th += 0.25) {
    const auto x = evaluate(map, vec({th}));
    REQUIRE(x.has_value());
    CHECK((*x)(0) == doctest::Approx(std::clamp(-th / 2.0, -1.0, 1.0)).epsilon(1e-12));
  }
  // the origin lies in the unconstrained region
  int cache = -1;
  evaluate(map, vec({0.0}), &cache);
  REQUIRE(cache >= 0);
  CHECK(map.regions[cache].active.empty());
}

TEST_CASE("templates above the row limit are rejected") {
  StageTemplate st = scalar_template();
  EnumerationOptions opts;
  opts.max_rows = 1;
  CHECK_THROWS(enumerate_regions(st, vec({-1}), vec({1}), opts));
}

TEST_CASE("case-study maps agree with the online stage QP") {
  const auto& c = case_study();
  const ExplicitStageMaps& maps = case_maps();
  MESSAGE("regions: first " << maps.first.regions.size() << ", middle " << maps.middle.regions.size()
                            << ", terminal " << maps.terminal.regions.size());
  std::mt19937_64 rng(123);
  for (StageKind kind : {StageKind::Middle, StageKind::Terminal, StageKind::First}) {
    const ExplicitStageMap& map = maps.for_kind(kind);
    const StageTemplate& st = kind == StageKind::First ? c.prob.first
                              : kind == StageKind::Middle ? c.prob.middle : c.prob.terminal;
    const QpSolver qp(st.H);
    int compared = 0, misses = 0;
    for (int t = 0; t < 10000; ++t) {
      const VectorXd p = uniform_in(rng, map.box_lo, map.box_hi);
      const VectorXd theta = p.head(st.num_vars());
      VectorXd g = st.g;
      if (st.x0_dim()) g += st.E * p.tail(st.x0_dim());
      const QPSolution online = qp.solve(theta, st.F, g);
      const auto hit = evaluate(map, p);
      if (online.status != QpStatus::Optimal) {
        CHECK_FALSE(hit.has_value());
        continue;
      }
      if (!hit) {
        ++misses;
        continue;
      }
      ++compared;
      CHECK(max_abs(*hit - online.x) <= 1e-8);
    }
    INFO("kind " << to_string(kind));
    CHECK(compared > 0);
    CHECK(misses <= compared / 1000);
  }
}

TEST_CASE("laws of adjacent regions agree on their common boundary") {
  const ExplicitStageMap& map = case_maps().middle;
  std::mt19937_64 rng(77);
  int boundaries = 0;
  for (int t = 0; t < 400 && boundaries < 100; ++t) {
    VectorXd a = uniform_in(rng, map.box_lo, map.box_hi);
    VectorXd b = uniform_in(rng, map.box_lo, map.box_hi);
    int ra = -1, rb = -1;
    if (!evaluate(map, a, &ra, 0.0) || !evaluate(map, b, &rb, 0.0) || ra == rb) continue;
    for (int it = 0; it < 60; ++it) {
      const VectorXd m = 0.5 * (a + b);
      int rm = -1;
      if (!evaluate(map, m, &rm, 0.0)) break;
      if (rm == ra) {
        a = m;
      } else {
        b = m;
        rb = rm;
      }
    }
    const VectorXd p = 0.5 * (a + b);
    const auto& A = map.regions[ra];
    const auto& B = map.regions[rb];
    CHECK(max_abs((A.A_law * p + A.b_law) - (B.A_law * p + B.b_law)) <= 1e-9);
    ++boundaries;
  }
  CHECK(boundaries > 10);
}

TEST_CASE("evaluation is deterministic and survives serialization") {
  const ExplicitStageMap& map = case_maps().first;
  const ExplicitStageMap copy = explicit_map_from_json(explicit_map_to_json(map));
  REQUIRE(copy.regions.size() == map.regions.size());
  std::mt19937_64 rng(5);
  for (int t = 0; t < 2000; ++t) {
    const VectorXd p = uniform_in(rng, map.box_lo, map.box_hi);
    const auto x1 = evaluate(map, p);
    const auto x2 = evaluate(map, p);
    const auto x3 = evaluate(copy, p);
    REQUIRE(x1.has_value() == x2.has_value());
    REQUIRE(x1.has_value() == x3.has_value());
    if (x1) {
      CHECK((*x1 - *x2).cwiseAbs().maxCoeff() == 0.0);
      CHECK(max_abs(*x1 - *x3) <= 1e-12);
    }
  }
  CHECK(serialized_size(map) > 0);
}

TEST_CASE("explicit and online stage solves agree on random iterates") {
  const auto& c = case_study();
  auto maps = std::make_shared<const ExplicitStageMaps>(case_maps());
  StageSolver online(c.prob), expl(c.prob, maps);
  auto ws_o = online.make_workspace();
  auto ws_e = expl.make_workspace();
  std::mt19937_64 rng(19);
  std::normal_distribution<double> N01;
  const CentralizedSolver central(c.prob);
  const auto states = sample_feasible_states(central, 20, 3, 0.5);
  for (const VectorXd& x0 : states) {
    const auto star = central.solve(x0);
    REQUIRE(star.has_value());
    AladinState s = AladinState::zeros(c.prob.coupling);
    for (int k = 0; k <= c.prob.N; ++k) s.y[k] = star->y[k] + 0.1 * VectorXd::NullaryExpr(s.y[k].size(), [&] { return N01(rng); });
    for (int k = 1; k <= c.prob.N; ++k) s.lambda[k] = star->lambda[k] + 0.1 * VectorXd::NullaryExpr(2, [&] { return N01(rng); });
    std::vector<VectorXd> xo, xe;
    solve_decoupled(c.prob, s, x0, online, ws_o, xo);
    solve_decoupled(c.prob, s, x0, expl, ws_e, xe);
    for (int k = 0; k <= c.prob.N; ++k) CHECK(max_abs(xo[k] - xe[k]) <= 1e-8);
  }
}
