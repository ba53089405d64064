#include "rtmpc/explicit_stage.hpp"

#include <cmath>

#include "rtmpc/errors.hpp"
#include "rtmpc/optkit.hpp"

namespace rtmpc {

namespace {

// Chebyshev radius of {p | F p <= g} intersected with the box, capped at 1.
double chebyshev_radius(const MatrixXd& F, const VectorXd& g, const VectorXd& lo,
                        const VectorXd& hi) {
  const int d = static_cast<int>(lo.size());
  const int m = static_cast<int>(F.rows());
  MatrixXd Fl(m + 2 * d + 1, d + 1);
  VectorXd gl(m + 2 * d + 1);
  Fl.setZero();
  for (int i = 0; i < m; ++i) {
    Fl.row(i).head(d) = F.row(i);
    Fl(i, d) = F.row(i).norm();
    gl(i) = g(i);
  }
  for (int j = 0; j < d; ++j) {
    Fl(m + j, j) = 1.0;
    Fl(m + j, d) = 1.0;
    gl(m + j) = hi(j);
    Fl(m + d + j, j) = -1.0;
    Fl(m + d + j, d) = 1.0;
    gl(m + d + j) = -lo(j);
  }
  Fl(m + 2 * d, d) = 1.0;
  gl(m + 2 * d) = 1.0;
  VectorXd c = VectorXd::Zero(d + 1);
  c(d) = 1.0;
  const LpResult lp = solve_lp(c, Fl, gl);
  return lp.status == LpStatus::Optimal ? lp.value : -1.0;
}

bool next_combination(std::vector<int>& idx, int m) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < m - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

ExplicitStageMap enumerate_regions(const StageTemplate& st, const VectorXd& box_lo,
                                   const VectorXd& box_hi, const EnumerationOptions& opts) {
  const int nv = st.num_vars();
  const int nx0 = st.x0_dim();
  const int d = nv + nx0;
  const int m = st.num_rows();
  if (box_lo.size() != d || box_hi.size() != d) {
    throw Error(ErrorCode::InvalidArgument, "enumerate_regions: parameter box has the wrong dimension");
  }
  if (m > opts.max_rows) {
    throw Error(ErrorCode::TemplateTooLarge, "enumerate_regions: " + std::to_string(m) +
                                                 " constraint rows exceed the cap of " +
                                                 std::to_string(opts.max_rows));
  }
  ExplicitStageMap map;
  map.kind = st.kind;
  map.param_dim = d;
  map.num_vars = nv;
  map.box_lo = box_lo;
  map.box_hi = box_hi;

  const MatrixXd Hinv = st.H.llt().solve(MatrixXd::Identity(nv, nv));
  // Parameter map of the unconstrained optimizer and of each row's rhs.
  MatrixXd theta_sel = MatrixXd::Zero(nv, d);
  theta_sel.leftCols(nv).setIdentity();
  MatrixXd rhs_param = MatrixXd::Zero(m, d);  // row i: g_i + E_i x0 = g_i + rhs_param_i p
  if (nx0 > 0) rhs_param.rightCols(nx0) = st.E;

  auto try_active = [&](const std::vector<int>& act) {
    const int a = static_cast<int>(act.size());
    MatrixXd FA(a, nv), RA(a, d);
    VectorXd gA(a);
    for (int i = 0; i < a; ++i) {
      FA.row(i) = st.F.row(act[i]);
      RA.row(i) = rhs_param.row(act[i]);
      gA(i) = st.g(act[i]);
    }
    MatrixXd A_law = -Hinv * theta_sel;
    VectorXd b_law = VectorXd::Zero(nv);
    MatrixXd Mmu(a, d);
    VectorXd mmu(a);
    if (a > 0) {
      Eigen::JacobiSVD<MatrixXd> svd(FA);
      const VectorXd sv = svd.singularValues();
      if (sv(sv.size() - 1) <= opts.licq_tol * std::max(1.0, sv(0))) return;
      const MatrixXd S = FA * Hinv * FA.transpose();
      const Eigen::LDLT<MatrixXd> Sf(S);
      Mmu = -Sf.solve(FA * Hinv * theta_sel + RA);
      mmu = -Sf.solve(gA);
      A_law -= Hinv * FA.transpose() * Mmu;
      b_law = -Hinv * FA.transpose() * mmu;
    }
    std::vector<bool> is_active(m, false);
    for (int i : act) is_active[i] = true;
    MatrixXd RF(m, d);
    VectorXd Rg(m);
    int r = 0;
    for (int i = 0; i < a; ++i) {
      RF.row(r) = -Mmu.row(i);
      Rg(r) = mmu(i);
      ++r;
    }
    for (int i = 0; i < m; ++i) {
      if (is_active[i]) continue;
      RF.row(r) = st.F.row(i) * A_law - rhs_param.row(i);
      Rg(r) = st.g(i) - st.F.row(i).dot(b_law);
      ++r;
    }
    // Drop rows with vanishing normal; a negative constant row empties the region.
    MatrixXd F2(r, d);
    VectorXd g2(r);
    int r2 = 0;
    for (int i = 0; i < r; ++i) {
      const double nrm = RF.row(i).norm();
      if (nrm < 1e-12) {
        if (Rg(i) < -1e-12) return;
        continue;
      }
      F2.row(r2) = RF.row(i) / nrm;
      g2(r2) = Rg(i) / nrm;
      ++r2;
    }
    F2.conservativeResize(r2, d);
    g2.conservativeResize(r2);
    if (chebyshev_radius(F2, g2, box_lo, box_hi) <= opts.min_radius) return;
    CriticalRegion cr;
    if (opts.prune_rows && r2 > 0) {
      const HPolytope pruned = remove_redundant(HPolytope(F2, g2));
      cr.F = pruned.F();
      cr.g = pruned.g();
    } else {
      cr.F = F2;
      cr.g = g2;
    }
    cr.A_law = A_law;
    cr.b_law = b_law;
    cr.active = act;
    map.regions.push_back(std::move(cr));
  };

  for (int a = 0; a <= std::min(nv, m); ++a) {
    std::vector<int> idx(a);
    for (int i = 0; i < a; ++i) idx[i] = i;
    do {
      try_active(idx);
    } while (a > 0 && next_combination(idx, m));
  }
  return map;
}

std::optional<VectorXd> evaluate(const ExplicitStageMap& map, const VectorXd& p, int* cache,
                                 double tol) {
  auto inside = [&](const CriticalRegion& cr) {
    for (int i = 0; i < cr.F.rows(); ++i) {
      if (cr.F.row(i).dot(p) > cr.g(i) + tol) return false;
    }
    return true;
  };
  const int n = static_cast<int>(map.regions.size());
  if (cache && *cache >= 0 && *cache < n && inside(map.regions[*cache])) {
    const auto& cr = map.regions[*cache];
    return VectorXd(cr.A_law * p + cr.b_law);
  }
  for (int i = 0; i < n; ++i) {
    if (inside(map.regions[i])) {
      if (cache) *cache = i;
      return VectorXd(map.regions[i].A_law * p + map.regions[i].b_law);
    }
  }
  return std::nullopt;
}

VectorXd stage_parameter(const StageTemplate& st, const VectorXd& theta, const VectorXd& x0) {
  if (st.x0_dim() == 0) return theta;
  VectorXd p(theta.size() + x0.size());
  p << theta, x0;
  return p;
}

ExplicitStageMaps build_explicit_maps(const TubeProblem& prob, const ParameterBoxes& boxes,
                                      const EnumerationOptions& opts) {
  ExplicitStageMaps maps;
  maps.first = enumerate_regions(prob.first, -boxes.first, boxes.first, opts);
  maps.middle = enumerate_regions(prob.middle, -boxes.middle, boxes.middle, opts);
  maps.terminal = enumerate_regions(prob.terminal, -boxes.terminal, boxes.terminal, opts);
  return maps;
}

}  // namespace rtmpc
