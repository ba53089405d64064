#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rtmpc/problem.hpp"
#include "rtmpc/synthesis.hpp"

namespace testsupport {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CaseStudy {
  rtmpc::PlantModel model;
  rtmpc::TubeSynthesis syn;
  rtmpc::TubeProblem prob;
};

inline const CaseStudy& case_study() {
  static const CaseStudy cs = [] {
    CaseStudy c;
    c.model = rtmpc::case_study_model();
    c.syn = rtmpc::synthesize(c.model, rtmpc::case_study_weights());
    c.prob = rtmpc::build_problem(c.model, c.syn, 20);
    return c;
  }();
  return cs;
}

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline double max_abs(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Infeasible-start primal-dual interior point for
//   min 1/2 x'Hx + c'x  s.t.  F x <= g.
// Used only as a reference solution.
struct IpmResult {
  VectorXd x, mu;
  bool converged = false;
};

inline IpmResult ipm_qp(const MatrixXd& H, const VectorXd& c, const MatrixXd& F, const VectorXd& g,
                        int max_iter = 200) {
  const int n = static_cast<int>(H.rows()), m = static_cast<int>(F.rows());
  VectorXd x = VectorXd::Zero(n);
  VectorXd s = (g - F * x).cwiseMax(1.0);
  VectorXd mu = VectorXd::Ones(m);
  IpmResult out;
  const double scale = 1.0 + std::max(c.size() ? max_abs(c) : 0.0, g.size() ? max_abs(g) : 0.0);
  for (int it = 0; it < max_iter; ++it) {
    const VectorXd rd = H * x + c + F.transpose() * mu;
    const VectorXd rp = F * x + s - g;
    const double gap = m ? s.dot(mu) / m : 0.0;
    if (max_abs(rd) < 1e-12 * scale && max_abs(rp) < 1e-12 * scale && gap < 1e-14 * scale) {
      out.converged = true;
      break;
    }
    const double sigma = 0.1;
    const VectorXd rc = (-s.cwiseProduct(mu)).array() + sigma * gap;
    const VectorXd d = mu.cwiseQuotient(s);
    const MatrixXd K = H + F.transpose() * d.asDiagonal() * F;
    const VectorXd rhs = -rd - F.transpose() * (rc + mu.cwiseProduct(rp)).cwiseQuotient(s);
    const VectorXd dx = K.ldlt().solve(rhs);
    const VectorXd ds = -rp - F * dx;
    const VectorXd dmu = (rc - mu.cwiseProduct(ds)).cwiseQuotient(s);
    double a = 1.0;
    for (int i = 0; i < m; ++i) {
      if (ds(i) < 0) a = std::min(a, -0.99 * s(i) / ds(i));
      if (dmu(i) < 0) a = std::min(a, -0.99 * mu(i) / dmu(i));
    }
    x += a * dx;
    s += a * ds;
    mu += a * dmu;
  }
  if (!out.converged) {
    const VectorXd rd = H * x + c + F.transpose() * mu;
    const VectorXd slack = g - F * x;
    out.converged = max_abs(rd) < 1e-9 * scale && (m == 0 || slack.minCoeff() > -1e-9 * scale) &&
                    max_abs(slack.cwiseMax(0.0).cwiseProduct(mu)) < 1e-9 * scale;
  }
  out.x = x;
  out.mu = mu;
  return out;
}

// Dense KKT solve of  min sum_k (y_k - r_k)' H_k (y_k - r_k)
// s.t. D y_k - C y_{k-1} = 0 (k = 1..N, D = I on the last stage).
inline void dense_tracking_kkt(const MatrixXd& C, const MatrixXd& D, const std::vector<MatrixXd>& H,
                               const std::vector<VectorXd>& r, std::vector<VectorXd>& y,
                               std::vector<VectorXd>& delta) {
  const int N = static_cast<int>(H.size()) - 1;
  const int nx = static_cast<int>(C.rows());
  std::vector<int> off(N + 2, 0);
  for (int k = 0; k <= N; ++k) off[k + 1] = off[k] + static_cast<int>(H[k].rows());
  const int nv = off[N + 1], ne = N * nx;
  MatrixXd KKT = MatrixXd::Zero(nv + ne, nv + ne);
  VectorXd rhs = VectorXd::Zero(nv + ne);
  for (int k = 0; k <= N; ++k) {
    const int d = static_cast<int>(H[k].rows());
    KKT.block(off[k], off[k], d, d) = 2.0 * H[k];
    rhs.segment(off[k], d) = 2.0 * H[k] * r[k];
  }
  for (int k = 1; k <= N; ++k) {
    const int row = nv + (k - 1) * nx;
    const MatrixXd Dk = k == N ? MatrixXd::Identity(nx, nx) : D;
    KKT.block(row, off[k], nx, Dk.cols()) = Dk;
    KKT.block(row, off[k - 1], nx, C.cols()) = -C;
  }
  KKT.topRightCorner(nv, ne) = KKT.bottomLeftCorner(ne, nv).transpose();
  const VectorXd sol = KKT.fullPivLu().solve(rhs);
  y.assign(N + 1, VectorXd());
  delta.assign(N + 1, VectorXd());
  for (int k = 0; k <= N; ++k) y[k] = sol.segment(off[k], H[k].rows());
  for (int k = 1; k <= N; ++k) delta[k] = sol.segment(nv + (k - 1) * nx, nx);
}

// Random polygon with the origin inside: F rows on the unit circle, g in [lo, hi].
inline rtmpc::HPolytope random_polygon(std::mt19937_64& rng, int rows, double lo, double hi) {
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI), off(lo, hi);
  MatrixXd F(rows + 4, 2);
  VectorXd g(rows + 4);
  for (int i = 0; i < rows; ++i) {
    const double t = ang(rng);
    F.row(i) << std::cos(t), std::sin(t);
    g(i) = off(rng);
  }
  // Keep it bounded.
  F.bottomRows(4) << 1, 0, -1, 0, 0, 1, 0, -1;
  g.tail(4).setConstant(hi * 3.0);
  return rtmpc::HPolytope(F, g);
}

}  // namespace testsupport
