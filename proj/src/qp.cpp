#include <algorithm>
#include <cmath>
#include <limits>

#include "rtmpc/errors.hpp"
#include "rtmpc/optkit.hpp"

namespace rtmpc {

namespace {

constexpr double kViolationTol = 1e-11;
constexpr double kDependenceTol = 1e-12;

// Active constraint bookkeeping. Equalities are stored with negative ids
// -(i+1), inequalities with their row index.
struct ActiveSet {
  std::vector<int> ids;
  std::vector<VectorXd> w;  // L^{-1} n_i
  VectorXd u;               // multipliers, aligned with ids

  int size() const { return static_cast<int>(ids.size()); }
};

}  // namespace

void DenseQP::validate() const {
  const int n = num_vars();
  if (H.cols() != n || c.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "DenseQP: H/c dimension mismatch");
  }
  if (F.rows() > 0 && F.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "DenseQP: F has wrong column count");
  }
  if (F.rows() != g.size()) {
    throw Error(ErrorCode::InvalidArgument, "DenseQP: F/g row mismatch");
  }
  if (Ae.rows() > 0 && Ae.cols() != n) {
    throw Error(ErrorCode::InvalidArgument, "DenseQP: Ae has wrong column count");
  }
  if (Ae.rows() != be.size()) {
    throw Error(ErrorCode::InvalidArgument, "DenseQP: Ae/be row mismatch");
  }
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + H.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::InvalidArgument, "DenseQP: H is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(H, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "DenseQP: H is not positive definite");
  }
}

double kkt_residual(const DenseQP& qp, const QPSolution& sol) {
  const VectorXd& x = sol.x;
  VectorXd grad = qp.H * x + qp.c;
  if (qp.F.rows() > 0) grad += qp.F.transpose() * sol.mu_ineq;
  if (qp.Ae.rows() > 0) grad += qp.Ae.transpose() * sol.mu_eq;
  double res = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (qp.F.rows() > 0) {
    const VectorXd slack = qp.F * x - qp.g;
    res = std::max(res, std::max(0.0, slack.maxCoeff()));
    res = std::max(res, std::max(0.0, -sol.mu_ineq.minCoeff()));
    res = std::max(res, slack.cwiseProduct(sol.mu_ineq).cwiseAbs().maxCoeff());
  }
  if (qp.Ae.rows() > 0) {
    res = std::max(res, (qp.Ae * x - qp.be).cwiseAbs().maxCoeff());
  }
  return res;
}

QpSolver::QpSolver(const MatrixXd& H) {
  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "QpSolver: H is not positive definite");
  }
  L_ = llt.matrixL();
}

QPSolution QpSolver::solve(const VectorXd& c, const MatrixXd& F, const VectorXd& g,
                           const std::vector<int>* warm) const {
  static const MatrixXd kNoRows;
  static const VectorXd kNoRhs;
  return solve(c, F, g, kNoRows, kNoRhs, warm);
}

QPSolution QpSolver::solve(const VectorXd& c, const MatrixXd& F, const VectorXd& g,
                           const MatrixXd& Ae, const VectorXd& be,
                           const std::vector<int>* warm, int max_iter) const {
  const int n = num_vars();
  const int m = static_cast<int>(F.rows());
  const int me = static_cast<int>(Ae.rows());
  if (max_iter < 0) max_iter = 50 * (n + m + me) + 10;
  const auto L = L_.triangularView<Eigen::Lower>();

  auto normal = [&](int id) -> VectorXd {
    return id < 0 ? VectorXd(Ae.row(-id - 1).transpose()) : VectorXd(F.row(id).transpose());
  };
  auto rhs = [&](int id) { return id < 0 ? be(-id - 1) : g(id); };

  // Unconstrained minimizer.
  VectorXd Linv_c = L.solve(c);
  const VectorXd x_free = -L.transpose().solve(Linv_c);

  ActiveSet act;
  MatrixXd V(n, 0);
  Eigen::HouseholderQR<MatrixXd> qr;

  auto refactor = [&]() {
    V.resize(n, act.size());
    for (int i = 0; i < act.size(); ++i) V.col(i) = act.w[i];
    if (act.size() > 0) qr.compute(V);
  };
  // Thin Q'w and R^{-1}; valid after refactor().
  auto thin_qt = [&](const VectorXd& w) -> VectorXd {
    VectorXd t = qr.householderQ().transpose() * w;
    return t.head(act.size());
  };
  auto r_solve = [&](const VectorXd& t) -> VectorXd {
    return qr.matrixQR().topLeftCorner(act.size(), act.size())
        .triangularView<Eigen::Upper>().solve(t);
  };
  auto rt_solve = [&](const VectorXd& t) -> VectorXd {
    return qr.matrixQR().topLeftCorner(act.size(), act.size())
        .triangularView<Eigen::Upper>().transpose().solve(t);
  };
  // Residual of w after projecting out span(V).
  auto project_out = [&](const VectorXd& w) -> VectorXd {
    if (act.size() == 0) return w;
    VectorXd t = VectorXd::Zero(n);
    t.head(act.size()) = thin_qt(w);
    return w - qr.householderQ() * t;
  };
  // Try to append a constraint; false when it is linearly dependent.
  auto try_add = [&](int id) {
    VectorXd w = L.solve(normal(id));
    const VectorXd resid = project_out(w);
    if (resid.squaredNorm() <= kDependenceTol * std::max(1.0, w.squaredNorm())) return false;
    act.ids.push_back(id);
    act.w.push_back(std::move(w));
    refactor();
    return true;
  };
  // Solve the equality-constrained problem on the current active set.
  auto eq_solve = [&](VectorXd& x) {
    if (act.size() == 0) {
      x = x_free;
      act.u.resize(0);
      return;
    }
    VectorXd b(act.size()), nx(act.size());
    for (int i = 0; i < act.size(); ++i) {
      b(i) = rhs(act.ids[i]);
      nx(i) = normal(act.ids[i]).dot(x_free);
    }
    // S u = N'x_free - b with S = V'V = R'R.
    act.u = r_solve(rt_solve(nx - b));
    x = x_free - L.transpose().solve(V * act.u);
  };
  auto drop = [&](int pos) {
    act.ids.erase(act.ids.begin() + pos);
    act.w.erase(act.w.begin() + pos);
    VectorXd u(act.size());
    for (int i = 0, j = 0; i <= act.size(); ++i) {
      if (i != pos) u(j++) = act.u(i);
    }
    act.u = u;
    refactor();
  };

  QPSolution sol;
  sol.status = QpStatus::Optimal;

  for (int i = 0; i < me; ++i) {
    if (!try_add(-(i + 1))) {
      // Dependent equality: consistent only if the residual already vanishes
      // at the EQP solution; checked after the solve below.
      continue;
    }
  }
  if (warm) {
    for (int id : *warm) {
      if (id >= 0 && id < m) try_add(id);
    }
  }
  VectorXd x;
  eq_solve(x);
  // Shed warm constraints until the multipliers are dual feasible.
  while (true) {
    int worst = -1;
    double most_neg = -1e-14;
    for (int i = 0; i < act.size(); ++i) {
      if (act.ids[i] >= 0 && act.u(i) < most_neg) {
        most_neg = act.u(i);
        worst = i;
      }
    }
    if (worst < 0) break;
    drop(worst);
    eq_solve(x);
  }
  for (int i = 0; i < me; ++i) {
    if (std::abs(Ae.row(i).dot(x) - be(i)) > 1e-9 * (1.0 + std::abs(be(i)))) {
      sol.status = QpStatus::Infeasible;
      sol.x = x;
      return sol;
    }
  }

  std::vector<char> is_active(m, 0);
  for (int id : act.ids) {
    if (id >= 0) is_active[id] = 1;
  }

  int iter = 0;
  while (true) {
    // Most violated inequality, lowest index on ties.
    int p = -1;
    double worst = kViolationTol;
    if (m > 0) {
      const VectorXd viol = F * x - g;
      for (int i = 0; i < m; ++i) {
        if (is_active[i]) continue;
        const double scaled = viol(i) / (1.0 + std::abs(g(i)));
        if (scaled > worst) {
          worst = scaled;
          p = i;
        }
      }
    }
    if (p < 0) break;

    const VectorXd np = F.row(p).transpose();
    const VectorXd wp = L.solve(np);
    double tp = 0.0;  // multiplier of the entering constraint
    bool added = false;
    while (!added) {
      if (++iter > max_iter) {
        sol.status = QpStatus::IterLimit;
        break;
      }
      // Dual direction du = -S^{-1} V'w_p; primal direction from the
      // projection residual.
      VectorXd du;
      VectorXd resid = wp;
      if (act.size() > 0) {
        const VectorXd t = thin_qt(wp);
        du = -r_solve(t);
        resid = project_out(wp);
      } else {
        du.resize(0);
      }
      const double curv = resid.squaredNorm();
      const bool dependent = curv <= kDependenceTol * std::max(1.0, wp.squaredNorm());

      // Partial step: an active inequality multiplier hits zero.
      double t1 = std::numeric_limits<double>::infinity();
      int block = -1;
      for (int i = 0; i < act.size(); ++i) {
        if (act.ids[i] < 0 || du(i) >= 0.0) continue;
        const double r = act.u(i) / -du(i);
        if (r < t1 || (r == t1 && block >= 0 && act.ids[i] < act.ids[block])) {
          t1 = r;
          block = i;
        }
      }
      const double viol = np.dot(x) - g(p);
      const double t2 = dependent ? std::numeric_limits<double>::infinity() : viol / curv;

      if (!std::isfinite(t1) && !std::isfinite(t2)) {
        sol.status = QpStatus::Infeasible;
        break;
      }
      const double t = std::min(t1, t2);
      if (!dependent) x -= t * L.transpose().solve(resid);
      if (act.size() > 0) act.u += t * du;
      tp += t;
      if (t2 <= t1) {
        if (!try_add(p)) {
          // Numerically dependent after all; treat as satisfied.
          added = true;
          break;
        }
        act.u.conservativeResize(act.size());
        act.u(act.size() - 1) = tp;
        is_active[p] = 1;
        added = true;
      } else {
        is_active[act.ids[block]] = 0;
        act.u(block) = 0.0;
        drop(block);
      }
    }
    if (sol.status != QpStatus::Optimal) break;
  }

  sol.iterations = iter;
  sol.x = x;
  sol.mu_ineq = VectorXd::Zero(m);
  sol.mu_eq = VectorXd::Zero(me);
  for (int i = 0; i < act.size(); ++i) {
    const int id = act.ids[i];
    if (id < 0) {
      sol.mu_eq(-id - 1) = act.u(i);
    } else {
      sol.mu_ineq(id) = std::max(0.0, act.u(i));
      sol.active_set.push_back(id);
    }
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  const VectorXd Lt_x = L_.transpose() * x;
  sol.objective = 0.5 * Lt_x.squaredNorm() + c.dot(x);
  return sol;
}

QPSolution solve_qp(const DenseQP& qp, const std::vector<int>* warm) {
  qp.validate();
  QpSolver solver(qp.H);
  return solver.solve(qp.c, qp.F, qp.g, qp.Ae, qp.be, warm);
}

}  // namespace rtmpc
