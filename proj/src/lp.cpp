#include <cmath>
#include <limits>
#include <vector>

#include "rtmpc/errors.hpp"
#include "rtmpc/optkit.hpp"

namespace rtmpc {

namespace {

constexpr double kCostTol = 1e-10;
constexpr double kPivotTol = 1e-11;
constexpr double kFeasTol = 1e-9;
constexpr int kDegenerateSwitch = 30;

enum class PhaseResult { Optimal, Unbounded };

// Dense tableau. Column layout: x+ (n) | x- (n) | slack (m) | artificial (k) | rhs
struct Tableau {
  MatrixXd T;
  VectorXd obj;  // reduced costs; obj(rhs) holds -z
  std::vector<int> basis;
  std::vector<char> allowed;
  int rhs = 0;

  void pivot(int row, int col) {
    T.row(row) /= T(row, col);
    const VectorXd column = T.col(col);
    const Eigen::RowVectorXd prow = T.row(row);
    for (int i = 0; i < T.rows(); ++i) {
      if (i != row && column(i) != 0.0) T.row(i).noalias() -= column(i) * prow;
    }
    obj.noalias() -= obj(col) * prow.transpose();
    basis[row] = col;
  }

  PhaseResult run(int max_iter) {
    int degenerate_run = 0;
    for (int it = 0; it < max_iter; ++it) {
      const bool bland = degenerate_run >= kDegenerateSwitch;
      int enter = -1;
      double best = kCostTol;
      for (int j = 0; j < rhs; ++j) {
        if (!allowed[j] || obj(j) <= kCostTol) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (obj(j) > best) {
          best = obj(j);
          enter = j;
        }
      }
      if (enter < 0) return PhaseResult::Optimal;

      int leave = -1;
      double ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < T.rows(); ++i) {
        const double a = T(i, enter);
        if (a <= kPivotTol) continue;
        const double r = T(i, rhs) / a;
        if (r < ratio - 1e-12 ||
            (r <= ratio + 1e-12 && leave >= 0 && basis[i] < basis[leave])) {
          ratio = std::min(ratio, r);
          leave = i;
        }
      }
      if (leave < 0) return PhaseResult::Unbounded;
      degenerate_run = (ratio <= 1e-12) ? degenerate_run + 1 : 0;
      pivot(leave, enter);
    }
    throw Error(ErrorCode::NoConvergence, "solve_lp: pivot limit exceeded");
  }
};

}  // namespace

LpResult solve_lp(const VectorXd& c, const MatrixXd& F, const VectorXd& g) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(F.rows());
  if (F.cols() != n || g.size() != m) {
    throw Error(ErrorCode::InvalidArgument, "solve_lp: dimension mismatch");
  }
  LpResult res;
  if (m == 0) {
    if (c.size() == 0 || c.cwiseAbs().maxCoeff() == 0.0) {
      res.status = LpStatus::Optimal;
      res.x = VectorXd::Zero(n);
      return res;
    }
    res.status = LpStatus::Unbounded;
    return res;
  }

  std::vector<int> art_rows;
  for (int i = 0; i < m; ++i) {
    if (g(i) < 0.0) art_rows.push_back(i);
  }
  const int k = static_cast<int>(art_rows.size());
  const int ncol = 2 * n + m + k;

  Tableau tab;
  tab.rhs = ncol;
  tab.T = MatrixXd::Zero(m, ncol + 1);
  tab.basis.assign(m, -1);
  tab.allowed.assign(ncol, 1);
  int a = 0;
  for (int i = 0; i < m; ++i) {
    const double sign = g(i) < 0.0 ? -1.0 : 1.0;
    tab.T.block(i, 0, 1, n) = sign * F.row(i);
    tab.T.block(i, n, 1, n) = -sign * F.row(i);
    tab.T(i, 2 * n + i) = sign;
    tab.T(i, ncol) = sign * g(i);
    if (sign < 0.0) {
      const int col = 2 * n + m + a++;
      tab.T(i, col) = 1.0;
      tab.basis[i] = col;
    } else {
      tab.basis[i] = 2 * n + i;
    }
  }
  const int max_iter = 50 * (m + ncol) + 1000;

  std::vector<char> dead_row(m, 0);
  if (k > 0) {
    // Phase 1: maximize -sum(artificials).
    tab.obj = VectorXd::Zero(ncol + 1);
    for (int j = 2 * n + m; j < ncol; ++j) tab.obj(j) = -1.0;
    for (int i = 0; i < m; ++i) {
      if (tab.basis[i] >= 2 * n + m) tab.obj += tab.T.row(i).transpose();
    }
    tab.run(max_iter);
    double infeas = 0.0;
    for (int i = 0; i < m; ++i) {
      if (tab.basis[i] >= 2 * n + m) infeas += tab.T(i, ncol);
    }
    if (infeas > kFeasTol * (1.0 + g.cwiseAbs().maxCoeff())) {
      res.status = LpStatus::Infeasible;
      return res;
    }
    // Drive artificials out of the basis.
    for (int i = 0; i < m; ++i) {
      if (tab.basis[i] < 2 * n + m) continue;
      int col = -1;
      double best = 1e-9;
      for (int j = 0; j < 2 * n + m; ++j) {
        if (std::abs(tab.T(i, j)) > best) {
          best = std::abs(tab.T(i, j));
          col = j;
        }
      }
      if (col >= 0) {
        tab.pivot(i, col);
      } else {
        dead_row[i] = 1;  // linearly dependent row
      }
    }
    for (int j = 2 * n + m; j < ncol; ++j) tab.allowed[j] = 0;
    for (int i = 0; i < m; ++i) {
      if (dead_row[i]) tab.T.row(i).setZero();
    }
  }

  // Phase 2.
  VectorXd cost = VectorXd::Zero(ncol + 1);
  cost.head(n) = c;
  cost.segment(n, n) = -c;
  tab.obj = cost;
  for (int i = 0; i < m; ++i) {
    if (dead_row[i]) continue;
    const double cb = cost(tab.basis[i]);
    if (cb != 0.0) tab.obj.noalias() -= cb * tab.T.row(i).transpose();
  }
  if (tab.run(max_iter) == PhaseResult::Unbounded) {
    res.status = LpStatus::Unbounded;
    return res;
  }
  res.status = LpStatus::Optimal;
  res.x = VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    if (dead_row[i]) continue;
    const int b = tab.basis[i];
    if (b < n) {
      res.x(b) += tab.T(i, ncol);
    } else if (b < 2 * n) {
      res.x(b - n) -= tab.T(i, ncol);
    }
  }
  res.value = c.dot(res.x);
  return res;
}

}  // namespace rtmpc
