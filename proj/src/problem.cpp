#include "rtmpc/problem.hpp"

#include <cmath>

#include "rtmpc/errors.hpp"

namespace rtmpc {

namespace {

MatrixXd vstack(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

VectorXd vstack(const VectorXd& a, const VectorXd& b) {
  VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

void StageSets::first_stage_rows(const VectorXd& x0, MatrixXd& F, VectorXd& g) const {
  const int m0 = Y0_base.num_rows();
  const int mz = static_cast<int>(Y0_param_F.rows());
  F.resize(m0 + mz, nx + nu);
  g.resize(m0 + mz);
  F.topRows(m0) = Y0_base.F();
  g.head(m0) = Y0_base.g();
  F.bottomRows(mz).setZero();
  F.bottomLeftCorner(mz, nx) = -Y0_param_F;
  g.tail(mz) = Y0_param_g - Y0_param_F * x0;
}

StageSets build_stage_sets(const TubeSynthesis& syn, const PlantModel& model) {
  StageSets s;
  s.nx = model.nx();
  s.nu = model.nu();
  const int nx = s.nx, nu = s.nu;
  const MatrixXd& Fx = syn.X_tight.F();
  const MatrixXd& Fu = syn.U_tight.F();

  MatrixXd F = MatrixXd::Zero(2 * Fx.rows() + Fu.rows(), nx + nu);
  VectorXd g(F.rows());
  F.topLeftCorner(Fx.rows(), nx) = Fx;
  F.block(Fx.rows(), nx, Fu.rows(), nu) = Fu;
  F.bottomLeftCorner(Fx.rows(), nx) = Fx * model.A;
  F.bottomRightCorner(Fx.rows(), nu) = Fx * model.B;
  g << syn.X_tight.g(), syn.U_tight.g(), syn.X_tight.g();
  const HPolytope raw(F, g);
  if (raw.is_empty()) throw Error(ErrorCode::EmptyStageSet, "stage set Y_k is empty");
  s.Yk = remove_redundant(raw);
  s.Y0_base = s.Yk;
  s.Y0_param_F = syn.Z_h.F();
  s.Y0_param_g = syn.Z_h.g();
  s.YN = syn.X_T;
  if (s.YN.is_empty()) throw Error(ErrorCode::EmptyStageSet, "terminal stage set is empty");
  return s;
}

MatrixXd CouplingStructure::G() const {
  int cols = 0;
  std::vector<int> offset(N + 1);
  for (int k = 0; k <= N; ++k) {
    offset[k] = cols;
    cols += stage_dim(k);
  }
  MatrixXd G = MatrixXd::Zero(N * nx, cols);
  for (int k = 1; k <= N; ++k) {
    const int r = (k - 1) * nx;
    G.block(r, offset[k - 1], nx, nx + nu) = -C;
    if (k < N) {
      G.block(r, offset[k], nx, nx + nu) = D;
    } else {
      G.block(r, offset[k], nx, nx).setIdentity();
    }
  }
  return G;
}

CouplingStructure build_coupling(const TubeSynthesis& syn, const PlantModel& model, int N) {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "horizon N must be at least 1");
  CouplingStructure cs;
  cs.N = N;
  cs.nx = model.nx();
  cs.nu = model.nu();
  cs.C.resize(cs.nx, cs.nx + cs.nu);
  cs.C << model.A, model.B;
  cs.D = MatrixXd::Zero(cs.nx, cs.nx + cs.nu);
  cs.D.leftCols(cs.nx).setIdentity();
  MatrixXd Hs = MatrixXd::Zero(cs.nx + cs.nu, cs.nx + cs.nu);
  Hs.topLeftCorner(cs.nx, cs.nx) = syn.Q;
  Hs.bottomRightCorner(cs.nu, cs.nu) = syn.R;
  cs.H.assign(N, Hs);
  cs.H.push_back(syn.P);
  return cs;
}

double stage_cost_sum(const CouplingStructure& cs, const std::vector<VectorXd>& y) {
  double J = 0.0;
  for (int k = 0; k <= cs.N; ++k) J += y[k].dot(cs.H[k] * y[k]);
  return J;
}

std::vector<VectorXd> stage_linear_terms(const CouplingStructure& cs,
                                         const std::vector<VectorXd>& lambda) {
  std::vector<VectorXd> g(cs.N + 1);
  for (int k = 0; k < cs.N; ++k) {
    g[k] = -cs.C.transpose() * lambda[k + 1];
    if (k > 0) g[k] += cs.D.transpose() * lambda[k];
  }
  g[cs.N] = lambda[cs.N];
  return g;
}

double dynamics_residual(const CouplingStructure& cs, const std::vector<VectorXd>& y) {
  double r = 0.0;
  for (int k = 1; k <= cs.N; ++k) {
    const VectorXd next = (k < cs.N ? VectorXd(cs.D * y[k]) : y[k]) - cs.C * y[k - 1];
    r = std::max(r, next.cwiseAbs().maxCoeff());
  }
  return r;
}

const char* to_string(StageKind kind) {
  switch (kind) {
    case StageKind::First: return "first";
    case StageKind::Middle: return "middle";
    case StageKind::Terminal: return "terminal";
  }
  return "?";
}

TubeProblem build_problem(const PlantModel& model, const TubeSynthesis& syn, int N) {
  TubeProblem p;
  p.model = model;
  p.syn = syn;
  p.N = N;
  p.sets = build_stage_sets(syn, model);
  p.coupling = build_coupling(syn, model, N);
  const int nx = model.nx(), nu = model.nu();

  p.middle.kind = StageKind::Middle;
  p.middle.H = 4.0 * p.coupling.H[0];
  p.middle.F = p.sets.Yk.F();
  p.middle.g = p.sets.Yk.g();
  p.middle.E = MatrixXd::Zero(p.middle.F.rows(), 0);

  p.first.kind = StageKind::First;
  p.first.H = 4.0 * p.coupling.H[0];
  const int mz = static_cast<int>(p.sets.Y0_param_F.rows());
  MatrixXd memb = MatrixXd::Zero(mz, nx + nu);
  memb.leftCols(nx) = -p.sets.Y0_param_F;
  p.first.F = vstack(p.sets.Y0_base.F(), memb);
  p.first.g = vstack(p.sets.Y0_base.g(), p.sets.Y0_param_g);
  p.first.E = vstack(MatrixXd::Zero(p.sets.Y0_base.num_rows(), nx), MatrixXd(-p.sets.Y0_param_F));

  p.terminal.kind = StageKind::Terminal;
  p.terminal.H = 4.0 * p.coupling.H[N];
  p.terminal.F = p.sets.YN.F();
  p.terminal.g = p.sets.YN.g();
  p.terminal.E = MatrixXd::Zero(p.terminal.F.rows(), 0);

  std::vector<MatrixXd> stage_H(p.coupling.H.begin(), p.coupling.H.begin() + N);
  p.lqr = TrackingLqr(p.coupling.C, p.coupling.D, std::move(stage_H), p.coupling.H[N]);
  return p;
}

std::vector<VectorXd> CondensedQP::expand(const VectorXd& z) const {
  std::vector<VectorXd> y(N + 1);
  for (int k = 0; k <= N; ++k) y[k] = S[k] * z;
  return y;
}

CondensedQP build_condensed(const TubeProblem& prob) {
  const int N = prob.N, nx = prob.nx(), nu = prob.nu();
  const MatrixXd& A = prob.model.A;
  const MatrixXd& B = prob.model.B;
  CondensedQP cq;
  cq.N = N;
  cq.nx = nx;
  cq.nu = nu;
  const int nz = nx + N * nu;

  // q_k = Phi_k z
  std::vector<MatrixXd> Phi(N + 1);
  Phi[0] = MatrixXd::Zero(nx, nz);
  Phi[0].leftCols(nx).setIdentity();
  for (int k = 0; k < N; ++k) {
    Phi[k + 1] = A * Phi[k];
    Phi[k + 1].middleCols(nx + k * nu, nu) += B;
  }
  cq.S.resize(N + 1);
  for (int k = 0; k < N; ++k) {
    cq.S[k] = MatrixXd::Zero(nx + nu, nz);
    cq.S[k].topRows(nx) = Phi[k];
    cq.S[k].block(nx, nx + k * nu, nu, nu).setIdentity();
  }
  cq.S[N] = Phi[N];

  cq.H = MatrixXd::Zero(nz, nz);
  for (int k = 0; k <= N; ++k) {
    cq.H.noalias() += 2.0 * cq.S[k].transpose() * prob.coupling.H[k] * cq.S[k];
  }
  cq.H = 0.5 * (cq.H + cq.H.transpose());
  cq.c = VectorXd::Zero(nz);

  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  std::vector<VectorXd> erows;
  auto add_stage = [&](int k, const StageTemplate& st) {
    const MatrixXd Fz = st.F * cq.S[k];
    for (int i = 0; i < Fz.rows(); ++i) {
      const double nrm = Fz.row(i).norm();
      VectorXd e = VectorXd::Zero(nx);
      if (st.x0_dim() > 0) e = st.E.row(i).transpose();
      if (nrm < 1e-12) {
        if (st.x0_dim() == 0 && st.g(i) >= 0.0) continue;
        if (st.x0_dim() == 0) {
          throw Error(ErrorCode::Infeasible, "condensed QP: stage " + std::to_string(k) + " has an infeasible constant row");
        }
      }
      const double s = nrm < 1e-12 ? 1.0 : 1.0 / nrm;
      const VectorXd f = Fz.row(i).transpose() * s;
      const double gi = st.g(i) * s;
      const VectorXd ei = e * s;
      bool merged = false;
      for (size_t r = 0; r < rows.size(); ++r) {
        if ((rows[r] - f).cwiseAbs().maxCoeff() < 1e-12 && std::abs(rhs[r] - gi) < 1e-12 &&
            (erows[r] - ei).cwiseAbs().maxCoeff() < 1e-12) {
          cq.origins[r].push_back({k, i, s});
          merged = true;
          break;
        }
      }
      if (merged) continue;
      rows.push_back(f);
      rhs.push_back(gi);
      erows.push_back(ei);
      cq.origins.push_back({{k, i, s}});
    }
  };
  add_stage(0, prob.first);
  for (int k = 1; k < N; ++k) add_stage(k, prob.middle);
  add_stage(N, prob.terminal);

  const int m = static_cast<int>(rows.size());
  cq.F.resize(m, nz);
  cq.g0.resize(m);
  cq.E.resize(m, nx);
  for (int r = 0; r < m; ++r) {
    cq.F.row(r) = rows[r].transpose();
    cq.g0(r) = rhs[r];
    cq.E.row(r) = erows[r].transpose();
  }
  return cq;
}

std::vector<VectorXd> recover_duals(const TubeProblem& prob, const std::vector<VectorXd>& y,
                                    const std::vector<VectorXd>& mu) {
  const CouplingStructure& cs = prob.coupling;
  const int N = cs.N, nx = cs.nx;
  const MatrixXd A = cs.C.leftCols(nx);
  std::vector<VectorXd> lambda(N + 1);
  lambda[0].resize(0);
  lambda[N] = -2.0 * cs.H[N] * y[N] - prob.stage(N).F.transpose() * mu[N];
  for (int k = N - 1; k >= 1; --k) {
    const VectorXd grad = 2.0 * cs.H[k] * y[k] + prob.stage(k).F.transpose() * mu[k];
    lambda[k] = A.transpose() * lambda[k + 1] - grad.head(nx);
  }
  return lambda;
}

VectorXd tube_feedback(const VectorXd& x0, const VectorXd& q0, const VectorXd& v0,
                       const MatrixXd& K) {
  return v0 + K * (x0 - q0);
}

std::string diagnose_infeasibility(const TubeProblem& prob, const VectorXd& x0) {
  MatrixXd F;
  VectorXd g;
  prob.sets.first_stage_rows(x0, F, g);
  const LpResult lp = solve_lp(VectorXd::Zero(F.cols()), F, g);
  if (lp.status == LpStatus::Infeasible) {
    return "first-stage set is empty: x0 is not in (X (-) Z) (+) Z with an admissible nominal input";
  }
  return "first-stage set is nonempty but the terminal set X_T cannot be reached within N steps";
}

}  // namespace rtmpc
