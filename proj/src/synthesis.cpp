#include "rtmpc/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rtmpc/errors.hpp"
#include "rtmpc/optkit.hpp"

namespace rtmpc {

namespace {

bool is_spd(const MatrixXd& M) {
  if (M.rows() != M.cols() || M.rows() == 0) return false;
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff())) return false;
  Eigen::LLT<MatrixXd> llt(M);
  return llt.info() == Eigen::Success &&
         Eigen::SelfAdjointEigenSolver<MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() > 0.0;
}

double spectral_radius(const MatrixXd& M) {
  return Eigen::EigenSolver<MatrixXd>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

// Outer approximation of a SupportSet by supporting halfspaces along a fixed
// direction set (coordinate directions first, then seeded random ones).
HPolytope outer_approximation(const SupportSet& Z, int count) {
  const int n = Z.dim();
  std::vector<VectorXd> dirs;
  for (int j = 0; j < n; ++j) {
    VectorXd e = VectorXd::Zero(n);
    e(j) = 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  }
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  while (static_cast<int>(dirs.size()) < count) {
    VectorXd a(n);
    for (int j = 0; j < n; ++j) a(j) = nd(rng);
    dirs.push_back(a.normalized());
  }
  MatrixXd F(static_cast<Eigen::Index>(dirs.size()), n);
  VectorXd g(static_cast<Eigen::Index>(dirs.size()));
  for (size_t i = 0; i < dirs.size(); ++i) {
    F.row(i) = dirs[i].transpose();
    g(i) = support(Z, dirs[i]);
  }
  return HPolytope(F, g);
}

}  // namespace

void PlantModel::check_dimensions() const {
  const int n = nx();
  if (A.cols() != n || B.rows() != n || X.dim() != n || U.dim() != nu() || W.dim() != n) {
    throw Error(ErrorCode::InvalidArgument, "PlantModel: inconsistent dimensions");
  }
}

void CostWeights::check(int nx, int nu) const {
  if (Q.rows() != nx || !is_spd(Q)) {
    throw Error(ErrorCode::InvalidArgument, "Q must be a symmetric positive definite nx-by-nx matrix");
  }
  if (R.rows() != nu || !is_spd(R)) {
    throw Error(ErrorCode::InvalidArgument, "R must be a symmetric positive definite nu-by-nu matrix");
  }
}

DareResult solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                      const MatrixXd& R, double tol, int max_iter) {
  DareResult res;
  MatrixXd P = Q;
  for (int it = 1; it <= max_iter; ++it) {
    const MatrixXd BtP = B.transpose() * P;
    const MatrixXd gain = (R + BtP * B).ldlt().solve(BtP * A);
    MatrixXd next = A.transpose() * P * A - (BtP * A).transpose() * gain + Q;
    next = 0.5 * (next + next.transpose());
    const double step = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (!std::isfinite(step)) break;
    if (step < tol) {
      res.P = P;
      const MatrixXd BtPn = B.transpose() * P;
      res.K = -(R + BtPn * B).ldlt().solve(BtPn * A);
      res.iterations = it;
      return res;
    }
  }
  throw Error(ErrorCode::NoConvergence, "solve_dare: Riccati iteration did not converge (is (A,B) stabilizable?)");
}

double dare_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P) {
  const MatrixXd BtPA = B.transpose() * P * A;
  const MatrixXd res = P - A.transpose() * P * A +
                       BtPA.transpose() * (R + B.transpose() * P * B).ldlt().solve(BtPA) - Q;
  return res.cwiseAbs().maxCoeff();
}

RpiResult compute_rpi(const MatrixXd& A_K, const HPolytope& W, double eps, int max_s) {
  const int n = static_cast<int>(A_K.rows());
  if (!(eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "compute_rpi: eps must be positive");
  if (W.dim() != n || !W.has_origin_interior()) {
    throw Error(ErrorCode::InvalidArgument, "compute_rpi: W must contain the origin in its interior");
  }
  // Running coordinate supports of the partial sum, +e_j and -e_j.
  VectorXd sum_pos = VectorXd::Zero(n), sum_neg = VectorXd::Zero(n);
  MatrixXd Ai = MatrixXd::Identity(n, n);  // A_K^{s-1} at the top of iteration s
  for (int s = 1; s <= max_s; ++s) {
    for (int j = 0; j < n; ++j) {
      sum_pos(j) += support(W, Ai.transpose().col(j));
      sum_neg(j) += support(W, -Ai.transpose().col(j));
    }
    const MatrixXd As = A_K * Ai;
    double alpha = 0.0;
    for (int i = 0; i < W.num_rows(); ++i) {
      alpha = std::max(alpha, support(W, As.transpose() * W.F().row(i).transpose()) / W.g()(i));
    }
    const double M = std::max(sum_pos.maxCoeff(), sum_neg.maxCoeff());
    if (alpha <= eps / (eps + M)) {
      std::vector<SupportTerm> terms;
      MatrixXd Ak = MatrixXd::Identity(n, n);
      for (int i = 0; i < s; ++i) {
        terms.push_back({Ak, W});
        Ak = A_K * Ak;
      }
      RpiResult res;
      res.Z = SupportSet(std::move(terms), 1.0 / (1.0 - alpha));
      res.alpha = alpha;
      res.s = s;
      res.M = M;
      return res;
    }
    Ai = As;
  }
  throw Error(ErrorCode::NoConvergence, "compute_rpi: truncation index exceeded the cap (spectral radius close to 1?)");
}

HPolytope compute_mpi_terminal(const MatrixXd& A_K, const HPolytope& X_tight,
                               const HPolytope& U_tight, const MatrixXd& K, int max_t) {
  const int n = static_cast<int>(A_K.rows());
  MatrixXd H(X_tight.num_rows() + U_tight.num_rows(), n);
  H << X_tight.F(), U_tight.F() * K;
  VectorXd h(H.rows());
  h << X_tight.g(), U_tight.g();
  if (h.size() > 0 && h.minCoeff() <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "compute_mpi_terminal: constraint set must contain the origin in its interior");
  }

  MatrixXd rows = H;
  VectorXd rhs = h;
  MatrixXd Apow = A_K;  // A_K^{t+1}
  for (int t = 0; t <= max_t; ++t) {
    const MatrixXd cand = H * Apow;
    bool all_redundant = true;
    for (int i = 0; i < cand.rows() && all_redundant; ++i) {
      const LpResult lp = solve_lp(cand.row(i).transpose(), rows, rhs);
      if (lp.status == LpStatus::Infeasible) {
        throw Error(ErrorCode::InvalidArgument, "compute_mpi_terminal: constraint set is empty");
      }
      if (lp.status == LpStatus::Unbounded || lp.value > h(i) + 1e-10 * (1.0 + std::abs(h(i)))) {
        all_redundant = false;
      }
    }
    if (all_redundant) return remove_redundant(HPolytope(rows, rhs));
    MatrixXd grown(rows.rows() + cand.rows(), n);
    grown << rows, cand;
    VectorXd grown_rhs(rhs.size() + h.size());
    grown_rhs << rhs, h;
    // Keep the LP sizes in check by pruning as the set grows.
    const HPolytope pruned = remove_redundant(HPolytope(grown, grown_rhs));
    rows = pruned.F();
    rhs = pruned.g();
    Apow = A_K * Apow;
  }
  throw Error(ErrorCode::NoFiniteDetermination, "compute_mpi_terminal: no finite determination within the iteration cap");
}

TubeSynthesis synthesize(const PlantModel& model, const CostWeights& weights,
                         const SynthesisOptions& opts) {
  model.check_dimensions();
  weights.check(model.nx(), model.nu());
  if (!model.W.is_bounded() || !model.W.has_origin_interior()) {
    throw Error(ErrorCode::InvalidArgument, "W must be bounded with the origin in its interior");
  }
  if (!model.U.is_bounded() || !model.U.has_origin_interior()) {
    throw Error(ErrorCode::InvalidArgument, "U must be bounded with the origin in its interior");
  }
  if (!model.X.has_origin_interior()) {
    throw Error(ErrorCode::InvalidArgument, "X must contain the origin in its interior");
  }

  TubeSynthesis syn;
  syn.Q = weights.Q;
  syn.R = weights.R;
  const DareResult dare = solve_dare(model.A, model.B, weights.Q, weights.R);
  syn.P = dare.P;
  syn.K = dare.K;
  const MatrixXd A_K = syn.closed_loop(model);
  if (spectral_radius(A_K) >= 1.0) {
    throw Error(ErrorCode::NoConvergence, "synthesize: A + BK is not Schur stable");
  }

  RpiResult rpi = compute_rpi(A_K, model.W, opts.eps_rpi);
  syn.Z = std::move(rpi.Z);
  syn.alpha = rpi.alpha;
  syn.s = rpi.s;
  syn.rpi_M = rpi.M;
  if (model.nx() == 2) {
    syn.Z_h = polygon_to_hpolytope(support_set_vertices(syn.Z));
    syn.Z_h_approximate = false;
  } else {
    syn.Z_h = outer_approximation(syn.Z, std::max(opts.outer_directions, 2 * model.nx()));
    syn.Z_h_approximate = true;
  }

  auto X_tight = pontryagin_diff(model.X, syn.Z);
  auto U_tight = pontryagin_diff(model.U, syn.Z.linear_image(syn.K));
  if (!X_tight) throw Error(ErrorCode::EmptyTightening, "X (-) Z is empty");
  if (!U_tight) throw Error(ErrorCode::EmptyTightening, "U (-) KZ is empty");
  if (!X_tight->has_origin_interior()) {
    throw Error(ErrorCode::EmptyTightening, "X (-) Z does not contain the origin in its interior");
  }
  if (!U_tight->has_origin_interior()) {
    throw Error(ErrorCode::EmptyTightening, "U (-) KZ does not contain the origin in its interior");
  }
  syn.X_tight = *X_tight;
  syn.U_tight = *U_tight;
  syn.X_T = compute_mpi_terminal(A_K, syn.X_tight, syn.U_tight, syn.K);
  return syn;
}

double rpi_invariance_violation(const TubeSynthesis& syn, const PlantModel& model) {
  const MatrixXd A_K = syn.closed_loop(model);
  const SupportSet image = syn.Z.linear_image(A_K);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < syn.Z_h.num_rows(); ++i) {
    const VectorXd f = syn.Z_h.F().row(i).transpose();
    worst = std::max(worst, support(image, f) + support(model.W, f) - support(syn.Z, f));
  }
  return worst;
}

bool ValidationReport::all_pass() const {
  return std::all_of(items.begin(), items.end(), [](const ValidationItem& i) { return i.pass; });
}

const ValidationItem* ValidationReport::find(const std::string& name) const {
  for (const auto& i : items) {
    if (i.name == name) return &i;
  }
  return nullptr;
}

ValidationReport validate_assumptions(const TubeSynthesis& syn, const PlantModel& model) {
  constexpr double kSetTol = 1e-9;
  ValidationReport rep;
  auto add = [&](std::string name, bool pass, double margin) {
    rep.items.push_back({std::move(name), pass, margin});
  };
  const MatrixXd A_K = syn.closed_loop(model);

  // Standing set assumptions.
  add("X_origin_interior", model.X.has_origin_interior(),
      model.X.num_rows() ? model.X.g().minCoeff() : std::numeric_limits<double>::infinity());
  add("U_bounded_origin_interior", model.U.is_bounded() && model.U.has_origin_interior(),
      model.U.g().minCoeff());
  add("W_bounded_origin_interior", model.W.is_bounded() && model.W.has_origin_interior(),
      model.W.g().minCoeff());

  const double rho = spectral_radius(A_K);
  add("closed_loop_schur", rho < 1.0, 1.0 - rho);

  const bool xt_ok = !syn.X_tight.is_empty() && syn.X_tight.has_origin_interior();
  const bool ut_ok = !syn.U_tight.is_empty() && syn.U_tight.has_origin_interior();
  add("X_tight_nonempty", xt_ok, syn.X_tight.num_rows() ? syn.X_tight.g().minCoeff() : 0.0);
  add("U_tight_nonempty", ut_ok, syn.U_tight.num_rows() ? syn.U_tight.g().minCoeff() : 0.0);

  const double inv = rpi_invariance_violation(syn, model);
  add("Z_robust_invariance", inv <= 1e-6, -inv);

  // Terminal ingredients.
  const double m1 = inclusion_margin(SupportSet::FromPolytope(syn.X_T).linear_image(A_K), syn.X_T);
  add("A_K_XT_in_XT", m1 >= -kSetTol, m1);
  const double m2 = inclusion_margin(syn.X_T, syn.X_tight);
  add("XT_in_X_tight", m2 >= -kSetTol, m2);
  const double m3 = inclusion_margin(SupportSet::FromPolytope(syn.X_T).linear_image(syn.K), syn.U_tight);
  add("K_XT_in_U_tight", m3 >= -kSetTol, m3);

  // Lyapunov decrease of the terminal cost under u = Kx.
  const MatrixXd lyap = syn.P - A_K.transpose() * syn.P * A_K - syn.Q - syn.K.transpose() * syn.R * syn.K;
  const double min_eig = Eigen::SelfAdjointEigenSolver<MatrixXd>(0.5 * (lyap + lyap.transpose()),
                                                                 Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .minCoeff();
  add("terminal_cost_decrease", min_eig >= -1e-8, min_eig);
  return rep;
}

PlantModel case_study_model() {
  PlantModel m;
  m.A.resize(2, 2);
  m.A << 1.0, 1.0, 0.0, 1.0;
  m.B.resize(2, 1);
  m.B << 0.5, 1.0;
  m.X = HPolytope((MatrixXd(1, 2) << 0.0, 1.0).finished(), VectorXd::Constant(1, 2.0));
  m.U = HPolytope::Box(1, 1.0);
  m.W = HPolytope::Box(2, 0.1);
  return m;
}

CostWeights case_study_weights() {
  CostWeights w;
  w.Q = MatrixXd::Identity(2, 2);
  w.R = MatrixXd::Constant(1, 1, 0.1);
  return w;
}

}  // namespace rtmpc
