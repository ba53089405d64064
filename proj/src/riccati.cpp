#include "rtmpc/errors.hpp"
#include "rtmpc/optkit.hpp"

namespace rtmpc {

TrackingLqr::TrackingLqr(const MatrixXd& C, const MatrixXd& D,
                         std::vector<MatrixXd> stage_H, MatrixXd terminal_H) {
  nx_ = static_cast<int>(C.rows());
  nu_ = static_cast<int>(C.cols()) - nx_;
  N_ = static_cast<int>(stage_H.size());
  if (N_ < 1 || nu_ < 0 || D.rows() != nx_ || D.cols() != C.cols()) {
    throw Error(ErrorCode::InvalidArgument, "TrackingLqr: inconsistent C/D/horizon");
  }
  MatrixXd D_expected = MatrixXd::Zero(nx_, nx_ + nu_);
  D_expected.leftCols(nx_).setIdentity();
  if ((D - D_expected).cwiseAbs().maxCoeff() > 0.0) {
    throw Error(ErrorCode::InvalidArgument, "TrackingLqr: D must be [I 0]");
  }
  if (terminal_H.rows() != nx_ || terminal_H.cols() != nx_) {
    throw Error(ErrorCode::InvalidArgument, "TrackingLqr: terminal weight has wrong size");
  }
  A_ = C.leftCols(nx_);
  B_ = C.rightCols(nu_);
  H_ = std::move(stage_H);
  H_.push_back(std::move(terminal_H));

  S_.assign(N_ + 1, MatrixXd());
  gain_.assign(N_, MatrixXd());
  Minv_.assign(N_, MatrixXd());
  S_[N_] = H_[N_];
  for (int k = N_ - 1; k >= 0; --k) {
    const MatrixXd& Hk = H_[k];
    const MatrixXd& S = S_[k + 1];
    const MatrixXd Hqq = Hk.topLeftCorner(nx_, nx_);
    const MatrixXd Hvq = Hk.bottomLeftCorner(nu_, nx_);
    const MatrixXd Hvv = Hk.bottomRightCorner(nu_, nu_);
    const MatrixXd M = Hvv + B_.transpose() * S * B_;
    const MatrixXd Lg = Hvq + B_.transpose() * S * A_;
    Eigen::LLT<MatrixXd> llt(M);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::InvalidArgument, "TrackingLqr: stage weight not positive definite");
    }
    Minv_[k] = llt.solve(MatrixXd::Identity(nu_, nu_));
    gain_[k] = -Minv_[k] * Lg;
    MatrixXd Sk = Hqq + A_.transpose() * S * A_ + Lg.transpose() * gain_[k];
    S_[k] = 0.5 * (Sk + Sk.transpose());
  }
  S0_llt_.compute(S_[0]);
  if (S0_llt_.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidArgument, "TrackingLqr: initial-stage weight not positive definite");
  }
  s_.assign(N_ + 1, VectorXd::Zero(nx_));
  ff_.assign(N_, VectorXd::Zero(nu_));
}

void TrackingLqr::solve(const std::vector<VectorXd>& r, std::vector<VectorXd>& y,
                        std::vector<VectorXd>& delta) const {
  if (static_cast<int>(r.size()) != N_ + 1) {
    throw Error(ErrorCode::InvalidArgument, "TrackingLqr::solve: need N+1 references");
  }
  // Value function V_k(q) = q'S_k q + 2 s_k'q + const.
  s_[N_].noalias() = -H_[N_] * r[N_];
  VectorXd h(nx_ + nu_), e(nu_);
  for (int k = N_ - 1; k >= 0; --k) {
    h.noalias() = H_[k] * r[k];
    e.noalias() = B_.transpose() * s_[k + 1];
    e -= h.tail(nu_);
    ff_[k].noalias() = -Minv_[k] * e;
    s_[k].noalias() = A_.transpose() * s_[k + 1];
    s_[k] -= h.head(nx_);
    s_[k].noalias() += gain_[k].transpose() * e;
  }

  y.resize(N_ + 1);
  VectorXd q = -S0_llt_.solve(s_[0]);
  for (int k = 0; k < N_; ++k) {
    y[k].resize(nx_ + nu_);
    y[k].head(nx_) = q;
    y[k].tail(nu_).noalias() = gain_[k] * q;
    y[k].tail(nu_) += ff_[k];
    VectorXd next = A_ * q;
    next.noalias() += B_ * y[k].tail(nu_);
    q = std::move(next);
  }
  y[N_] = q;

  // Costate recursion recovers the equality multipliers.
  delta.resize(N_ + 1);
  delta[0].resize(0);
  delta[N_].noalias() = -2.0 * H_[N_] * (y[N_] - r[N_]);
  for (int k = N_ - 1; k >= 1; --k) {
    h.noalias() = H_[k] * (y[k] - r[k]);
    delta[k].noalias() = A_.transpose() * delta[k + 1];
    delta[k] -= 2.0 * h.head(nx_);
  }
}

void solve_eqqp_tridiag(const std::vector<MatrixXd>& stage_H,
                        const MatrixXd& terminal_H,
                        const std::vector<VectorXd>& r, const MatrixXd& C,
                        const MatrixXd& D, std::vector<VectorXd>& y,
                        std::vector<VectorXd>& delta) {
  TrackingLqr lqr(C, D, stage_H, terminal_H);
  lqr.solve(r, y, delta);
}

}  // namespace rtmpc
