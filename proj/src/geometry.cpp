#include "rtmpc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rtmpc/errors.hpp"
#include "rtmpc/optkit.hpp"

namespace rtmpc {

namespace {

constexpr double kZeroRow = 1e-12;

void require_planar(int dim, const char* who) {
  if (dim != 2) {
    throw Error(ErrorCode::DimensionUnsupported,
                std::string(who) + ": only 2-dimensional sets are supported");
  }
}

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace

HPolytope::HPolytope(const MatrixXd& F, const VectorXd& g) : dim_(static_cast<int>(F.cols())) {
  if (F.rows() != g.size()) {
    throw Error(ErrorCode::InvalidArgument, "HPolytope: F and g have different row counts");
  }
  std::vector<int> keep;
  for (int i = 0; i < F.rows(); ++i) {
    const double nrm = F.row(i).norm();
    if (nrm <= kZeroRow) {
      if (g(i) < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "HPolytope: zero row with negative offset");
      }
      continue;
    }
    keep.push_back(i);
  }
  F_.resize(static_cast<Eigen::Index>(keep.size()), dim_);
  g_.resize(static_cast<Eigen::Index>(keep.size()));
  for (size_t r = 0; r < keep.size(); ++r) {
    const double nrm = F.row(keep[r]).norm();
    if (std::abs(nrm - 1.0) <= 4e-16) {
      // Already unit length: copy bit-exact.
      F_.row(r) = F.row(keep[r]);
      g_(r) = g(keep[r]);
    } else {
      F_.row(r) = F.row(keep[r]) / nrm;
      g_(r) = g(keep[r]) / nrm;
    }
  }
}

HPolytope HPolytope::Box(const VectorXd& lower, const VectorXd& upper) {
  const int n = static_cast<int>(lower.size());
  MatrixXd F(2 * n, n);
  F << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  VectorXd g(2 * n);
  g << upper, -lower;
  return HPolytope(F, g);
}

HPolytope HPolytope::Box(int dim, double radius) {
  return Box(VectorXd::Constant(dim, -radius), VectorXd::Constant(dim, radius));
}

HPolytope HPolytope::Universe(int dim) { return HPolytope(MatrixXd(0, dim), VectorXd(0)); }

bool HPolytope::is_bounded() const {
  for (int j = 0; j < dim_; ++j) {
    for (double s : {1.0, -1.0}) {
      VectorXd e = VectorXd::Zero(dim_);
      e(j) = s;
      if (solve_lp(e, F_, g_).status != LpStatus::Optimal) return false;
    }
  }
  return true;
}

bool HPolytope::is_empty() const {
  return solve_lp(VectorXd::Zero(dim_), F_, g_).status == LpStatus::Infeasible;
}

HPolytope HPolytope::scaled(double s) const {
  if (s <= 0.0) throw Error(ErrorCode::InvalidArgument, "HPolytope::scaled: factor must be positive");
  return HPolytope(F_, s * g_);
}

SupportSet::SupportSet(std::vector<SupportTerm> terms, double scale)
    : terms_(std::move(terms)), scale_(scale) {
  if (terms_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "SupportSet: use SupportSet(dim) for the origin");
  }
  if (!(scale_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "SupportSet: scale must be positive");
  dim_ = static_cast<int>(terms_.front().M.rows());
  for (const auto& t : terms_) {
    if (t.M.rows() != dim_ || t.M.cols() != t.base.dim()) {
      throw Error(ErrorCode::InvalidArgument, "SupportSet: inconsistent term dimensions");
    }
  }
}

SupportSet SupportSet::FromPolytope(const HPolytope& P) {
  return SupportSet({SupportTerm{MatrixXd::Identity(P.dim(), P.dim()), P}}, 1.0);
}

SupportSet SupportSet::linear_image(const MatrixXd& L) const {
  if (L.cols() != dim_) throw Error(ErrorCode::InvalidArgument, "linear_image: dimension mismatch");
  if (terms_.empty()) return SupportSet(static_cast<int>(L.rows()));
  std::vector<SupportTerm> mapped;
  mapped.reserve(terms_.size());
  for (const auto& t : terms_) mapped.push_back({L * t.M, t.base});
  return SupportSet(std::move(mapped), scale_);
}

double support(const HPolytope& S, const VectorXd& a) {
  if (a.size() != S.dim()) throw Error(ErrorCode::InvalidArgument, "support: dimension mismatch");
  if (a.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const LpResult lp = solve_lp(a, S.F(), S.g());
  if (lp.status == LpStatus::Unbounded) {
    throw Error(ErrorCode::Unbounded, "support: set is unbounded in the requested direction");
  }
  if (lp.status == LpStatus::Infeasible) return -std::numeric_limits<double>::infinity();
  return lp.value;
}

double support(const SupportSet& S, const VectorXd& a) {
  if (a.size() != S.dim()) throw Error(ErrorCode::InvalidArgument, "support: dimension mismatch");
  double h = 0.0;
  for (const auto& t : S.terms()) h += support(t.base, t.M.transpose() * a);
  return S.scale() * h;
}

HPolytope remove_redundant(const HPolytope& P, double tol) {
  const int m = P.num_rows();
  std::vector<char> keep(m, 1);
  for (int i = 0; i < m; ++i) {
    std::vector<int> others;
    for (int j = 0; j < m; ++j) {
      if (j != i && keep[j]) others.push_back(j);
    }
    MatrixXd F(static_cast<Eigen::Index>(others.size()), P.dim());
    VectorXd g(static_cast<Eigen::Index>(others.size()));
    for (size_t r = 0; r < others.size(); ++r) {
      F.row(r) = P.F().row(others[r]);
      g(r) = P.g()(others[r]);
    }
    // Bound the LP by the row itself (offset + 1) so it cannot be unbounded.
    MatrixXd Fb(F.rows() + 1, P.dim());
    VectorXd gb(g.size() + 1);
    Fb << F, P.F().row(i);
    gb << g, P.g()(i) + 1.0;
    const LpResult lp = solve_lp(P.F().row(i).transpose(), Fb, gb);
    if (lp.status == LpStatus::Infeasible) {
      // Empty set: keep everything so callers still see an infeasible system.
      return P;
    }
    if (lp.value <= P.g()(i) + tol) keep[i] = 0;
  }
  std::vector<int> rows;
  for (int i = 0; i < m; ++i) {
    if (keep[i]) rows.push_back(i);
  }
  MatrixXd F(static_cast<Eigen::Index>(rows.size()), P.dim());
  VectorXd g(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    F.row(r) = P.F().row(rows[r]);
    g(r) = P.g()(rows[r]);
  }
  return HPolytope(F, g);
}

namespace {

template <typename Set>
std::optional<HPolytope> tighten(const HPolytope& Y, const Set& S) {
  if (Y.dim() != S.dim()) throw Error(ErrorCode::InvalidArgument, "pontryagin_diff: dimension mismatch");
  VectorXd g = Y.g();
  for (int i = 0; i < Y.num_rows(); ++i) g(i) -= support(S, Y.F().row(i).transpose());
  HPolytope out(Y.F(), g);
  if (out.is_empty()) return std::nullopt;
  return remove_redundant(out);
}

template <typename Set>
double margin_impl(const Set& P, const HPolytope& Q) {
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < Q.num_rows(); ++i) {
    double h;
    try {
      h = support(P, Q.F().row(i).transpose());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Unbounded) return -std::numeric_limits<double>::infinity();
      throw;
    }
    margin = std::min(margin, Q.g()(i) - h);
  }
  return margin;
}

}  // namespace

std::optional<HPolytope> pontryagin_diff(const HPolytope& Y, const SupportSet& S) {
  return tighten(Y, S);
}

std::optional<HPolytope> pontryagin_diff(const HPolytope& Y, const HPolytope& S) {
  return tighten(Y, S);
}

bool contains(const HPolytope& S, const VectorXd& x, double tol) {
  if (x.size() != S.dim()) throw Error(ErrorCode::InvalidArgument, "contains: dimension mismatch");
  if (S.num_rows() == 0) return true;
  return (S.F() * x - S.g()).maxCoeff() <= tol;
}

double inclusion_margin(const HPolytope& P, const HPolytope& Q) { return margin_impl(P, Q); }
double inclusion_margin(const SupportSet& P, const HPolytope& Q) { return margin_impl(P, Q); }

bool set_inclusion(const HPolytope& P, const HPolytope& Q, double tol) {
  return inclusion_margin(P, Q) >= -tol;
}

bool set_inclusion(const SupportSet& P, const HPolytope& Q, double tol) {
  return inclusion_margin(P, Q) >= -tol;
}

// ---------------------------------------------------------------------------

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  // Merge near-duplicates.
  std::vector<Point2> uniq;
  for (const auto& p : pts) {
    if (uniq.empty() || (p - uniq.back()).norm() > 1e-12 * (1.0 + p.norm())) uniq.push_back(p);
  }
  if (uniq.size() <= 2) return uniq;
  const double eps = 1e-13;
  std::vector<Point2> hull(2 * uniq.size());
  size_t k = 0;
  for (const auto& p : uniq) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <=
                         eps * (hull[k - 1] - hull[k - 2]).norm() * (p - hull[k - 2]).norm()) {
      --k;
    }
    hull[k++] = p;
  }
  for (size_t i = uniq.size() - 1, t = k + 1; i-- > 0;) {
    const auto& p = uniq[i];
    while (k >= t && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <=
                         eps * (hull[k - 1] - hull[k - 2]).norm() * (p - hull[k - 2]).norm()) {
      --k;
    }
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<Point2> polygon_vertices(const HPolytope& P) {
  require_planar(P.dim(), "polygon_vertices");
  if (!P.is_bounded()) {
    throw Error(ErrorCode::Unbounded, "polygon_vertices: polygon is unbounded");
  }
  const int m = P.num_rows();
  std::vector<Point2> pts;
  const double tol = 1e-9 * (1.0 + P.g().cwiseAbs().maxCoeff());
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      Eigen::Matrix2d M;
      M.row(0) = P.F().row(i);
      M.row(1) = P.F().row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Point2 v = M.partialPivLu().solve(Eigen::Vector2d(P.g()(i), P.g()(j)));
      if ((P.F() * v - P.g()).maxCoeff() <= tol) pts.push_back(v);
    }
  }
  return convex_hull(std::move(pts));
}

HPolytope polygon_to_hpolytope(const std::vector<Point2>& vertices) {
  if (vertices.empty()) throw Error(ErrorCode::InvalidArgument, "polygon_to_hpolytope: no vertices");
  if (vertices.size() == 1) {
    const Point2& p = vertices.front();
    return HPolytope::Box(VectorXd(p), VectorXd(p));
  }
  std::vector<Eigen::RowVector2d> rows;
  std::vector<double> offsets;
  const size_t nv = vertices.size();
  for (size_t i = 0; i < nv; ++i) {
    const Point2& a = vertices[i];
    const Point2& b = vertices[(i + 1) % nv];
    const Point2 d = b - a;
    const Eigen::RowVector2d nrm(d.y(), -d.x());
    rows.push_back(nrm);
    offsets.push_back(nrm.dot(a));
  }
  if (nv == 2) {
    const Point2 d = vertices[1] - vertices[0];
    rows.push_back(d.transpose());
    offsets.push_back(d.dot(vertices[1]));
    rows.push_back(-d.transpose());
    offsets.push_back(-d.dot(vertices[0]));
  }
  MatrixXd F(static_cast<Eigen::Index>(rows.size()), 2);
  VectorXd g(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    F.row(i) = rows[i];
    g(i) = offsets[i];
  }
  return HPolytope(F, g);
}

std::vector<Point2> minkowski_sum_vertices(const std::vector<Point2>& P,
                                           const std::vector<Point2>& Q) {
  if (P.empty() || Q.empty()) return {};
  if (P.size() < 3 || Q.size() < 3) {
    std::vector<Point2> sums;
    for (const auto& p : P) {
      for (const auto& q : Q) sums.push_back(p + q);
    }
    return convex_hull(std::move(sums));
  }
  auto rotate_to_bottom = [](const std::vector<Point2>& V) {
    size_t best = 0;
    for (size_t i = 1; i < V.size(); ++i) {
      if (V[i].y() < V[best].y() || (V[i].y() == V[best].y() && V[i].x() < V[best].x())) best = i;
    }
    std::vector<Point2> out(V.begin() + static_cast<std::ptrdiff_t>(best), V.end());
    out.insert(out.end(), V.begin(), V.begin() + static_cast<std::ptrdiff_t>(best));
    return out;
  };
  std::vector<Point2> a = rotate_to_bottom(P);
  std::vector<Point2> b = rotate_to_bottom(Q);
  const size_t na = a.size(), nb = b.size();
  a.push_back(a[0]);
  a.push_back(a[1]);
  b.push_back(b[0]);
  b.push_back(b[1]);
  std::vector<Point2> out;
  size_t i = 0, j = 0;
  while (i < na || j < nb) {
    out.push_back(a[i] + b[j]);
    const double c = cross(a[i + 1] - a[i], b[j + 1] - b[j]);
    if (c >= 0.0 && i < na) ++i;
    if (c <= 0.0 && j < nb) ++j;
  }
  return convex_hull(std::move(out));
}

HPolytope minkowski_sum_2d(const HPolytope& P, const HPolytope& Q) {
  require_planar(P.dim(), "minkowski_sum_2d");
  require_planar(Q.dim(), "minkowski_sum_2d");
  return polygon_to_hpolytope(minkowski_sum_vertices(polygon_vertices(P), polygon_vertices(Q)));
}

std::vector<Point2> support_set_vertices(const SupportSet& S) {
  require_planar(S.dim(), "support_set_vertices");
  std::vector<Point2> acc{Point2::Zero()};
  for (const auto& t : S.terms()) {
    std::vector<Point2> img;
    if (t.base.dim() == 2) {
      for (const auto& v : polygon_vertices(t.base)) img.push_back(t.M * v);
    } else {
      // Non-planar base: its image is the polygon with the same support
      // function; recover vertices from supports along sampled directions.
      for (int k = 0; k < 256; ++k) {
        const double ang = 2.0 * M_PI * k / 256.0;
        const VectorXd a = Eigen::Vector2d(std::cos(ang), std::sin(ang));
        const LpResult lp = solve_lp(t.M.transpose() * a, t.base.F(), t.base.g());
        if (lp.status != LpStatus::Optimal) throw Error(ErrorCode::Unbounded, "support_set_vertices: unbounded term");
        img.push_back(t.M * lp.x);
      }
    }
    acc = minkowski_sum_vertices(acc, convex_hull(std::move(img)));
  }
  for (auto& v : acc) v *= S.scale();
  return acc;
}

}  // namespace rtmpc
