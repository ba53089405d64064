#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace rtmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Point2 = Eigen::Vector2d;

/// Polyhedron {x | F x <= g} in halfspace form.
///
/// Rows are scaled to unit Euclidean norm on construction. Rows whose normal
/// is numerically zero are dropped when trivially satisfied (g >= 0) and
/// rejected otherwise, so every stored row has a nonzero normal.
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(const MatrixXd& F, const VectorXd& g);

  static HPolytope Box(const VectorXd& lower, const VectorXd& upper);
  /// {x | ||x||_inf <= radius}
  static HPolytope Box(int dim, double radius);
  /// The whole space R^dim (no rows).
  static HPolytope Universe(int dim);

  int dim() const { return dim_; }
  int num_rows() const { return static_cast<int>(F_.rows()); }
  const MatrixXd& F() const { return F_; }
  const VectorXd& g() const { return g_; }

  /// An LP in every +-e_j direction has a finite optimum.
  bool is_bounded() const;
  /// g > 0 componentwise (rows are normalized, so this is the interior test).
  bool has_origin_interior() const { return g_.size() == 0 || g_.minCoeff() > 0.0; }
  bool is_empty() const;

  /// Image under x -> s * x.
  HPolytope scaled(double s) const;

 private:
  MatrixXd F_;
  VectorXd g_;
  int dim_ = 0;
};

/// One summand M * base of a SupportSet.
struct SupportTerm {
  MatrixXd M;
  HPolytope base;
};

/// Lazy Minkowski sum scale * (M_1 base_1 (+) ... (+) M_k base_k).
///
/// Only the support function is ever evaluated, which keeps the representation
/// exact in any dimension. An empty term list is the singleton {0}.
class SupportSet {
 public:
  SupportSet() = default;
  explicit SupportSet(int dim) : dim_(dim) {}
  SupportSet(std::vector<SupportTerm> terms, double scale = 1.0);

  static SupportSet FromPolytope(const HPolytope& P);

  int dim() const { return dim_; }
  double scale() const { return scale_; }
  const std::vector<SupportTerm>& terms() const { return terms_; }

  /// The set L * S (L has dim() columns).
  SupportSet linear_image(const MatrixXd& L) const;

 private:
  std::vector<SupportTerm> terms_;
  double scale_ = 1.0;
  int dim_ = 0;
};

/// max_{x in S} a.x; throws Error(Unbounded) along a recession direction.
double support(const HPolytope& S, const VectorXd& a);
double support(const SupportSet& S, const VectorXd& a);

/// Facetwise tightening {x | F_Y x <= g_Y - h_S(F_Y rows)} with redundant
/// rows pruned. Returns nullopt when the result is empty.
std::optional<HPolytope> pontryagin_diff(const HPolytope& Y, const SupportSet& S);
std::optional<HPolytope> pontryagin_diff(const HPolytope& Y, const HPolytope& S);

/// Removes rows implied by the others (one LP per row, processed in order).
HPolytope remove_redundant(const HPolytope& P, double tol = 1e-9);

bool contains(const HPolytope& S, const VectorXd& x, double tol = 1e-9);

/// min over facets (f, g) of Q of g - h_P(f); -inf if P is unbounded along
/// some facet normal, +inf if Q has no rows.
double inclusion_margin(const HPolytope& P, const HPolytope& Q);
double inclusion_margin(const SupportSet& P, const HPolytope& Q);

bool set_inclusion(const HPolytope& P, const HPolytope& Q, double tol = 1e-9);
bool set_inclusion(const SupportSet& P, const HPolytope& Q, double tol = 1e-9);

// ---------------------------------------------------------------------------
// Planar helpers. Everything below requires dim() == 2 and throws
// Error(DimensionUnsupported) otherwise.

/// Convex hull, counter-clockwise, collinear points removed.
std::vector<Point2> convex_hull(std::vector<Point2> pts);

/// Vertices (CCW) of a bounded polygon given in H-form.
std::vector<Point2> polygon_vertices(const HPolytope& P);

/// H-form of the convex hull of a CCW vertex list (points and segments allowed).
HPolytope polygon_to_hpolytope(const std::vector<Point2>& vertices);

/// Edge-merge Minkowski sum of two convex polygons given by CCW vertices.
std::vector<Point2> minkowski_sum_vertices(const std::vector<Point2>& P,
                                           const std::vector<Point2>& Q);

HPolytope minkowski_sum_2d(const HPolytope& P, const HPolytope& Q);

/// Explicit polygon of a planar SupportSet (sum of the term images).
std::vector<Point2> support_set_vertices(const SupportSet& S);

}  // namespace rtmpc
