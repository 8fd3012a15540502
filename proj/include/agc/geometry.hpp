#pragma once

#include <optional>
#include <vector>

#include "agc/types.hpp"

namespace agc {

/// Inequality-form polytope {x : A x <= b}.
struct HPolytope {
  Matrix a_matrix;  // L x n
  Vector b_vector;  // L

  HPolytope() = default;
  HPolytope(Matrix a, Vector b);

  Index dim() const { return a_matrix.cols(); }
  Index rows() const { return a_matrix.rows(); }
};

/// Vertex-form polytope; one point per row.
struct VPolytope {
  Matrix vertices;  // V x n, V >= 1

  explicit VPolytope(Matrix v);
  Index dim() const { return vertices.cols(); }
};

/// Axis-aligned box {x : lower <= x <= upper}.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lo, Vector hi);
  static Box centered(const Vector& half_width);
  static Box scalar(double lo, double hi);

  Index dim() const { return lower.size(); }
  bool contains(const Vector& x, double tol) const;
  HPolytope as_polytope() const;
};

/// Nonempty union of same-dimension polytopes.
struct PolytopeUnion {
  std::vector<HPolytope> pieces;

  explicit PolytopeUnion(std::vector<HPolytope> p);
  Index dim() const { return pieces.front().dim(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

/// Result of lp_solve. point/value are set exactly when status == Optimal.
struct LpOutcome {
  LpStatus status = LpStatus::Infeasible;
  std::optional<Vector> point;
  std::optional<double> value;
};

/// Minimize objective . x over the polytope. Deterministic two-phase
/// simplex with Bland's rule; iteration-capped so cycling is reported as
/// IterationLimit rather than looping or masquerading as infeasibility.
LpOutcome lp_solve(const Vector& objective, const HPolytope& constraints);

/// Componentwise A . point <= b + tol.
bool contains(const HPolytope& poly, const Vector& point, double tol);

/// Facet representation of the convex hull of a 2-D or 3-D point set
/// (one row per facet, unit-norm outward normals). Affinely degenerate
/// input is rejected with the deficient dimension named.
HPolytope convex_hull(const std::vector<Vector>& points);

/// Hull vertices in construction order (2-D: counterclockwise).
VPolytope convex_hull_vertices(const std::vector<Vector>& points);

/// All 2^n corner points of a box, dimension capped at 12. With dedup set,
/// coincident corners of degenerate boxes are collapsed.
std::vector<Vector> box_vertices(const Box& box, bool dedup = false);

/// max over the polytope of direction . x. Throws on unbounded direction
/// or empty polytope.
double support_value(const HPolytope& poly, const Vector& direction);

/// Vertices of a bounded 1-D or 2-D polytope (2-D: counterclockwise
/// polygon). Used by the invariant-set iteration, which only ever needs
/// low state dimensions.
std::vector<Vector> polytope_vertices_lowdim(const HPolytope& poly);

}  // namespace agc
