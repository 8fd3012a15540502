#include "agc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace agc {

Tolerances& tolerances() {
  static Tolerances tols;
  return tols;
}

HPolytope::HPolytope(Matrix a, Vector b) : a_matrix(std::move(a)), b_vector(std::move(b)) {
  if (a_matrix.rows() < 1) throw Error("HPolytope: need at least one row");
  if (a_matrix.rows() != b_vector.size()) throw Error("HPolytope: row count mismatch between A and b");
  if (!is_finite(a_matrix) || !is_finite(b_vector)) throw Error("HPolytope: non-finite entry");
}

VPolytope::VPolytope(Matrix v) : vertices(std::move(v)) {
  if (vertices.rows() < 1) throw Error("VPolytope: need at least one point");
  if (!is_finite(vertices)) throw Error("VPolytope: non-finite entry");
}

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw Error("Box: dimension mismatch");
  if (!is_finite(lower) || !is_finite(upper)) throw Error("Box: non-finite bound");
  if (((upper - lower).array() < 0).any()) throw Error("Box: lower exceeds upper");
}

Box Box::centered(const Vector& half_width) {
  if ((half_width.array() < 0).any()) throw Error("Box: negative half width");
  return Box(-half_width, half_width);
}

Box Box::scalar(double lo, double hi) {
  Vector l(1), u(1);
  l << lo;
  u << hi;
  return Box(l, u);
}

bool Box::contains(const Vector& x, double tol) const {
  if (x.size() != dim()) throw Error("Box::contains: dimension mismatch");
  return ((x - lower).array() >= -tol).all() && ((upper - x).array() >= -tol).all();
}

HPolytope Box::as_polytope() const {
  const Index n = dim();
  Matrix a(2 * n, n);
  Vector b(2 * n);
  a.topRows(n) = Matrix::Identity(n, n);
  a.bottomRows(n) = -Matrix::Identity(n, n);
  b.head(n) = upper;
  b.tail(n) = -lower;
  return HPolytope(a, b);
}

PolytopeUnion::PolytopeUnion(std::vector<HPolytope> p) : pieces(std::move(p)) {
  if (pieces.empty()) throw Error("PolytopeUnion: empty piece list");
  const Index n = pieces.front().dim();
  for (const auto& piece : pieces)
    if (piece.dim() != n) throw Error("PolytopeUnion: mixed dimensions");
}

// ---------------------------------------------------------------------------
// Linear programming: dense-tableau two-phase simplex, Bland's rule.
//
// min c.x  s.t.  A x <= b  with free x, rewritten over nonnegative
// variables x = p - m plus one slack per row; rows with negative b are
// negated and receive an artificial variable for the phase-1 basis.
// ---------------------------------------------------------------------------

namespace {

constexpr double kPivotEps = 1e-11;
constexpr double kCostEps = 1e-10;

struct Tableau {
  Matrix t;                 // rows x (cols + 1), last column = rhs
  std::vector<Index> basis; // basic variable per row

  Index rows() const { return t.rows(); }
  Index cols() const { return t.cols() - 1; }

  void pivot(Index r, Index c) {
    t.row(r) /= t(r, c);
    for (Index i = 0; i < rows(); ++i) {
      if (i == r) continue;
      const double f = t(i, c);
      if (f != 0.0) t.row(i) -= f * t.row(r);
    }
    basis[static_cast<size_t>(r)] = c;
  }
};

enum class SimplexEnd { Optimal, Unbounded, IterationLimit };

// Minimizes cost over the tableau's feasible region. `allowed` masks
// columns that may enter (used to lock artificials out in phase 2).
SimplexEnd run_simplex(Tableau& tab, Vector& cost, const std::vector<bool>& allowed, long max_iters) {
  const Index m = tab.rows();
  const Index n = tab.cols();

  // Reduced-cost row, priced out against the current basis.
  Eigen::RowVectorXd red(n + 1);
  red.head(n) = cost.transpose();
  red(n) = 0.0;
  for (Index i = 0; i < m; ++i) {
    const Index bv = tab.basis[static_cast<size_t>(i)];
    if (cost(bv) != 0.0) red -= cost(bv) * tab.t.row(i);
  }

  for (long iter = 0; iter < max_iters; ++iter) {
    // Bland: lowest-index column with negative reduced cost.
    Index enter = -1;
    for (Index j = 0; j < n; ++j) {
      if (allowed[static_cast<size_t>(j)] && red(j) < -kCostEps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) {
      cost.conservativeResize(n + 1);
      cost(n) = -red(n);  // optimal objective value
      return SimplexEnd::Optimal;
    }

    Index leave = -1;
    double best_ratio = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double a = tab.t(i, enter);
      if (a > kPivotEps) {
        const double ratio = tab.t(i, n) / a;
        if (leave < 0 || ratio < best_ratio - kPivotEps ||
            (std::abs(ratio - best_ratio) <= kPivotEps &&
             tab.basis[static_cast<size_t>(i)] < tab.basis[static_cast<size_t>(leave)])) {
          leave = i;
          best_ratio = ratio;
        }
      }
    }
    if (leave < 0) return SimplexEnd::Unbounded;

    const double f = red(enter);
    tab.pivot(leave, enter);
    red -= f * tab.t.row(leave);
    red(enter) = 0.0;
  }
  return SimplexEnd::IterationLimit;
}

}  // namespace

LpOutcome lp_solve(const Vector& objective, const HPolytope& constraints) {
  const Index n = constraints.dim();
  const Index m = constraints.rows();
  if (objective.size() != n) throw Error("lp_solve: objective dimension mismatch");
  if (!is_finite(objective)) throw Error("lp_solve: non-finite objective");

  // Variables: p (n), m (n), slack (m), artificials (appended as needed).
  const Index base_cols = 2 * n + m;
  std::vector<Index> art_rows;
  for (Index i = 0; i < m; ++i)
    if (constraints.b_vector(i) < 0) art_rows.push_back(i);
  const Index total = base_cols + static_cast<Index>(art_rows.size());

  Tableau tab;
  tab.t = Matrix::Zero(m, total + 1);
  tab.basis.assign(static_cast<size_t>(m), -1);
  for (Index i = 0; i < m; ++i) {
    double sign = constraints.b_vector(i) < 0 ? -1.0 : 1.0;
    tab.t.block(i, 0, 1, n) = sign * constraints.a_matrix.row(i);
    tab.t.block(i, n, 1, n) = -sign * constraints.a_matrix.row(i);
    tab.t(i, 2 * n + i) = sign;  // slack
    tab.t(i, total) = sign * constraints.b_vector(i);
  }
  for (size_t k = 0; k < art_rows.size(); ++k) {
    tab.t(art_rows[k], base_cols + static_cast<Index>(k)) = 1.0;
    tab.basis[static_cast<size_t>(art_rows[k])] = base_cols + static_cast<Index>(k);
  }
  for (Index i = 0; i < m; ++i)
    if (tab.basis[static_cast<size_t>(i)] < 0) tab.basis[static_cast<size_t>(i)] = 2 * n + i;

  const long max_iters = 2000 + 200 * static_cast<long>(m + total);
  std::vector<bool> allowed(static_cast<size_t>(total), true);

  // Phase 1: drive artificials to zero.
  if (!art_rows.empty()) {
    Vector phase1 = Vector::Zero(total);
    for (Index j = base_cols; j < total; ++j) phase1(j) = 1.0;
    const SimplexEnd end = run_simplex(tab, phase1, allowed, max_iters);
    if (end == SimplexEnd::IterationLimit) return {LpStatus::IterationLimit, {}, {}};
    const double art_sum = phase1(total);
    if (art_sum > 1e-8) return {LpStatus::Infeasible, {}, {}};
    // Pivot residual artificials out of the basis where possible.
    for (Index i = 0; i < m; ++i) {
      if (tab.basis[static_cast<size_t>(i)] >= base_cols) {
        for (Index j = 0; j < base_cols; ++j) {
          if (std::abs(tab.t(i, j)) > 1e-7) {
            tab.pivot(i, j);
            break;
          }
        }
      }
    }
    for (Index j = base_cols; j < total; ++j) allowed[static_cast<size_t>(j)] = false;
  }

  // Phase 2.
  Vector cost = Vector::Zero(total);
  cost.head(n) = objective;
  cost.segment(n, n) = -objective;
  const SimplexEnd end = run_simplex(tab, cost, allowed, max_iters);
  if (end == SimplexEnd::IterationLimit) return {LpStatus::IterationLimit, {}, {}};
  if (end == SimplexEnd::Unbounded) return {LpStatus::Unbounded, {}, {}};

  Vector z = Vector::Zero(total);
  for (Index i = 0; i < m; ++i) {
    const Index bv = tab.basis[static_cast<size_t>(i)];
    if (bv >= 0 && bv < total) z(bv) = tab.t(i, tab.cols());
  }
  LpOutcome out;
  out.status = LpStatus::Optimal;
  out.point = z.head(n) - z.segment(n, n);
  out.value = objective.dot(*out.point);
  return out;
}

bool contains(const HPolytope& poly, const Vector& point, double tol) {
  if (point.size() != poly.dim()) throw Error("contains: dimension mismatch");
  return ((poly.a_matrix * point - poly.b_vector).array() <= tol).all();
}

// ---------------------------------------------------------------------------
// Convex hulls, 2-D (monotone chain) and 3-D (incremental).
// ---------------------------------------------------------------------------

namespace {

void check_hull_input(const std::vector<Vector>& points, Index& n, double& scale) {
  if (points.empty()) throw Error("convex_hull: empty input");
  n = points.front().size();
  if (n != 2 && n != 3)
    throw Error("convex_hull: only 2-D and 3-D supported; use the monotone-cell path for higher dimensions");
  scale = 1.0;
  for (const auto& p : points) {
    if (p.size() != n) throw Error("convex_hull: mixed dimensions");
    if (!is_finite(p)) throw Error("convex_hull: non-finite point");
    scale = std::max(scale, p.lpNorm<Eigen::Infinity>());
  }
  if (points.size() < static_cast<size_t>(n) + 1)
    throw Error("convex_hull: need at least n+1 points for a full-dimensional hull");
}

// Affine rank of the point set; reports the deficient dimension on failure.
void check_affine_rank(const std::vector<Vector>& points, Index n, double scale) {
  Matrix d(static_cast<Index>(points.size()) - 1, n);
  for (size_t i = 1; i < points.size(); ++i) d.row(static_cast<Index>(i) - 1) = (points[i] - points[0]).transpose();
  Eigen::JacobiSVD<Matrix> svd(d);
  svd.setThreshold(1e-10 / scale);
  const Index rank = svd.rank();
  if (rank < n)
    throw Error("convex_hull: affinely dependent input (affine dimension " + std::to_string(rank) +
                ", need " + std::to_string(n) + ")");
}

double cross2(const Vector& o, const Vector& a, const Vector& b) {
  return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
}

Vector cross3(const Vector& a, const Vector& b) {
  Vector c(3);
  c << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0);
  return c;
}

std::vector<Vector> hull_chain_2d(std::vector<Vector> pts, double scale) {
  std::sort(pts.begin(), pts.end(), [](const Vector& a, const Vector& b) {
    return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vector& a, const Vector& b) { return (a - b).norm() < 1e-12; }),
            pts.end());
  const double eps = 1e-12 * scale * scale;
  std::vector<Vector> h(2 * pts.size());
  size_t k = 0;
  for (const auto& p : pts) {  // lower chain
    while (k >= 2 && cross2(h[k - 2], h[k - 1], p) <= eps) --k;
    h[k++] = p;
  }
  for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {  // upper chain
    while (k >= t && cross2(h[k - 2], h[k - 1], pts[i]) <= eps) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);  // last point repeats the first
  return h;         // counterclockwise
}

struct Face {
  int a, b, c;
  Vector normal;  // unit outward
  double offset;
};

Face make_face(int a, int b, int c, const std::vector<Vector>& pts, const Vector& interior) {
  Vector n = cross3(pts[b] - pts[a], pts[c] - pts[a]);
  const double len = n.norm();
  if (len < 1e-18) throw Error("convex_hull: degenerate face");
  n /= len;
  double off = n.dot(pts[a]);
  if (n.dot(interior) > off) {  // orient outward
    n = -n;
    off = -off;
    std::swap(b, c);
  }
  return Face{a, b, c, n, off};
}

std::vector<Face> hull_incremental_3d(const std::vector<Vector>& pts, double scale) {
  const double eps = 1e-9 * scale;
  const int np = static_cast<int>(pts.size());

  // Seed tetrahedron: spread pair, then farthest from line, then from plane.
  int i0 = 0, i1 = 1;
  double best = -1;
  for (int i = 0; i < np; ++i)
    for (int j = i + 1; j < np; ++j) {
      const double d = (pts[i] - pts[j]).norm();
      if (d > best) {
        best = d;
        i0 = i;
        i1 = j;
      }
    }
  const Vector e0 = pts[i1] - pts[i0];
  int i2 = -1;
  best = eps;
  for (int i = 0; i < np; ++i) {
    const Vector r = pts[i] - pts[i0];
    const double d = cross3(e0, r).norm() / e0.norm();
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (i2 < 0) throw Error("convex_hull: affinely dependent input (affine dimension 1, need 3)");
  Vector plane_n = cross3(e0, pts[i2] - pts[i0]).normalized();
  int i3 = -1;
  best = eps;
  for (int i = 0; i < np; ++i) {
    const double d = std::abs(plane_n.dot(pts[i] - pts[i0]));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (i3 < 0) throw Error("convex_hull: affinely dependent input (affine dimension 2, need 3)");

  const Vector interior = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
  std::vector<Face> faces;
  faces.push_back(make_face(i0, i1, i2, pts, interior));
  faces.push_back(make_face(i0, i1, i3, pts, interior));
  faces.push_back(make_face(i0, i2, i3, pts, interior));
  faces.push_back(make_face(i1, i2, i3, pts, interior));

  for (int p = 0; p < np; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    std::vector<size_t> visible;
    for (size_t f = 0; f < faces.size(); ++f)
      if (faces[f].normal.dot(pts[p]) > faces[f].offset + eps) visible.push_back(f);
    if (visible.empty()) continue;

    // Horizon: directed edges of visible faces whose reverse is not visible.
    std::set<std::pair<int, int>> dir_edges;
    for (size_t f : visible) {
      const Face& fc = faces[f];
      dir_edges.insert({fc.a, fc.b});
      dir_edges.insert({fc.b, fc.c});
      dir_edges.insert({fc.c, fc.a});
    }
    std::vector<std::pair<int, int>> horizon;
    for (const auto& e : dir_edges)
      if (!dir_edges.count({e.second, e.first})) horizon.push_back(e);

    std::vector<Face> next;
    std::set<size_t> vis_set(visible.begin(), visible.end());
    for (size_t f = 0; f < faces.size(); ++f)
      if (!vis_set.count(f)) next.push_back(faces[f]);
    for (const auto& e : horizon) next.push_back(make_face(e.first, e.second, p, pts, interior));
    faces = std::move(next);
  }
  return faces;
}

HPolytope facets_to_polytope(const std::vector<std::pair<Vector, double>>& raw, Index n) {
  // Deduplicate coplanar facets on (unit normal, offset).
  std::vector<std::pair<Vector, double>> kept;
  for (const auto& f : raw) {
    bool dup = false;
    for (const auto& g : kept)
      if ((f.first - g.first).lpNorm<Eigen::Infinity>() < 1e-9 && std::abs(f.second - g.second) < 1e-9) {
        dup = true;
        break;
      }
    if (!dup) kept.push_back(f);
  }
  Matrix a(static_cast<Index>(kept.size()), n);
  Vector b(static_cast<Index>(kept.size()));
  for (size_t i = 0; i < kept.size(); ++i) {
    a.row(static_cast<Index>(i)) = kept[i].first.transpose();
    b(static_cast<Index>(i)) = kept[i].second;
  }
  return HPolytope(a, b);
}

}  // namespace

HPolytope convex_hull(const std::vector<Vector>& points) {
  Index n;
  double scale;
  check_hull_input(points, n, scale);
  check_affine_rank(points, n, scale);

  std::vector<std::pair<Vector, double>> raw;
  if (n == 2) {
    const auto chain = hull_chain_2d(points, scale);
    if (chain.size() < 3)
      throw Error("convex_hull: affinely dependent input (affine dimension 1, need 2)");
    for (size_t i = 0; i < chain.size(); ++i) {
      const Vector& p = chain[i];
      const Vector& q = chain[(i + 1) % chain.size()];
      Vector normal(2);
      normal << (q(1) - p(1)), -(q(0) - p(0));
      normal.normalize();
      raw.push_back({normal, normal.dot(p)});
    }
  } else {
    for (const auto& f : hull_incremental_3d(points, scale)) raw.push_back({f.normal, f.offset});
  }
  return facets_to_polytope(raw, n);
}

VPolytope convex_hull_vertices(const std::vector<Vector>& points) {
  Index n;
  double scale;
  check_hull_input(points, n, scale);
  check_affine_rank(points, n, scale);

  if (n == 2) {
    const auto chain = hull_chain_2d(points, scale);
    Matrix v(static_cast<Index>(chain.size()), 2);
    for (size_t i = 0; i < chain.size(); ++i) v.row(static_cast<Index>(i)) = chain[i].transpose();
    return VPolytope(v);
  }
  const auto faces = hull_incremental_3d(points, scale);
  std::set<int> used;
  for (const auto& f : faces) {
    used.insert(f.a);
    used.insert(f.b);
    used.insert(f.c);
  }
  Matrix v(static_cast<Index>(used.size()), 3);
  Index r = 0;
  for (int idx : used) v.row(r++) = points[static_cast<size_t>(idx)].transpose();
  return VPolytope(v);
}

std::vector<Vector> box_vertices(const Box& box, bool dedup) {
  const Index n = box.dim();
  if (n > 12) throw Error("box_vertices: dimension over cap (12)");
  std::vector<Vector> out;
  out.reserve(static_cast<size_t>(1) << n);
  for (long mask = 0; mask < (1L << n); ++mask) {
    Vector v(n);
    for (Index j = 0; j < n; ++j) v(j) = (mask >> j) & 1 ? box.upper(j) : box.lower(j);
    if (dedup) {
      bool seen = false;
      for (const auto& u : out)
        if ((u - v).lpNorm<Eigen::Infinity>() <= tolerances().dedup) {
          seen = true;
          break;
        }
      if (seen) continue;
    }
    out.push_back(std::move(v));
  }
  return out;
}

double support_value(const HPolytope& poly, const Vector& direction) {
  if (direction.size() != poly.dim()) throw Error("support_value: dimension mismatch");
  const LpOutcome out = lp_solve(-direction, poly);
  switch (out.status) {
    case LpStatus::Optimal:
      return -*out.value;
    case LpStatus::Unbounded:
      throw Error("support_value: polytope unbounded in the given direction");
    case LpStatus::Infeasible:
      throw Error("support_value: empty polytope");
    default:
      throw Error("support_value: LP iteration limit");
  }
}

std::vector<Vector> polytope_vertices_lowdim(const HPolytope& poly) {
  const Index n = poly.dim();
  const double tol = tolerances().feasibility;

  if (n == 1) {
    double lo = -kInf, hi = kInf;
    for (Index i = 0; i < poly.rows(); ++i) {
      const double a = poly.a_matrix(i, 0), b = poly.b_vector(i);
      if (std::abs(a) < 1e-15) {
        if (b < -tol) return {};
        continue;
      }
      if (a > 0)
        hi = std::min(hi, b / a);
      else
        lo = std::max(lo, b / a);
    }
    if (lo > hi + tol || !std::isfinite(lo) || !std::isfinite(hi)) {
      if (lo > hi + tol) return {};
      throw Error("polytope_vertices_lowdim: unbounded 1-D polytope");
    }
    Vector vl(1), vh(1);
    vl << lo;
    vh << hi;
    if (hi - lo <= tolerances().dedup) return {vl};
    return {vl, vh};
  }

  if (n != 2) throw Error("polytope_vertices_lowdim: only 1-D and 2-D supported");

  std::vector<Vector> cand;
  for (Index i = 0; i < poly.rows(); ++i) {
    for (Index j = i + 1; j < poly.rows(); ++j) {
      Eigen::Matrix2d m;
      m << poly.a_matrix(i, 0), poly.a_matrix(i, 1), poly.a_matrix(j, 0), poly.a_matrix(j, 1);
      const double det = m.determinant();
      if (std::abs(det) < 1e-13) continue;
      Eigen::Vector2d rhs(poly.b_vector(i), poly.b_vector(j));
      Vector v = m.inverse() * rhs;
      const double scale = 1.0 + v.lpNorm<Eigen::Infinity>();
      if (!contains(poly, v, tol * scale)) continue;
      bool dup = false;
      for (const auto& u : cand)
        if ((u - v).lpNorm<Eigen::Infinity>() < 1e-10 * scale) {
          dup = true;
          break;
        }
      if (!dup) cand.push_back(std::move(v));
    }
  }
  if (cand.size() < 3) return cand;
  Vector centroid = Vector::Zero(2);
  for (const auto& v : cand) centroid += v;
  centroid /= static_cast<double>(cand.size());
  std::sort(cand.begin(), cand.end(), [&](const Vector& a, const Vector& b) {
    return std::atan2(a(1) - centroid(1), a(0) - centroid(0)) <
           std::atan2(b(1) - centroid(1), b(0) - centroid(0));
  });
  return cand;
}

}  // namespace agc
