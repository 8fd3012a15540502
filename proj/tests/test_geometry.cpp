#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "agc/geometry.hpp"

using namespace agc;

namespace {

Vector vec2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

Vector vec3(double x, double y, double z) {
  Vector v(3);
  v << x, y, z;
  return v;
}

Vector cross3d(const Vector& a, const Vector& b) {
  Vector c(3);
  c << a(1) * b(2) - a(2) * b(1), a(2) * b(0) - a(0) * b(2), a(0) * b(1) - a(1) * b(0);
  return c;
}

HPolytope unit_box(Index n) { return Box::centered(Vector::Constant(n, 1.0)).as_polytope(); }

}  // namespace

TEST_CASE("lp_solve: box minimum") {
  // min x s.t. 0 <= x <= 1
  Matrix a(2, 1);
  a << 1, -1;
  Vector b(2);
  b << 1, 0;
  const auto out = lp_solve(Vector::Ones(1), HPolytope(a, b));
  REQUIRE(out.status == LpStatus::Optimal);
  CHECK((*out.point)(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(*out.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("lp_solve: contradictory bounds are infeasible") {
  // x <= 0 and x >= 1
  Matrix a(2, 1);
  a << 1, -1;
  Vector b(2);
  b << 0, -1;
  CHECK(lp_solve(Vector::Ones(1), HPolytope(a, b)).status == LpStatus::Infeasible);
}

TEST_CASE("lp_solve: corner of the feasible orthant") {
  // min x + y s.t. x >= 0.3, y >= 0.4 -> 0.7 at (0.3, 0.4)
  Matrix a(2, 2);
  a << -1, 0, 0, -1;
  Vector b(2);
  b << -0.3, -0.4;
  const auto out = lp_solve(Vector::Ones(2), HPolytope(a, b));
  REQUIRE(out.status == LpStatus::Optimal);
  CHECK(*out.value == doctest::Approx(0.7).epsilon(1e-12));
  CHECK((*out.point)(0) == doctest::Approx(0.3));
  CHECK((*out.point)(1) == doctest::Approx(0.4));
}

TEST_CASE("lp_solve: unbounded direction reported") {
  // min x s.t. x <= 1 (no lower bound)
  Matrix a(1, 1);
  a << 1;
  Vector b(1);
  b << 1;
  CHECK(lp_solve(Vector::Ones(1), HPolytope(a, b)).status == LpStatus::Unbounded);
}

TEST_CASE("lp_solve: dimension mismatch rejected") {
  CHECK_THROWS_AS(lp_solve(Vector::Ones(2), unit_box(1)), Error);
}

TEST_CASE("lp_solve: optimal points satisfy constraints and beat sampled feasible points") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + static_cast<Index>(rng() % 3);
    // Random box plus random cutting rows keeps the problem bounded.
    Vector half(n);
    for (Index i = 0; i < n; ++i) half(i) = 0.5 + std::abs(coef(rng));
    const Box box(-half, half);
    const Index extra = static_cast<Index>(rng() % 3);
    Matrix a(2 * n + extra, n);
    Vector b(2 * n + extra);
    const HPolytope bp = box.as_polytope();
    a.topRows(2 * n) = bp.a_matrix;
    b.head(2 * n) = bp.b_vector;
    for (Index r = 0; r < extra; ++r) {
      for (Index c = 0; c < n; ++c) a(2 * n + r, c) = coef(rng);
      b(2 * n + r) = 0.5 + std::abs(coef(rng));
    }
    const HPolytope poly(a, b);
    Vector obj(n);
    for (Index i = 0; i < n; ++i) obj(i) = coef(rng);

    const auto out = lp_solve(obj, poly);
    REQUIRE(out.status == LpStatus::Optimal);
    CHECK(contains(poly, *out.point, 1e-9));
    CHECK(obj.dot(*out.point) == doctest::Approx(*out.value).epsilon(1e-9));
    // No feasible box vertex does better.
    for (const auto& v : box_vertices(box))
      if (contains(poly, v, 1e-12)) CHECK(obj.dot(v) >= *out.value - 1e-9);
  }
}

TEST_CASE("contains: unit box") {
  const auto box = unit_box(2);
  CHECK(contains(box, vec2(0, 0), 1e-9));
  CHECK_FALSE(contains(box, vec2(1.5, 0.5), 1e-9));
}

TEST_CASE("contains: boundary tolerance") {
  Matrix a(1, 1);
  a << 1;
  Vector b(1);
  b << 1;
  const HPolytope poly(a, b);
  const double tol = 1e-6;
  CHECK(contains(poly, Vector::Constant(1, 1.0 + tol / 2), tol));
  CHECK_FALSE(contains(poly, Vector::Constant(1, 1.0 + 2 * tol), tol));
}

TEST_CASE("convex_hull: triangle") {
  const auto hull = convex_hull({vec2(0, 0), vec2(1, 0), vec2(0, 1)});
  CHECK(hull.rows() == 3);
  for (const auto& p : {vec2(0, 0), vec2(1, 0), vec2(0, 1)}) CHECK(contains(hull, p, 1e-9));
}

TEST_CASE("convex_hull: interior point eliminated") {
  const auto hull =
      convex_hull({vec2(0, 0), vec2(1, 0), vec2(1, 1), vec2(0, 1), vec2(0.5, 0.5)});
  CHECK(hull.rows() == 4);
  // Strictly inside: every row has slack.
  CHECK(((hull.a_matrix * vec2(0.5, 0.5) - hull.b_vector).array() < -1e-3).all());
}

TEST_CASE("convex_hull: unit cube has six facets") {
  std::vector<Vector> corners;
  for (int m = 0; m < 8; ++m) corners.push_back(vec3(m & 1, (m >> 1) & 1, (m >> 2) & 1));

  // Brute-force facet oracle: planes through point triples supporting all
  // eight corners.
  std::vector<std::pair<Vector, double>> oracle;
  for (size_t i = 0; i < corners.size(); ++i)
    for (size_t j = i + 1; j < corners.size(); ++j)
      for (size_t k = j + 1; k < corners.size(); ++k) {
        Vector n = cross3d(corners[j] - corners[i], corners[k] - corners[i]);
        if (n.norm() < 1e-12) continue;
        n.normalize();
        const double off = n.dot(corners[i]);
        bool all_below = true, all_above = true;
        for (const auto& p : corners) {
          const double s = n.dot(p) - off;
          all_below &= s <= 1e-12;
          all_above &= s >= -1e-12;
        }
        if (!all_below && !all_above) continue;
        const Vector nn = all_below ? n : Vector(-n);
        const double noff = all_below ? off : -off;
        bool dup = false;
        for (const auto& f : oracle)
          dup |= (f.first - nn).norm() < 1e-9 && std::abs(f.second - noff) < 1e-9;
        if (!dup) oracle.push_back({nn, noff});
      }
  REQUIRE(oracle.size() == 6);

  const auto hull = convex_hull(corners);
  CHECK(hull.rows() == 6);
  for (const auto& p : corners) CHECK(contains(hull, p, 1e-9));
  // Each oracle facet appears among the hull rows.
  for (const auto& f : oracle) {
    bool found = false;
    for (Index r = 0; r < hull.rows(); ++r)
      found |= (hull.a_matrix.row(r).transpose() - f.first).norm() < 1e-9 &&
               std::abs(hull.b_vector(r) - f.second) < 1e-9;
    CHECK(found);
  }
}

TEST_CASE("convex_hull: collinear input rejected with deficient dimension") {
  CHECK_THROWS_WITH_AS(convex_hull({vec2(0, 0), vec2(1, 1), vec2(2, 2)}),
                       doctest::Contains("affine dimension 1"), Error);
  CHECK_THROWS_WITH_AS(convex_hull({vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 1, 0), vec3(1, 1, 0)}),
                       doctest::Contains("affine dimension 2"), Error);
}

TEST_CASE("convex_hull: soundness and facet minimality on random 2-D instances") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vector> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(vec2(unit(rng), unit(rng)));
    HPolytope hull(Matrix(1, 2), Vector(1));
    try {
      hull = convex_hull(pts);
    } catch (const Error&) {
      continue;  // degenerate draw
    }
    for (const auto& p : pts) CHECK(contains(hull, p, 1e-9));
    // Every facet is touched by some input point.
    for (Index r = 0; r < hull.rows(); ++r) {
      double best = -kInf;
      for (const auto& p : pts) best = std::max(best, hull.a_matrix.row(r).dot(p) - hull.b_vector(r));
      CHECK(best > -1e-9);
    }
    // Minimality: pushing an edge midpoint outward through its facet leaves
    // every other facet satisfied, so no facet is redundant.
    const auto chain = convex_hull_vertices(pts).vertices;
    for (Index i = 0; i < chain.rows(); ++i) {
      const Vector mid = 0.5 * (chain.row(i) + chain.row((i + 1) % chain.rows())).transpose();
      Index facet = -1;
      for (Index r = 0; r < hull.rows(); ++r)
        if (std::abs(hull.a_matrix.row(r).dot(mid) - hull.b_vector(r)) < 1e-9) facet = r;
      REQUIRE(facet >= 0);
      const Vector witness = mid + 1e-4 * hull.a_matrix.row(facet).transpose();
      CHECK_FALSE(contains(hull, witness, 1e-12));
      int violated = 0;
      for (Index r = 0; r < hull.rows(); ++r)
        violated += hull.a_matrix.row(r).dot(witness) > hull.b_vector(r) + 1e-12;
      CHECK(violated == 1);
    }
  }
}

TEST_CASE("box_vertices: scalar and rectangle") {
  const auto v1 = box_vertices(Box::scalar(0, 1));
  REQUIRE(v1.size() == 2);
  CHECK(v1[0](0) == 0.0);
  CHECK(v1[1](0) == 1.0);

  const Box rect(vec2(0, -1), vec2(1, 1));
  CHECK(box_vertices(rect).size() == 4);
}

TEST_CASE("box_vertices: degenerate box deduplicates") {
  const Box degenerate(vec2(0.5, 0.5), vec2(0.5, 0.5));
  CHECK(box_vertices(degenerate).size() == 4);
  CHECK(box_vertices(degenerate, true).size() == 1);
}

TEST_CASE("box_vertices: dimension cap") {
  CHECK_THROWS_AS(box_vertices(Box::centered(Vector::Ones(13))), Error);
}

TEST_CASE("support_value: unit square") {
  const auto box = unit_box(2);  // [-1,1]^2; shift for the spec's [0,1]^2 examples
  const Box square01(vec2(0, 0), vec2(1, 1));
  CHECK(support_value(square01.as_polytope(), vec2(1, 0)) == doctest::Approx(1.0));
  CHECK(support_value(square01.as_polytope(), vec2(1, 1)) == doctest::Approx(2.0));
  CHECK(support_value(box, vec2(1, 0)) == doctest::Approx(1.0));
}

TEST_CASE("support_value: triangle vertex max") {
  const auto hull = convex_hull({vec2(0, 0), vec2(2, 0), vec2(0, 1)});
  CHECK(support_value(hull, vec2(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("support_value: coordinate supports bracket sampled members") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Vector> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(vec2(unit(rng), 0.5 * unit(rng)));
  const auto hull = convex_hull(pts);
  for (Index k = 0; k < 2; ++k) {
    Vector e = Vector::Zero(2);
    e(k) = 1.0;
    const double hi = support_value(hull, e);
    const double lo = -support_value(hull, -e);
    for (const auto& p : pts) {
      CHECK(p(k) <= hi + 1e-9);
      CHECK(p(k) >= lo - 1e-9);
    }
  }
}

TEST_CASE("contains(convex_hull(S), p) for every p in S") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector> pts;
    for (int i = 0; i < 15; ++i) pts.push_back(vec3(unit(rng), unit(rng), unit(rng)));
    const auto hull = convex_hull(pts);
    for (const auto& p : pts) CHECK(contains(hull, p, 1e-9));
  }
}

TEST_CASE("polytope_vertices_lowdim: interval and polygon") {
  const auto iv = polytope_vertices_lowdim(Box::scalar(-2, 3).as_polytope());
  REQUIRE(iv.size() == 2);
  CHECK(iv[0](0) == doctest::Approx(-2));
  CHECK(iv[1](0) == doctest::Approx(3));

  const auto poly = unit_box(2);
  const auto verts = polytope_vertices_lowdim(poly);
  CHECK(verts.size() == 4);
  for (const auto& v : verts) CHECK(contains(poly, v, 1e-9));
}
