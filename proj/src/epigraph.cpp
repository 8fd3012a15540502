#include "agc/epigraph.hpp"

#include <algorithm>
#include <cmath>

namespace agc {

GridSpec::GridSpec(std::vector<GridAxis> ax) : axes(std::move(ax)) {
  if (axes.empty()) throw Error("GridSpec: need at least one axis");
  for (const auto& a : axes) {
    if (a.count < 2) throw Error("GridSpec: axis count must be >= 2");
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi)) throw Error("GridSpec: non-finite bound");
    if (a.lo < 0.0) throw Error("GridSpec: assumption bounds are magnitudes, lower must be >= 0");
    if (!(a.hi > a.lo)) throw Error("GridSpec: upper bound must exceed lower");
  }
}

long GridSpec::total_points() const {
  long n = 1;
  for (const auto& a : axes) n *= a.count;
  return n;
}

long GridSpec::total_cells() const {
  long n = 1;
  for (const auto& a : axes) n *= a.count - 1;
  return n;
}

double GridSpec::coordinate(Index axis, int tick) const {
  const GridAxis& a = axes[static_cast<size_t>(axis)];
  if (tick == a.count - 1) return a.hi;  // hit the bound exactly
  return a.lo + (a.hi - a.lo) * static_cast<double>(tick) / static_cast<double>(a.count - 1);
}

Vector GridSpec::point(long index) const {
  Vector x(dim());
  for (Index axis = dim() - 1; axis >= 0; --axis) {
    const int count = axes[static_cast<size_t>(axis)].count;
    x(axis) = coordinate(axis, static_cast<int>(index % count));
    index /= count;
  }
  return x;
}

GainSampleSet sample_gain(const std::function<double(const Vector&)>& evaluator, const GridSpec& grid,
                          std::optional<double> crop_override) {
  if (!evaluator) throw Error("sample_gain: no evaluator");
  GainSampleSet out{grid, Vector(grid.total_points()), {}, 0.0};
  double max_finite = -kInf;
  for (long i = 0; i < grid.total_points(); ++i) {
    const double v = evaluator(grid.point(i));
    if (std::isnan(v) || v < 0.0) throw Error("sample_gain: evaluator must return a nonnegative value or +inf");
    out.values(i) = v;
    if (std::isinf(v))
      out.holes.push_back(i);
    else
      max_finite = std::max(max_finite, v);
  }
  if (out.holes.size() == static_cast<size_t>(grid.total_points()))
    throw Error("sample_gain: no finite samples on the grid");
  out.crop = crop_override ? *crop_override : 2.0 * std::max(max_finite, 1e-12);
  if (out.crop <= max_finite)
    throw Error("sample_gain: crop constant must exceed every finite sample");
  return out;
}

EpigraphApprox::EpigraphApprox(EpiKind k, PolytopeUnion b, double m, Box dom)
    : kind(k), body(std::move(b)), crop(m), domain(std::move(dom)) {
  if (body.dim() != domain.dim() + 1)
    throw Error("EpigraphApprox: body must live in (input, output) space");
}

namespace {

Box grid_domain(const GridSpec& grid) {
  Vector lo(grid.dim()), hi(grid.dim());
  for (Index i = 0; i < grid.dim(); ++i) {
    lo(i) = grid.axes[static_cast<size_t>(i)].lo;
    hi(i) = grid.axes[static_cast<size_t>(i)].hi;
  }
  return Box(lo, hi);
}

}  // namespace

EpigraphApprox hull_inner_approx(const GainSampleSet& samples) {
  if (!samples.holes.empty())
    throw Error("hull_inner_approx: sample set has holes; hull path needs a total gain");
  const Index d = samples.grid.dim();
  if (d + 1 > 3)
    throw Error("hull_inner_approx: lifted dimension over 3; use the monotone-cell path");

  std::vector<Vector> lifted;
  lifted.reserve(2 * static_cast<size_t>(samples.grid.total_points()));
  for (long i = 0; i < samples.grid.total_points(); ++i) {
    const Vector x = samples.grid.point(i);
    Vector p(d + 1), q(d + 1);
    p.head(d) = x;
    p(d) = samples.values(i);
    q.head(d) = x;
    q(d) = samples.crop;
    lifted.push_back(std::move(p));
    lifted.push_back(std::move(q));
  }
  HPolytope hull = convex_hull(lifted);
  return EpigraphApprox(EpiKind::ConvexHull, PolytopeUnion({std::move(hull)}), samples.crop,
                        grid_domain(samples.grid));
}

EpigraphApprox monotone_cells_approx(const GainSampleSet& samples, double mono_tol) {
  const GridSpec& grid = samples.grid;
  const Index d = grid.dim();

  // Adjacent-sample monotonicity along every axis; a decrease (including
  // finite-after-hole) disproves the caller's monotonicity assertion.
  {
    long stride = 1;
    std::vector<long> strides(static_cast<size_t>(d));
    for (Index axis = d - 1; axis >= 0; --axis) {
      strides[static_cast<size_t>(axis)] = stride;
      stride *= grid.axes[static_cast<size_t>(axis)].count;
    }
    for (long i = 0; i < grid.total_points(); ++i) {
      long rem = i;
      for (Index axis = 0; axis < d; ++axis) {
        const int count = grid.axes[static_cast<size_t>(axis)].count;
        const long ax_stride = strides[static_cast<size_t>(axis)];
        const int tick = static_cast<int>((rem / ax_stride) % count);
        if (tick + 1 < count) {
          const double lo_v = samples.values(i);
          const double hi_v = samples.values(i + ax_stride);
          if (hi_v < lo_v - mono_tol) {
            throw Error("monotone_cells_approx: monotonicity violated between grid points " +
                        std::to_string(i) + " and " + std::to_string(i + ax_stride) + " (values " +
                        std::to_string(lo_v) + " -> " + std::to_string(hi_v) + ")");
          }
        }
      }
      (void)rem;
    }
  }

  // One piece per cell with a finite upper-corner value:
  //   cell x [f(upper corner), crop]
  // Monotone f stays below its upper-corner value on the cell, so the
  // piece is inside the epigraph.
  std::vector<HPolytope> pieces;
  std::vector<int> cell_idx(static_cast<size_t>(d), 0);
  while (true) {
    long upper_index = 0;
    for (Index axis = 0; axis < d; ++axis)
      upper_index = upper_index * grid.axes[static_cast<size_t>(axis)].count +
                    (cell_idx[static_cast<size_t>(axis)] + 1);
    const double v = samples.values(upper_index);
    if (std::isfinite(v)) {
      Matrix a = Matrix::Zero(2 * d + 2, d + 1);
      Vector b(2 * d + 2);
      for (Index axis = 0; axis < d; ++axis) {
        const double lo = grid.coordinate(axis, cell_idx[static_cast<size_t>(axis)]);
        const double hi = grid.coordinate(axis, cell_idx[static_cast<size_t>(axis)] + 1);
        a(2 * axis, axis) = 1.0;
        b(2 * axis) = hi;
        a(2 * axis + 1, axis) = -1.0;
        b(2 * axis + 1) = -lo;
      }
      a(2 * d, d) = 1.0;
      b(2 * d) = samples.crop;
      a(2 * d + 1, d) = -1.0;
      b(2 * d + 1) = -v;
      pieces.emplace_back(std::move(a), std::move(b));
    }
    Index axis = d - 1;
    for (; axis >= 0; --axis) {
      if (++cell_idx[static_cast<size_t>(axis)] < grid.axes[static_cast<size_t>(axis)].count - 1) break;
      cell_idx[static_cast<size_t>(axis)] = 0;
    }
    if (axis < 0) break;
  }
  if (pieces.empty())
    throw Error("monotone_cells_approx: every cell's upper corner is a hole");
  return EpigraphApprox(EpiKind::MonotoneCells, PolytopeUnion(std::move(pieces)), samples.crop,
                        grid_domain(grid));
}

Membership membership_constraint(const EpigraphApprox& approx, const Vector& point) {
  if (point.size() != approx.body.dim()) throw Error("membership_constraint: dimension mismatch");
  Membership m;
  for (size_t j = 0; j < approx.body.pieces.size(); ++j) {
    const HPolytope& piece = approx.body.pieces[j];
    const double worst = (piece.a_matrix * point - piece.b_vector).maxCoeff();
    if (worst <= tolerances().feasibility) {
      m.satisfiable = true;
      m.piece = approx.kind == EpiKind::ConvexHull ? -1 : static_cast<int>(j);
      m.slack = worst;
      return m;
    }
  }
  return m;
}

}  // namespace agc
