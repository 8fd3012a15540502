#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "agc/geometry.hpp"
#include "agc/types.hpp"

namespace agc {

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int count = 2;  // inclusive of both bounds
};

/// Rectangular sampling grid over assumption-bound axes (magnitudes, so
/// lower bounds are nonnegative). Points are enumerated row-major with the
/// first axis slowest.
struct GridSpec {
  std::vector<GridAxis> axes;

  explicit GridSpec(std::vector<GridAxis> ax);
  Index dim() const { return static_cast<Index>(axes.size()); }
  long total_points() const;
  long total_cells() const;
  Vector point(long index) const;
  double coordinate(Index axis, int tick) const;
};

/// Sampled gain values on a grid. +inf evaluations (no invariant set) are
/// recorded as holes; all finite samples lie below the crop constant.
struct GainSampleSet {
  GridSpec grid;
  Vector values;            // row-major, holes hold +inf
  std::vector<long> holes;  // indices of +inf samples
  double crop = 0.0;        // M
};

/// Evaluates the gain at every grid point in deterministic row-major
/// order. The crop constant defaults to twice the largest finite sample.
GainSampleSet sample_gain(const std::function<double(const Vector&)>& evaluator, const GridSpec& grid,
                          std::optional<double> crop_override = std::nullopt);

enum class EpiKind { ConvexHull, MonotoneCells };

/// Cropped inner approximation of an epigraph in (input, output) space.
struct EpigraphApprox {
  EpiKind kind = EpiKind::MonotoneCells;
  PolytopeUnion body;  // ConvexHull kind has exactly one piece
  double crop = 0.0;
  Box domain;  // input-space sampling region

  EpigraphApprox(EpiKind k, PolytopeUnion b, double m, Box dom);
};

/// Convex hull of the lifted samples plus their crop lifts. Sound inner
/// approximation when the sampled function is convex (caller-asserted).
EpigraphApprox hull_inner_approx(const GainSampleSet& samples);

/// Upper-corner cell decomposition for monotonically nondecreasing gains:
/// each grid cell contributes cell x [f(upper corner), M]. Monotonicity is
/// checked on the samples and violations are rejected with a witness pair.
EpigraphApprox monotone_cells_approx(const GainSampleSet& samples, double mono_tol = 1e-9);

struct Membership {
  bool satisfiable = false;
  int piece = -1;       // selected piece (binary assignment), -1 for hull kind
  double slack = kInf;  // most binding row margin of the selected piece, <= 0 inside
};

/// Point membership in the approximation; union pieces are tried in index
/// order so boundary ties resolve to the lowest index.
Membership membership_constraint(const EpigraphApprox& approx, const Vector& point);

}  // namespace agc
