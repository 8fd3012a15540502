#pragma once

#include <vector>

#include "agc/geometry.hpp"
#include "agc/network.hpp"
#include "agc/types.hpp"

namespace agc {

/// Fixed facet-normal template P with initial offsets q0. {x : P x <= q0}
/// must be bounded with the origin strictly inside.
struct RciTemplate {
  Matrix facets;   // L x n
  Vector q0;       // L, positive

  RciTemplate(Matrix p, Vector q);
};

/// One robust-invariance instance: an affine subsystem, admissible input
/// and disturbance boxes, and a bound magnitude per stacked neighbor
/// output coordinate (|y_N| <= neighbor_bound componentwise).
struct RciProblem {
  Subsystem subsystem;
  Box input_set;
  Box disturbance_set;
  Vector neighbor_bound;
};

enum class RciStatus { Invariant, Empty, NotConverged };

struct RciResult {
  HPolytope set;
  Vector q;
  RciStatus status = RciStatus::NotConverged;
  int iterations = 0;
  double final_change = 0.0;
  Vector facet_margins;  // q_k minus worst-case best-response reach per facet
};

struct RciOptions {
  int max_iters = 50000;
  double tol = 1e-9;            // convergence of the offset iteration
  double collapse_tol = 1e-12;  // repair mode: offsets below this report Empty;
                                // tight mode: offsets are floored here instead
  bool tighten = false;         // shrink to the reachable fixed point (gain evaluation)
  bool accelerate = true;       // geometric extrapolation of slow facet sequences
};

/// Template-offset iteration. In the default mode only violated facets are
/// pulled in, so an already-invariant q0 is returned unchanged; with
/// opts.tighten the offsets are additionally shrunk onto the worst-case
/// reachable bound, giving the tightest template set the iteration can
/// certify (used for gain evaluation). Every Invariant result has passed an
/// exact joint-input feasibility check at the set's vertices.
RciResult compute_rci(const RciProblem& prob, const RciTemplate& tmpl, const RciOptions& opts = {});

struct RciFailure {
  Vector state, disturbance, coupling;
  double margin;
};

struct RciVerification {
  double pass_fraction = 0.0;
  double worst_margin = -kInf;  // most positive infeasibility margin seen
  long checks = 0;
  std::vector<RciFailure> failures;  // capped sample of failing points
};

/// Independent check of the invariance condition: for sampled states in S
/// and every vertex of the disturbance/coupling boxes, an LP searches for
/// an admissible input keeping the successor in S.
RciVerification verify_rci(const HPolytope& s, const RciProblem& prob, int grid_density);

/// max over S of |h . x|, via two support LPs.
double output_bound(const HPolytope& s, const Vector& h_row);

/// Default options for gain evaluation (tighten on).
RciOptions tight_options();

/// Tangent-facet template around the Lyapunov ellipse of a stable 2-state
/// map, rescaled so the template's second-coordinate extent equals the
/// given cap. Every facet normal mixes both states, which keeps each facet
/// responsive to inputs entering through the second state.
RciTemplate lyapunov_ellipse_template(const Matrix& a, const Vector& axis_extents, int facet_count);

/// Gain-function sample: tight RCI at the given neighbor bound, then the
/// output bound of the resulting set. +inf when no invariant set is found.
double gain_evaluate(const RciProblem& base, const RciTemplate& tmpl, const Vector& neighbor_bound,
                     RciOptions opts = tight_options());

}  // namespace agc
