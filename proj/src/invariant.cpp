#include "agc/invariant.hpp"

#include <algorithm>
#include <cmath>

namespace agc {

RciTemplate::RciTemplate(Matrix p, Vector q) : facets(std::move(p)), q0(std::move(q)) {
  if (facets.rows() != q0.size()) throw Error("RciTemplate: row count mismatch");
  if (facets.rows() < 1) throw Error("RciTemplate: need at least one facet");
  if ((q0.array() <= 0).any()) throw Error("RciTemplate: origin must be strictly inside (q0 > 0)");
  if (!is_finite(facets) || !is_finite(q0)) throw Error("RciTemplate: non-finite entry");
  // Boundedness: every coordinate direction must have finite support.
  const HPolytope poly(facets, q0);
  for (Index i = 0; i < facets.cols(); ++i) {
    Vector e = Vector::Zero(facets.cols());
    e(i) = 1.0;
    support_value(poly, e);   // throws when unbounded
    support_value(poly, -e);
  }
}

RciOptions tight_options() {
  RciOptions opts;
  opts.tighten = true;
  return opts;
}

RciTemplate lyapunov_ellipse_template(const Matrix& a, const Vector& axis_extents, int facet_count) {
  if (a.rows() != 2 || a.cols() != 2) throw Error("lyapunov_ellipse_template: 2-state map expected");
  if (facet_count < 6) throw Error("lyapunov_ellipse_template: need at least 6 facets");
  if (axis_extents.size() != 2 || !(axis_extents.minCoeff() > 0.0))
    throw Error("lyapunov_ellipse_template: extents must be positive");

  // Ellipse {x' P x <= 1} parameterized through its inverse
  //   P^-1 = [[e1^2, r e1 e2], [r e1 e2, e2^2]],
  // so the axis extents are e1, e2 and r is the state correlation. The
  // contraction factor of the map on the ellipse family is the largest
  // generalized eigenvalue of (A' P A, P).
  const double e2 = axis_extents(1);
  auto contraction = [&](double e1, double r) {
    Matrix m(2, 2);
    m << e1 * e1, r * e1 * e2, r * e1 * e2, e2 * e2;
    const Matrix g = m * (a.transpose() * m.inverse() * a);
    const auto eigs = Eigen::EigenSolver<Matrix>(g).eigenvalues();
    return std::max(std::abs(eigs(0)), std::abs(eigs(1)));
  };

  // Tangent facets overshoot the ellipse by about (pi/m)^2 / 2; demand
  // comparable contraction margin so the facet iteration has room.
  const double margin =
      std::max(0.5 * (M_PI / facet_count) * (M_PI / facet_count), 5e-4);
  double e1 = axis_extents(0);
  double best_r = 0.0;
  bool found = false;
  for (int shrink = 0; shrink < 60 && !found; ++shrink) {
    double best = kInf;
    for (double r = -0.95; r <= 0.95 + 1e-12; r += 0.01) {
      const double lam = contraction(e1, r);
      if (lam < best) {
        best = lam;
        best_r = r;
      }
    }
    if (best <= 1.0 - margin)
      found = true;
    else
      e1 *= 0.85;  // requested angle extent too wide for invariance
  }
  if (!found)
    throw Error("lyapunov_ellipse_template: map admits no contracting ellipse at the given extents");

  Matrix m(2, 2);
  m << e1 * e1, best_r * e1 * e2, best_r * e1 * e2, e2 * e2;
  const Matrix p = m.inverse();
  const Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw Error("lyapunov_ellipse_template: ellipse parameterization failed");
  const Matrix half = llt.matrixL();

  // Tangents along evenly spread rays, then an exact rescale of the
  // offsets so the polytope's second-axis extent equals the cap.
  Matrix facets(facet_count, 2);
  Vector q(facet_count);
  for (int k = 0; k < facet_count; ++k) {
    const double phi = 2.0 * M_PI * (k + 0.5) / facet_count;
    Vector u(2);
    u << std::cos(phi), std::sin(phi);
    const Vector x = half * u;  // boundary point of the ellipse
    Vector normal = p * x;
    facets.row(k) = normal.transpose() / normal.norm();
    q(k) = facets.row(k).dot(x);
  }
  Vector dir = Vector::Zero(2);
  dir(1) = 1.0;
  const double extent = support_value(HPolytope(facets, q), dir);
  return RciTemplate(facets, q * (axis_extents(1) / extent));
}

namespace {

struct ReachModel {
  Matrix pa;    // P*A
  Matrix pbu;   // P*Bu
  Vector fixed; // per-facet: max_w P*By w + max_d P*Bd d + P*c + min_u P*Bu u
};

// Facet-wise worst uncertainty and best control are box support values;
// only the state-vertex maximum depends on the current offsets.
ReachModel build_reach_model(const RciProblem& prob, const Matrix& p) {
  const AffineDynamics& dyn = *prob.subsystem.affine;
  ReachModel mdl;
  mdl.pa = p * dyn.a;
  mdl.pbu = p * dyn.b_input;
  const Matrix pby = p * dyn.b_coupling;
  const Matrix pbd = p * dyn.b_dist;
  const Vector pc = p * dyn.c;

  const Index rows = p.rows();
  mdl.fixed = Vector::Zero(rows);
  for (Index k = 0; k < rows; ++k) {
    double acc = pc(k);
    for (Index j = 0; j < pby.cols(); ++j) acc += std::abs(pby(k, j)) * prob.neighbor_bound(j);
    for (Index j = 0; j < pbd.cols(); ++j)
      acc += std::max(pbd(k, j) * prob.disturbance_set.lower(j),
                      pbd(k, j) * prob.disturbance_set.upper(j));
    for (Index j = 0; j < mdl.pbu.cols(); ++j)
      acc += std::min(mdl.pbu(k, j) * prob.input_set.lower(j),
                      mdl.pbu(k, j) * prob.input_set.upper(j));
    mdl.fixed(k) = acc;
  }
  return mdl;
}

// Worst-case best-response bound per facet over the vertices of {P x <= q}.
bool facet_reach(const ReachModel& mdl, const Matrix& p, const Vector& q, Vector& reach) {
  const auto verts = polytope_vertices_lowdim(HPolytope(p, q));
  if (verts.empty()) return false;
  reach = mdl.fixed;
  for (Index k = 0; k < p.rows(); ++k) {
    double best = -kInf;
    for (const auto& v : verts) best = std::max(best, mdl.pa.row(k).dot(v));
    reach(k) += best;
  }
  return true;
}

// min s  s.t.  pbu u <= rhs + s, u in the input box. s* <= 0 means some
// admissible input satisfies every facet jointly.
double joint_feasibility_margin(const Matrix& pbu, const Vector& rhs, const Box& input) {
  const Index m = pbu.cols();
  const Index rows = pbu.rows();
  Matrix a(rows + 2 * m, m + 1);
  Vector b(rows + 2 * m);
  a.setZero();
  a.block(0, 0, rows, m) = pbu;
  a.col(m).head(rows).setConstant(-1.0);
  b.head(rows) = rhs;
  a.block(rows, 0, m, m) = Matrix::Identity(m, m);
  b.segment(rows, m) = input.upper;
  a.block(rows + m, 0, m, m) = -Matrix::Identity(m, m);
  b.tail(m) = -input.lower;
  Vector obj = Vector::Zero(m + 1);
  obj(m) = 1.0;
  const LpOutcome out = lp_solve(obj, HPolytope(a, b));
  if (out.status != LpStatus::Optimal) throw Error("joint_feasibility_margin: margin LP failed");
  return *out.value;
}

void validate_problem(const RciProblem& prob) {
  if (!prob.subsystem.affine) throw Error("compute_rci: affine realization required");
  if (prob.input_set.dim() != prob.subsystem.input_dim ||
      prob.disturbance_set.dim() != prob.subsystem.dist_dim ||
      prob.neighbor_bound.size() != prob.subsystem.coupling_dim)
    throw Error("compute_rci: problem dimensions inconsistent with subsystem");
  if (!is_finite(prob.neighbor_bound) || (prob.neighbor_bound.array() < 0).any())
    throw Error("compute_rci: neighbor bound must be finite and nonnegative");
  if (prob.subsystem.state_dim > 2)
    throw Error("compute_rci: template iteration supports 1- and 2-state subsystems");
}

}  // namespace

RciResult compute_rci(const RciProblem& prob, const RciTemplate& tmpl, const RciOptions& opts) {
  validate_problem(prob);
  const Matrix& p = tmpl.facets;
  if (p.cols() != prob.subsystem.state_dim) throw Error("compute_rci: template dimension mismatch");

  const ReachModel mdl = build_reach_model(prob, p);
  const double qscale = tmpl.q0.lpNorm<Eigen::Infinity>();

  Vector q = tmpl.q0;
  Vector reach(p.rows());
  RciResult res;
  res.status = RciStatus::NotConverged;

  Vector delta_prev = Vector::Zero(p.rows());
  int iter = 0;
  for (; iter < opts.max_iters; ++iter) {
    if (!facet_reach(mdl, p, q, reach)) {
      res.status = RciStatus::Empty;
      break;
    }
    const double viol = (reach - q).maxCoeff();

    Vector q_next(q.size());
    if (opts.tighten) {
      q_next = q.cwiseMin(reach);
    } else {
      // Repair-only: pull in exactly the violated facets.
      for (Index k = 0; k < q.size(); ++k)
        q_next(k) = reach(k) > q(k) ? 2.0 * q(k) - reach(k) : q(k);
    }

    if (opts.tighten) {
      // Pure tightening: floor at a tiny positive offset. A set pinned at
      // the floor stays a valid candidate (control dominates the
      // uncertainty there); the final vertex check decides.
      q_next = q_next.cwiseMax(opts.collapse_tol);
    } else if (q_next.minCoeff() < opts.collapse_tol) {
      res.status = RciStatus::Empty;
      q = q_next.cwiseMax(0.0);
      ++iter;
      break;
    }

    const Vector delta = q - q_next;
    const double change = delta.lpNorm<Eigen::Infinity>();

    // Converged: no facet moved materially and none is left violated.
    if (change < opts.tol) {
      q = q_next;
      res.final_change = change;
      if (viol > std::max(10.0 * opts.tol, 1e-7 * qscale)) {
        res.status = RciStatus::NotConverged;  // stalled against a violated facet
      } else {
        res.status = RciStatus::Invariant;
      }
      ++iter;
      break;
    }

    // Geometric extrapolation of slowly contracting facet sequences. The
    // jump is only accepted when the target itself satisfies the facet
    // bounds, which rules out undershooting the fixed point.
    if (opts.accelerate && iter > 4 && iter % 8 == 0 && delta_prev.size() == delta.size()) {
      bool usable = true;
      Vector jump = q_next;
      for (Index k = 0; k < q.size() && usable; ++k) {
        if (delta(k) <= 1e-16) continue;
        if (delta_prev(k) <= 1e-16) {
          usable = false;
          break;
        }
        const double rho = delta(k) / delta_prev(k);
        if (rho <= 1e-4 || rho >= 1.0 - 1e-10) {
          usable = false;
          break;
        }
        jump(k) = std::max(0.0, q_next(k) - delta(k) * rho / (1.0 - rho));
      }
      if (usable && jump.minCoeff() >= opts.collapse_tol) {
        Vector jump_reach(p.rows());
        if (facet_reach(mdl, p, jump, jump_reach) &&
            (jump_reach - jump).maxCoeff() <= 1e-9 * std::max(1.0, qscale)) {
          q_next = jump;
        }
      }
    }

    delta_prev = q - q_next;
    q = q_next;
  }
  if (iter >= opts.max_iters) res.final_change = (q - reach.cwiseMin(q)).lpNorm<Eigen::Infinity>();

  res.q = q;
  res.iterations = iter;
  res.set = HPolytope(p, q.cwiseMax(opts.collapse_tol));
  if (facet_reach(mdl, p, q, reach))
    res.facet_margins = q - reach;
  else
    res.facet_margins = Vector::Zero(q.size());

  // Exact certification at the candidate set's vertices: for every vertex
  // and every uncertainty-box vertex some shared input must keep the
  // successor inside. Affinity makes vertex checks sufficient.
  if (res.status == RciStatus::Invariant) {
    const AffineDynamics& dyn = *prob.subsystem.affine;
    const Matrix pby = p * dyn.b_coupling;
    const Matrix pbd = p * dyn.b_dist;
    const Vector pc = p * dyn.c;
    const auto verts = polytope_vertices_lowdim(HPolytope(p, q));
    const auto d_verts = box_vertices(prob.disturbance_set, true);
    const auto w_verts = box_vertices(Box::centered(prob.neighbor_bound), true);
    const double tol = std::max(tolerances().feasibility, 20.0 * opts.tol);
    bool ok = !verts.empty();
    for (const auto& v : verts) {
      const Vector base = mdl.pa * v + pc;
      for (const auto& d : d_verts) {
        for (const auto& w : w_verts) {
          const Vector rhs = q - base - pby * w - pbd * d;
          if (joint_feasibility_margin(mdl.pbu, rhs, prob.input_set) > tol) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
      if (!ok) break;
    }
    if (!ok) res.status = RciStatus::NotConverged;
  }
  return res;
}

RciVerification verify_rci(const HPolytope& s, const RciProblem& prob, int grid_density) {
  validate_problem(prob);
  if (grid_density < 1) throw Error("verify_rci: empty grid density");
  const Index n = s.dim();
  if (n != prob.subsystem.state_dim) throw Error("verify_rci: set dimension mismatch");

  // Bounding box via support values; throws when S is unbounded.
  Vector lo(n), hi(n);
  for (Index i = 0; i < n; ++i) {
    Vector e = Vector::Zero(n);
    e(i) = 1.0;
    hi(i) = support_value(s, e);
    lo(i) = -support_value(s, -e);
  }

  const AffineDynamics& dyn = *prob.subsystem.affine;
  const Matrix pa = s.a_matrix * dyn.a;
  const Matrix pbu = s.a_matrix * dyn.b_input;
  const Matrix pby = s.a_matrix * dyn.b_coupling;
  const Matrix pbd = s.a_matrix * dyn.b_dist;
  const Vector pc = s.a_matrix * dyn.c;
  const auto d_verts = box_vertices(prob.disturbance_set, true);
  const auto w_verts = box_vertices(Box::centered(prob.neighbor_bound), true);

  // Inclusive grid over the bounding box, filtered to members of S.
  std::vector<Vector> samples;
  std::vector<Index> idx(static_cast<size_t>(n), 0);
  while (true) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) {
      const double t = grid_density == 1 ? 0.5
                                         : static_cast<double>(idx[static_cast<size_t>(i)]) /
                                               static_cast<double>(grid_density - 1);
      x(i) = lo(i) + t * (hi(i) - lo(i));
    }
    if (contains(s, x, tolerances().feasibility)) samples.push_back(std::move(x));
    Index axis = n - 1;
    for (; axis >= 0; --axis) {
      if (++idx[static_cast<size_t>(axis)] < grid_density) break;
      idx[static_cast<size_t>(axis)] = 0;
    }
    if (axis < 0) break;
  }

  RciVerification rep;
  long pass = 0;
  for (const auto& x : samples) {
    const Vector base = pa * x + pc;
    for (const auto& d : d_verts) {
      for (const auto& w : w_verts) {
        const Vector rhs = s.b_vector - base - pby * w - pbd * d;
        const double margin = joint_feasibility_margin(pbu, rhs, prob.input_set);
        ++rep.checks;
        rep.worst_margin = std::max(rep.worst_margin, margin);
        if (margin <= tolerances().feasibility) {
          ++pass;
        } else if (rep.failures.size() < 32) {
          rep.failures.push_back({x, d, w, margin});
        }
      }
    }
  }
  rep.pass_fraction = rep.checks == 0 ? 0.0 : static_cast<double>(pass) / static_cast<double>(rep.checks);
  return rep;
}

double output_bound(const HPolytope& s, const Vector& h_row) {
  return std::max(support_value(s, h_row), support_value(s, -h_row));
}

double gain_evaluate(const RciProblem& base, const RciTemplate& tmpl, const Vector& neighbor_bound,
                     RciOptions opts) {
  RciProblem prob = base;
  prob.neighbor_bound = neighbor_bound;
  const RciResult res = compute_rci(prob, tmpl, opts);
  if (res.status != RciStatus::Invariant) return kInf;
  const Matrix& c = prob.subsystem.affine->output;
  if (c.rows() != 1) throw Error("gain_evaluate: scalar output expected");
  return output_bound(res.set, c.row(0).transpose());
}

}  // namespace agc
