#include "agc/supervisor.hpp"

#include <algorithm>
#include <cmath>

namespace agc {

Cbf::Cbf(Matrix p, Vector offsets, double kappa_step)
    : facets(std::move(p)), q(std::move(offsets)), kappa(kappa_step) {
  if (facets.rows() != q.size()) throw Error("Cbf: row count mismatch");
  if ((q.array() <= 0).any()) throw Error("Cbf: offsets must be strictly positive");
  if (!(kappa > 0.0) || !(kappa < 1.0)) throw Error("Cbf: kappa must lie in (0, 1)");
  if (!is_finite(facets) || !is_finite(q)) throw Error("Cbf: non-finite entry");
}

double cbf_value(const Cbf& cbf, const Vector& x) {
  if (x.size() != cbf.facets.cols()) throw Error("cbf_value: dimension mismatch");
  return ((cbf.q - cbf.facets * x).array() / cbf.q.array()).minCoeff();
}

Vector project_halfspace(const Vector& u0, const Vector& a, double c) {
  const double nn = a.squaredNorm();
  if (nn <= 0.0) throw Error("project_halfspace: zero normal");
  const double shortfall = (c - a.dot(u0)) / nn;
  return shortfall > 0.0 ? Vector(u0 + shortfall * a) : u0;
}

Vector qp_project(const Vector& u0, const Matrix& g, const Vector& h, const Box& bounds) {
  const Index m = u0.size();
  if (g.cols() != m || g.rows() != h.size() || bounds.dim() != m)
    throw Error("qp_project: dimension mismatch");

  // Stack the box as ordinary rows.
  const Index rows = g.rows() + 2 * m;
  Matrix ga(rows, m);
  Vector hb(rows);
  ga.topRows(g.rows()) = g;
  hb.head(g.rows()) = h;
  ga.middleRows(g.rows(), m) = Matrix::Identity(m, m);
  hb.segment(g.rows(), m) = bounds.upper;
  ga.bottomRows(m) = -Matrix::Identity(m, m);
  hb.tail(m) = -bounds.lower;

  const double scale = 1.0 + u0.lpNorm<Eigen::Infinity>() + hb.lpNorm<Eigen::Infinity>();
  const double feas_tol = 1e-9 * scale;

  auto feasible = [&](const Vector& u) { return ((ga * u - hb).array() <= feas_tol).all(); };
  if (feasible(u0)) return u0;

  // KKT search over active sets of size <= m: with an identity Hessian the
  // equality-constrained minimizer is an affine projection, and the
  // multipliers must be nonnegative.
  std::vector<Index> subset;
  Vector best;
  bool found = false;

  std::function<void(Index)> recurse = [&](Index start) {
    if (found) return;
    if (!subset.empty()) {
      const Index k = static_cast<Index>(subset.size());
      Matrix gs(k, m);
      Vector hs(k);
      for (Index i = 0; i < k; ++i) {
        gs.row(i) = ga.row(subset[static_cast<size_t>(i)]);
        hs(i) = hb(subset[static_cast<size_t>(i)]);
      }
      const Matrix gram = gs * gs.transpose();
      Eigen::FullPivLU<Matrix> lu(gram);
      if (lu.isInvertible()) {
        const Vector lambda = lu.solve(gs * u0 - hs);
        if ((lambda.array() >= -1e-10 * scale).all()) {
          const Vector u = u0 - gs.transpose() * lambda;
          if (feasible(u)) {
            best = u;
            found = true;
            return;
          }
        }
      }
    }
    if (static_cast<Index>(subset.size()) == m) return;
    for (Index r = start; r < rows; ++r) {
      subset.push_back(r);
      recurse(r + 1);
      subset.pop_back();
      if (found) return;
    }
  };
  // Empty active set handled by the feasibility check above; enumerate in
  // deterministic lexicographic order.
  recurse(0);

  if (!found) {
    // No KKT point: the constraint system is infeasible. Identify the
    // facet that resists the most over the whole box.
    int worst = 0;
    double worst_margin = -kInf;
    for (Index r = 0; r < g.rows(); ++r) {
      double best_lhs = 0.0;  // min over the box of g_r . u
      for (Index j = 0; j < m; ++j)
        best_lhs += std::min(g(r, j) * bounds.lower(j), g(r, j) * bounds.upper(j));
      const double margin = best_lhs - h(r);
      if (margin > worst_margin) {
        worst_margin = margin;
        worst = static_cast<int>(r);
      }
    }
    throw FilterInfeasible("qp_project: constraints infeasible over the input box", worst,
                           worst_margin);
  }
  return best;
}

FilterResult cbf_filter(const Cbf& cbf, const Subsystem& sub, const Vector& x,
                        const Vector& y_neighbors, const Box& disturbance, const Vector& u0,
                        const Box& input_set, const FilterConfig& cfg) {
  if (!sub.affine) throw Error("cbf_filter: affine subsystem required");
  const AffineDynamics& dyn = *sub.affine;
  if (x.size() != sub.state_dim || y_neighbors.size() != sub.coupling_dim ||
      u0.size() != sub.input_dim || disturbance.dim() != sub.dist_dim ||
      input_set.dim() != sub.input_dim)
    throw Error("cbf_filter: dimension mismatch");

  const double b = cbf_value(cbf, x);

  // Enforce every facet whose normalized margin is within eps of the
  // minimum, not just the argmin; the barrier's min is nonsmooth and a
  // single-facet condition chatters between near-ties.
  const double eps_active = cfg.eps_active_rel * std::abs(b) + cfg.eps_active_abs;
  const Vector margins = (cbf.q - cbf.facets * x).cwiseQuotient(cbf.q);
  std::vector<int> enforced;
  for (Index k = 0; k < margins.size(); ++k)
    if (margins(k) <= b + eps_active) enforced.push_back(static_cast<int>(k));

  // Per-facet decay constraint on the successor:
  //   P_k x+ <= q_k - (1 - kappa) (q_k - P_k x)
  // with the disturbance term taken at its worst box vertex.
  const Index ne = static_cast<Index>(enforced.size());
  Matrix g(ne, sub.input_dim);
  Vector h(ne);
  const Vector base = dyn.a * x + dyn.b_coupling * y_neighbors + dyn.c;
  for (Index i = 0; i < ne; ++i) {
    const Index k = enforced[static_cast<size_t>(i)];
    const Eigen::RowVectorXd pk = cbf.facets.row(k);
    double worst_dist = 0.0;
    const Eigen::RowVectorXd pbd = pk * dyn.b_dist;
    for (Index j = 0; j < sub.dist_dim; ++j)
      worst_dist += std::max(pbd(j) * disturbance.lower(j), pbd(j) * disturbance.upper(j));
    g.row(i) = pk * dyn.b_input;
    h(i) = cbf.q(k) - (1.0 - cbf.kappa) * (cbf.q(k) - pk.dot(x)) - pk.dot(base) - worst_dist;
  }

  FilterResult res;
  res.enforced = enforced;

  const double scale =
      1.0 + u0.lpNorm<Eigen::Infinity>() + (h.size() > 0 ? h.lpNorm<Eigen::Infinity>() : 0.0);
  const bool u0_ok = ((g * u0 - h).array() <= 1e-12 * scale).all() &&
                     input_set.contains(u0, 1e-12 * scale);
  if (u0_ok) {
    res.u_star = u0;
    res.intervened = false;
  } else {
    try {
      res.u_star = qp_project(u0, g, h, input_set);
    } catch (const FilterInfeasible& e) {
      throw FilterInfeasible("cbf_filter: no admissible input satisfies the barrier condition "
                             "(kappa too small or model mismatch)",
                             e.worst_facet < static_cast<int>(enforced.size())
                                 ? enforced[static_cast<size_t>(e.worst_facet)]
                                 : e.worst_facet,
                             e.worst_margin);
    }
    res.intervened = true;
  }

  if (ne > 0) {
    const Vector slacks = h - g * res.u_star;
    res.slack = slacks.minCoeff();
    for (Index i = 0; i < ne; ++i)
      if (std::abs(slacks(i)) <= 1e-9 * scale) res.active.push_back(enforced[static_cast<size_t>(i)]);
  }
  return res;
}

Vector student(const StudentController& controller, const Vector& x, int t) {
  const Index m = controller.saturation.dim();
  if (m < 1) throw Error("student: controller saturation box not configured");
  Vector u;
  switch (controller.kind) {
    case StudentKind::Zero:
      u = Vector::Zero(m);
      break;
    case StudentKind::ProportionalFrequency: {
      u = Vector::Zero(m);
      if (x.size() >= 2) u(0) = -controller.k_omega * x(1);  // generator state [theta, omega]
      break;
    }
    case StudentKind::Scripted: {
      if (!controller.script) throw Error("student: scripted controller without a script");
      u = controller.script(x, t);
      if (u.size() != m) throw Error("student: script output dimension mismatch");
      break;
    }
  }
  return u.cwiseMax(controller.saturation.lower).cwiseMin(controller.saturation.upper);
}

}  // namespace agc
