#include "agc/contract.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

namespace agc {

ContractParams::ContractParams(Vector y) : y_max(std::move(y)) {
  if (!is_finite(y_max)) throw Error("ContractParams: non-finite bound");
  if ((y_max.array() < 0).any()) throw Error("ContractParams: bounds must be nonnegative");
}

Vector GainFamily::neighbor_projection(int i, const Vector& y) const {
  const auto& nbs = gains[static_cast<size_t>(i)].neighbors;
  Vector out(static_cast<Index>(nbs.size()));
  for (size_t k = 0; k < nbs.size(); ++k) {
    const int j = nbs[k];
    if (j < 0 || j >= y.size()) throw Error("GainFamily: neighbor index out of range");
    out(static_cast<Index>(k)) = y(j);
  }
  return out;
}

ValidityOutcome check_validity(const ContractParams& params, const GainFamily& gains, double tol) {
  const int n = gains.size();
  if (params.y_max.size() != n) throw Error("check_validity: parameter count mismatch");

  ValidityOutcome out;
  out.params = params;
  out.valid = true;
  for (int i = 0; i < n; ++i) {
    const SubsystemGain& g = gains.gains[static_cast<size_t>(i)];
    const Vector y_n = gains.neighbor_projection(i, params.y_max);
    ValidityEntry entry;
    entry.subsystem = i;
    if (g.callable) {
      const double v = g.callable(y_n);
      if (std::isinf(v)) {
        entry.hole = true;
        entry.slack = kInf;
      } else {
        entry.slack = v - params.y_max(i);
      }
    } else if (g.approx) {
      Vector point(y_n.size() + 1);
      point.head(y_n.size()) = y_n;
      point(y_n.size()) = params.y_max(i);
      const Membership m = membership_constraint(*g.approx, point);
      if (m.satisfiable) {
        entry.slack = m.slack;
        entry.piece = m.piece;
      } else {
        // Distance-like margin: how far the point is from the nearest piece.
        double best = kInf;
        for (const auto& piece : g.approx->body.pieces)
          best = std::min(best, (piece.a_matrix * point - piece.b_vector).maxCoeff());
        entry.slack = best;
      }
    } else {
      throw Error("check_validity: subsystem " + std::to_string(i) + " has no gain");
    }
    if (entry.hole || entry.slack > tol) out.valid = false;
    out.entries.push_back(entry);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Contract search over epigraph approximations.
// ---------------------------------------------------------------------------

namespace {

// Least y such that (x, y) lies in the piece; +inf when x is outside the
// piece's input-space shadow.
double piece_floor(const HPolytope& piece, const Vector& x, double tol) {
  const Index d = piece.dim() - 1;
  double lo = -kInf, hi = kInf;
  for (Index r = 0; r < piece.rows(); ++r) {
    const double ay = piece.a_matrix(r, d);
    const double rest = piece.a_matrix.row(r).head(d).dot(x);
    if (std::abs(ay) < 1e-14) {
      if (rest > piece.b_vector(r) + tol) return kInf;
    } else if (ay > 0) {
      hi = std::min(hi, (piece.b_vector(r) - rest) / ay);
    } else {
      lo = std::max(lo, (piece.b_vector(r) - rest) / ay);
    }
  }
  if (lo > hi + tol) return kInf;
  return std::max(lo, 0.0);
}

// Staircase value of the approximated gain at x: least feasible output over
// all pieces. Second member is the selecting piece index.
std::pair<double, int> staircase_value(const EpigraphApprox& approx, const Vector& x, double tol) {
  double best = kInf;
  int best_piece = -1;
  for (size_t j = 0; j < approx.body.pieces.size(); ++j) {
    const double v = piece_floor(approx.body.pieces[j], x, tol);
    if (v < best - 1e-15) {
      best = v;
      best_piece = static_cast<int>(j);
    }
  }
  return {best, best_piece};
}

struct LiftedRows {
  Matrix a;
  Vector b;
};

// Embed piece rows over (neighbors..., i) into the full bound space.
LiftedRows lift_piece(const HPolytope& piece, const std::vector<int>& neighbors, int self, int n) {
  LiftedRows out;
  out.a = Matrix::Zero(piece.rows(), n);
  out.b = piece.b_vector;
  for (Index r = 0; r < piece.rows(); ++r) {
    for (size_t k = 0; k < neighbors.size(); ++k)
      out.a(r, neighbors[k]) += piece.a_matrix(r, static_cast<Index>(k));
    out.a(r, self) += piece.a_matrix(r, piece.dim() - 1);
  }
  return out;
}

// Per-coordinate interval hull of a union's pieces (LP-based, cached by the
// caller); a valid relaxation for branch-and-bound nodes.
LiftedRows union_bbox_rows(const EpigraphApprox& approx, const std::vector<int>& neighbors, int self,
                           int n) {
  const Index d = approx.body.dim();
  Vector lo = Vector::Constant(d, kInf), hi = Vector::Constant(d, -kInf);
  for (const auto& piece : approx.body.pieces) {
    for (Index c = 0; c < d; ++c) {
      Vector e = Vector::Zero(d);
      e(c) = 1.0;
      hi(c) = std::max(hi(c), support_value(piece, e));
      lo(c) = std::min(lo(c), -support_value(piece, -e));
    }
  }
  Matrix a(2 * d, d);
  Vector b(2 * d);
  a.topRows(d) = Matrix::Identity(d, d);
  b.head(d) = hi;
  a.bottomRows(d) = -Matrix::Identity(d, d);
  b.tail(d) = -lo;
  return lift_piece(HPolytope(a, b), neighbors, self, n);
}

struct NodeLp {
  LpStatus status;
  double value;
  Vector point;
};

NodeLp solve_node(const std::vector<LiftedRows>& groups, const Vector& weights, int n) {
  Index rows = n;  // y >= 0
  for (const auto& g : groups) rows += g.a.rows();
  Matrix a = Matrix::Zero(rows, n);
  Vector b = Vector::Zero(rows);
  a.topRows(n) = -Matrix::Identity(n, n);
  Index at = n;
  for (const auto& g : groups) {
    a.middleRows(at, g.a.rows()) = g.a;
    b.segment(at, g.b.size()) = g.b;
    at += g.a.rows();
  }
  const LpOutcome out = lp_solve(weights, HPolytope(a, b));
  if (out.status == LpStatus::Optimal) return {out.status, *out.value, *out.point};
  return {out.status, kInf, Vector()};
}

}  // namespace

SearchResult search_contract(const GainFamily& gains, const SearchOptions& opts) {
  const int n = gains.size();
  if (n == 0) throw Error("search_contract: empty gain family");
  for (int i = 0; i < n; ++i)
    if (!gains.gains[static_cast<size_t>(i)].approx)
      throw Error("search_contract: subsystem " + std::to_string(i) +
                  " has no epigraph approximation");
  Vector weights = opts.weights.size() == 0 ? Vector::Ones(n) : opts.weights;
  if (weights.size() != n) throw Error("search_contract: weight count mismatch");
  if ((weights.array() < 0).any()) throw Error("search_contract: weights must be nonnegative");
  const double tol = tolerances().feasibility;

  SearchResult res;
  res.pieces.assign(static_cast<size_t>(n), -1);

  // Monotone staircases admit an exact least-fixed-point solve: iterate
  // y <- max(y, Lambda_hat(y)) upward from zero. Every feasible point is a
  // pre-fixed point, so the limit is a componentwise lower bound on all of
  // them and therefore optimal for any nonnegative weights.
  bool all_cells = true;
  for (const auto& g : gains.gains) all_cells &= g.approx->kind == EpiKind::MonotoneCells;
  if (all_cells && !opts.pure_feasibility) {
    long pieces_total = 0;
    for (const auto& g : gains.gains) pieces_total += static_cast<long>(g.approx->body.pieces.size());
    Vector y = Vector::Zero(n);
    bool infeasible = false;
    int infeasible_at = -1;
    const long sweep_cap = 2 * pieces_total + 2 * n + 8;
    for (long sweep = 0; sweep < sweep_cap; ++sweep) {
      bool changed = false;
      for (int i = 0; i < n; ++i) {
        const Vector y_n = gains.neighbor_projection(i, y);
        const auto [v, piece] = staircase_value(*gains.gains[static_cast<size_t>(i)].approx, y_n, tol);
        if (std::isinf(v)) {
          infeasible = true;
          infeasible_at = i;
          break;
        }
        if (v > y(i) + 1e-15) {
          y(i) = v;
          changed = true;
        }
      }
      if (infeasible || !changed) break;
    }
    if (infeasible) {
      res.feasible = false;
      res.conflict = {infeasible_at};
      return res;
    }
    // Confirm membership and collect the selecting pieces.
    res.feasible = true;
    for (int i = 0; i < n; ++i) {
      Vector point(gains.gains[static_cast<size_t>(i)].neighbors.size() + 1);
      point.head(point.size() - 1) = gains.neighbor_projection(i, y);
      point(point.size() - 1) = y(i);
      const Membership m = membership_constraint(*gains.gains[static_cast<size_t>(i)].approx, point);
      if (!m.satisfiable) {
        res.feasible = false;  // outside the sampled domain; fall through to B&B
        break;
      }
      res.pieces[static_cast<size_t>(i)] = m.piece;
    }
    if (res.feasible) {
      res.params = ContractParams(y);
      res.objective = weights.dot(y);
      return res;
    }
    res.pieces.assign(static_cast<size_t>(n), -1);
  }

  // General path: best-first branch-and-bound over piece selections with
  // box relaxations for the unfixed subsystems.
  std::vector<LiftedRows> fixed_rows(static_cast<size_t>(n));
  std::vector<LiftedRows> relax_rows(static_cast<size_t>(n));
  std::vector<int> piece_count(static_cast<size_t>(n));
  std::vector<bool> is_union(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& g = gains.gains[static_cast<size_t>(i)];
    piece_count[static_cast<size_t>(i)] = static_cast<int>(g.approx->body.pieces.size());
    is_union[static_cast<size_t>(i)] = g.approx->body.pieces.size() > 1;
    relax_rows[static_cast<size_t>(i)] =
        is_union[static_cast<size_t>(i)]
            ? union_bbox_rows(*g.approx, g.neighbors, i, n)
            : lift_piece(g.approx->body.pieces[0], g.neighbors, i, n);
  }

  struct Node {
    std::vector<int> fixed;  // piece per subsystem, -1 unfixed
    double bound;
    long id;
  };
  struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
      return a.bound > b.bound || (a.bound == b.bound && a.id > b.id);
    }
  };

  auto node_groups = [&](const std::vector<int>& fixed) {
    std::vector<LiftedRows> groups;
    groups.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const int pc = fixed[static_cast<size_t>(i)];
      if (pc < 0) {
        groups.push_back(relax_rows[static_cast<size_t>(i)]);
      } else {
        const auto& g = gains.gains[static_cast<size_t>(i)];
        groups.push_back(lift_piece(g.approx->body.pieces[static_cast<size_t>(pc)], g.neighbors, i, n));
      }
    }
    return groups;
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long next_id = 0;
  {
    std::vector<int> root(static_cast<size_t>(n), -1);
    for (int i = 0; i < n; ++i)
      if (!is_union[static_cast<size_t>(i)]) root[static_cast<size_t>(i)] = 0;
    const NodeLp lp = solve_node(node_groups(root), weights, n);
    ++res.nodes;
    if (lp.status == LpStatus::Optimal) open.push({root, lp.value, next_id++});
  }

  double incumbent = kInf;
  Vector incumbent_point;
  std::vector<int> incumbent_pieces;
  while (!open.empty() && res.nodes < opts.node_cap) {
    const Node node = open.top();
    open.pop();
    if (node.bound >= incumbent - 1e-12) continue;

    int branch = -1;
    for (int i = 0; i < n; ++i)
      if (node.fixed[static_cast<size_t>(i)] < 0) {
        branch = i;
        break;
      }
    if (branch < 0) {
      if (node.bound < incumbent - 1e-12) {
        const NodeLp lp = solve_node(node_groups(node.fixed), weights, n);
        if (lp.status == LpStatus::Optimal && lp.value < incumbent - 1e-12) {
          incumbent = lp.value;
          incumbent_point = lp.point;
          incumbent_pieces = node.fixed;
        }
      }
      if (opts.pure_feasibility && std::isfinite(incumbent)) break;
      continue;
    }
    for (int pc = 0; pc < piece_count[static_cast<size_t>(branch)]; ++pc) {
      std::vector<int> fixed = node.fixed;
      fixed[static_cast<size_t>(branch)] = pc;
      const NodeLp lp = solve_node(node_groups(fixed), weights, n);
      ++res.nodes;
      if (lp.status != LpStatus::Optimal) continue;
      if (lp.value >= incumbent - 1e-12) continue;
      open.push({std::move(fixed), lp.value, next_id++});
    }
  }

  if (std::isfinite(incumbent)) {
    res.feasible = true;
    res.params = ContractParams(incumbent_point.cwiseMax(0.0));
    res.objective = incumbent;
    res.pieces = incumbent_pieces;
    return res;
  }

  // Infeasible: name the subsystems whose removal restores feasibility of
  // the box relaxation (a conflict hint, not a minimal core).
  res.feasible = false;
  for (int drop = 0; drop < n; ++drop) {
    std::vector<LiftedRows> groups;
    for (int i = 0; i < n; ++i)
      if (i != drop) groups.push_back(relax_rows[static_cast<size_t>(i)]);
    if (groups.empty()) continue;
    const NodeLp lp = solve_node(groups, weights, n);
    if (lp.status == LpStatus::Optimal) res.conflict.push_back(drop);
  }
  if (res.conflict.empty())
    for (int i = 0; i < n; ++i) res.conflict.push_back(i);
  return res;
}

RefinementLog refine(const ContractParams& start, const GainFamily& gains, double tol,
                     int max_iters) {
  for (const auto& g : gains.gains)
    if (!g.callable) throw Error("refine: every gain must be callable");
  const ValidityOutcome v0 = check_validity(start, gains, tol);
  if (!v0.valid) throw Error("refine: initial params do not satisfy the validity condition");

  RefinementLog log;
  log.iterates.push_back(start.y_max);
  Vector y = start.y_max;
  for (int k = 0; k < max_iters; ++k) {
    Vector next(y.size());
    for (int i = 0; i < gains.size(); ++i) {
      const double v = gains.gains[static_cast<size_t>(i)].callable(gains.neighbor_projection(i, y));
      if (std::isinf(v) || std::isnan(v))
        throw Error("refine: gain " + std::to_string(i) + " failed mid-iteration");
      if (v > y(i) + 1e-9 * (1.0 + std::abs(y(i))))
        throw Error("refine: non-monotone step at subsystem " + std::to_string(i) + " (" +
                    std::to_string(y(i)) + " -> " + std::to_string(v) +
                    "); gain family violates the monotonicity assumption");
      next(i) = std::max(0.0, std::min(v, y(i)));
    }
    const double change = (y - next).lpNorm<Eigen::Infinity>();
    y = next;
    log.iterates.push_back(y);
    if (change < tol) {
      log.reason = RefinementLog::Reason::Converged;
      return log;
    }
  }
  log.reason = RefinementLog::Reason::MaxIters;
  return log;
}

std::optional<SmallGainBounds> small_gain_closed_form(double mu1, double mu2, double nu1, double nu2,
                                                      double d1, double d2) {
  for (double v : {mu1, mu2, nu1, nu2, d1, d2})
    if (v < 0.0 || !std::isfinite(v)) throw Error("small_gain_closed_form: arguments must be nonnegative");
  const double loop = nu1 * nu2;
  if (loop >= 1.0) return std::nullopt;
  SmallGainBounds out;
  out.y1 = (mu1 * d1 + mu2 * nu1 * d2) / (1.0 - loop);
  out.y2 = (mu1 * nu2 * d1 + mu2 * d2) / (1.0 - loop);
  return out;
}

IterationResult general_ag_iterate(const GeneralContractIteration& iteration, int steps) {
  if (!iteration.lambda_hat || !iteration.gamma)
    throw Error("general_ag_iterate: both maps must be provided");
  if (steps < 0) throw Error("general_ag_iterate: steps must be >= 0");

  IterationResult res;
  Vector feedback = iteration.initial_feedback;
  for (int k = 0; k <= steps; ++k) {
    Vector g;
    try {
      g = iteration.lambda_hat(feedback);
    } catch (const std::exception&) {
      res.failure_index = k;
      return res;
    }
    res.guarantees.push_back(g);
    if (k == steps) break;
    try {
      feedback = iteration.gamma(g);
    } catch (const std::exception&) {
      res.failure_index = k + 1;
      return res;
    }
  }
  return res;
}

GeneralContractIteration invariance_horizon_iteration(double ts, int subsystems) {
  if (!(ts > 0.0)) throw Error("invariance_horizon_iteration: ts must be positive");
  GeneralContractIteration it;
  it.lambda_hat = [ts](const Vector& t) -> Vector { return t.array() + ts; };
  it.gamma = [](const Vector& g) { return g; };
  it.initial_feedback = Vector::Constant(subsystems, -ts);
  return it;
}

}  // namespace agc
