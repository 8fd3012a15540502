#pragma once

#include <functional>
#include <vector>

#include "agc/geometry.hpp"
#include "agc/network.hpp"
#include "agc/types.hpp"

namespace agc {

/// Barrier built from a template RCI {x : P x <= q}, q > 0:
///   b(x) = min_k (q_k - P_k x) / q_k,  b(0) = 1, b >= 0 exactly on the set.
/// kappa is the per-step decay fraction of the discrete barrier condition
/// (q_k - P_k x+) >= (1 - kappa)(q_k - P_k x); it must lie in (0, 1).
struct Cbf {
  Matrix facets;  // L x n
  Vector q;       // L, positive
  double kappa = 0.5;

  Cbf(Matrix p, Vector offsets, double kappa_step);
};

double cbf_value(const Cbf& cbf, const Vector& x);

struct FilterConfig {
  double eps_active_rel = 0.1;   // facets within b + rel*b + abs of the minimum are enforced
  double eps_active_abs = 1e-6;
};

struct FilterResult {
  Vector u_star;
  bool intervened = false;
  std::vector<int> enforced;  // facet indices whose decay constraint was imposed
  std::vector<int> active;    // enforced facets tight at u_star
  double slack = kInf;        // smallest enforced-constraint slack at u_star
};

/// Raised when no admissible input satisfies the enforced barrier
/// constraints: kappa is too small for the disturbance, or the model and
/// the set disagree.
class FilterInfeasible : public Error {
 public:
  FilterInfeasible(const std::string& msg, int facet, double margin)
      : Error(msg), worst_facet(facet), worst_margin(margin) {}
  int worst_facet;
  double worst_margin;
};

/// Minimally invasive filter: returns u0 untouched whenever it satisfies
/// every enforced facet constraint, otherwise the closest admissible input
/// in the Euclidean sense. The disturbance enters through its worst box
/// vertex per facet; pass a degenerate box for a measured disturbance.
FilterResult cbf_filter(const Cbf& cbf, const Subsystem& sub, const Vector& x,
                        const Vector& y_neighbors, const Box& disturbance, const Vector& u0,
                        const Box& input_set, const FilterConfig& cfg = {});

/// Closed-form projection of u0 onto {u : a . u >= c}:
///   u* = u0 + max(0, (c - a.u0) / |a|^2) a.
Vector project_halfspace(const Vector& u0, const Vector& a, double c);

/// Euclidean projection of u0 onto {u : G u <= h} intersected with a box,
/// by exhaustive KKT search over active sets (exact for these tiny QPs).
Vector qp_project(const Vector& u0, const Matrix& g, const Vector& h, const Box& bounds);

enum class StudentKind { Zero, ProportionalFrequency, Scripted };

/// Stand-in performance controller whose output the filter supervises.
struct StudentController {
  StudentKind kind = StudentKind::Zero;
  double k_omega = 0.0;  // proportional-frequency gain
  Box saturation;        // output box, required
  std::function<Vector(const Vector& x, int t)> script;  // Scripted kind
};

Vector student(const StudentController& controller, const Vector& x, int t);

}  // namespace agc
