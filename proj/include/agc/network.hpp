#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "agc/geometry.hpp"
#include "agc/types.hpp"

namespace agc {

/// Affine realization x+ = A x + Bu u + By y_N + Bd d + c with output y = C x.
struct AffineDynamics {
  Matrix a;        // n x n
  Matrix b_input;  // n x m
  Matrix b_coupling;  // n x (stacked neighbor output dim)
  Matrix b_dist;   // n x l
  Vector c;        // n
  Matrix output;   // s x n
};

using DynamicsFn =
    std::function<Vector(const Vector& x, const Vector& y_neighbors, const Vector& u, const Vector& d)>;
using OutputFn = std::function<Vector(const Vector& x)>;

/// One subsystem of the product network. Coupling enters only through the
/// stacked outputs of the listed neighbors, in list order.
struct Subsystem {
  int id = 0;
  Index state_dim = 0, input_dim = 0, dist_dim = 0, output_dim = 0;
  Index coupling_dim = 0;  // stacked neighbor output dimension
  std::vector<int> neighbors;
  DynamicsFn dynamics;     // optional when affine is present
  OutputFn output_map;     // optional when affine is present
  std::optional<AffineDynamics> affine;
};

/// Validating constructor: checks h(0) = 0, rejects self-loops, and when
/// both a map and an affine realization are given, cross-checks them on
/// seeded random samples.
Subsystem make_subsystem(int id, Index state_dim, Index input_dim, Index dist_dim, Index output_dim,
                         Index coupling_dim, std::vector<int> neighbors, DynamicsFn dynamics,
                         OutputFn output, std::optional<AffineDynamics> affine);

/// Affine-only convenience; dimensions inferred from the matrices.
Subsystem make_affine_subsystem(int id, AffineDynamics dyn, std::vector<int> neighbors);

Vector step(const Subsystem& sub, const Vector& x, const Vector& y_neighbors, const Vector& u,
            const Vector& d);

Vector subsystem_output(const Subsystem& sub, const Vector& x);

struct NetworkSystem {
  std::vector<Subsystem> subsystems;  // storage order fixes state stacking
  double ts = 0.0;

  size_t index_of(int id) const;
  const Subsystem& by_id(int id) const;
  /// Stacked neighbor outputs for subsystem i, given all current outputs.
  Vector stack_neighbor_outputs(size_t i, const std::vector<Vector>& outputs) const;
};

/// Validates neighbor resolution and coupling dimension consistency.
NetworkSystem make_network(std::vector<Subsystem> subsystems, double ts);

struct NetworkStepResult {
  std::vector<Vector> next_states;
  std::vector<Vector> outputs;  // outputs at the *current* states
};

/// Synchronous step: all outputs are computed from current states first,
/// then every subsystem advances.
NetworkStepResult network_step(const NetworkSystem& net, const std::vector<Vector>& states,
                               const std::vector<Vector>& inputs,
                               const std::vector<Vector>& disturbances);

enum class BusKind { Generator, Load };

/// One bus of the microgrid model: swing dynamics for generators, an
/// explicit per-bus algebraic frequency for loads.
struct BusSpec {
  int id = 0;
  BusKind kind = BusKind::Load;
  double inertia = 0.0;    // M, generator only
  double damping = 0.0;    // D
  double injection = 0.0;  // P^in
  std::map<int, double> susceptance;  // B_ij per neighbor id
};

/// Forward-Euler discretization at step ts of the microgrid. Generator
/// buses carry state [theta, omega]; load buses carry [theta] with omega
/// solved per bus from the algebraic power balance. Output y_i = theta_i.
NetworkSystem build_microgrid(const std::vector<BusSpec>& buses, double ts);

/// Algebraic load-bus frequency (P^in - d - u - sum B (th_i - th_j)) / D.
double load_bus_frequency(const BusSpec& bus, double theta, const std::map<int, double>& neighbor_theta,
                          double u, double d);

}  // namespace agc
