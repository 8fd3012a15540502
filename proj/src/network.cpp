#include "agc/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace agc {

namespace {

Vector affine_step(const AffineDynamics& dyn, const Vector& x, const Vector& y_n, const Vector& u,
                   const Vector& d) {
  Vector next = dyn.a * x + dyn.c;
  if (dyn.b_input.cols() > 0) next += dyn.b_input * u;
  if (dyn.b_coupling.cols() > 0) next += dyn.b_coupling * y_n;
  if (dyn.b_dist.cols() > 0) next += dyn.b_dist * d;
  return next;
}

void check_dims(const Subsystem& sub, const Vector& x, const Vector& y_n, const Vector& u,
                const Vector& d) {
  if (x.size() != sub.state_dim) throw Error("step: state dimension mismatch");
  if (y_n.size() != sub.coupling_dim) throw Error("step: coupling dimension mismatch");
  if (u.size() != sub.input_dim) throw Error("step: input dimension mismatch");
  if (d.size() != sub.dist_dim) throw Error("step: disturbance dimension mismatch");
  if (!is_finite(x) || !is_finite(y_n) || !is_finite(u) || !is_finite(d))
    throw Error("step: non-finite input");
}

}  // namespace

Subsystem make_subsystem(int id, Index state_dim, Index input_dim, Index dist_dim, Index output_dim,
                         Index coupling_dim, std::vector<int> neighbors, DynamicsFn dynamics,
                         OutputFn output, std::optional<AffineDynamics> affine) {
  Subsystem sub;
  sub.id = id;
  sub.state_dim = state_dim;
  sub.input_dim = input_dim;
  sub.dist_dim = dist_dim;
  sub.output_dim = output_dim;
  sub.coupling_dim = coupling_dim;
  sub.neighbors = std::move(neighbors);
  sub.dynamics = std::move(dynamics);
  sub.output_map = std::move(output);
  sub.affine = std::move(affine);

  for (int nb : sub.neighbors)
    if (nb == id) throw Error("make_subsystem: self-loop in neighbor list");
  if (!sub.affine && (!sub.dynamics || !sub.output_map))
    throw Error("make_subsystem: need either an affine realization or dynamics + output maps");
  if (sub.affine) {
    const auto& a = *sub.affine;
    if (a.a.rows() != state_dim || a.a.cols() != state_dim ||
        a.b_input.rows() != state_dim || a.b_input.cols() != input_dim ||
        a.b_coupling.rows() != state_dim || a.b_coupling.cols() != coupling_dim ||
        a.b_dist.rows() != state_dim || a.b_dist.cols() != dist_dim || a.c.size() != state_dim ||
        a.output.rows() != output_dim || a.output.cols() != state_dim)
      throw Error("make_subsystem: affine realization dimension mismatch");
  }

  // Operating-point convention h(0) = 0, checked numerically.
  const Vector y0 = subsystem_output(sub, Vector::Zero(state_dim));
  if (y0.lpNorm<Eigen::Infinity>() > 1e-9)
    throw Error("make_subsystem: output map violates h(0) = 0");

  // When both representations exist they must agree.
  if (sub.affine && sub.dynamics) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto rnd = [&](Index n) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v(i) = unit(rng);
      return v;
    };
    for (int s = 0; s < 20; ++s) {
      const Vector x = rnd(state_dim), y = rnd(coupling_dim), u = rnd(input_dim), d = rnd(dist_dim);
      const Vector fa = affine_step(*sub.affine, x, y, u, d);
      const Vector fd = sub.dynamics(x, y, u, d);
      if ((fa - fd).lpNorm<Eigen::Infinity>() > 1e-9 * (1.0 + fa.lpNorm<Eigen::Infinity>()))
        throw Error("make_subsystem: affine realization disagrees with dynamics map");
    }
  }
  return sub;
}

Subsystem make_affine_subsystem(int id, AffineDynamics dyn, std::vector<int> neighbors) {
  const Index n = dyn.a.rows();
  const Index m = dyn.b_input.cols();
  const Index l = dyn.b_dist.cols();
  const Index s = dyn.output.rows();
  const Index k = dyn.b_coupling.cols();
  return make_subsystem(id, n, m, l, s, k, std::move(neighbors), nullptr, nullptr, std::move(dyn));
}

Vector step(const Subsystem& sub, const Vector& x, const Vector& y_neighbors, const Vector& u,
            const Vector& d) {
  check_dims(sub, x, y_neighbors, u, d);
  if (sub.affine) return affine_step(*sub.affine, x, y_neighbors, u, d);
  return sub.dynamics(x, y_neighbors, u, d);
}

Vector subsystem_output(const Subsystem& sub, const Vector& x) {
  if (x.size() != sub.state_dim) throw Error("subsystem_output: dimension mismatch");
  if (sub.affine) return sub.affine->output * x;
  return sub.output_map(x);
}

size_t NetworkSystem::index_of(int id) const {
  for (size_t i = 0; i < subsystems.size(); ++i)
    if (subsystems[i].id == id) return i;
  throw Error("NetworkSystem: unknown subsystem id " + std::to_string(id));
}

const Subsystem& NetworkSystem::by_id(int id) const { return subsystems[index_of(id)]; }

Vector NetworkSystem::stack_neighbor_outputs(size_t i, const std::vector<Vector>& outputs) const {
  const Subsystem& sub = subsystems[i];
  Vector y(sub.coupling_dim);
  Index at = 0;
  for (int nb : sub.neighbors) {
    const Vector& ynb = outputs[index_of(nb)];
    y.segment(at, ynb.size()) = ynb;
    at += ynb.size();
  }
  if (at != sub.coupling_dim) throw Error("stack_neighbor_outputs: coupling dimension mismatch");
  return y;
}

NetworkSystem make_network(std::vector<Subsystem> subsystems, double ts) {
  if (!(ts > 0.0)) throw Error("make_network: step time must be positive");
  NetworkSystem net;
  net.subsystems = std::move(subsystems);
  net.ts = ts;
  std::set<int> ids;
  for (const auto& sub : net.subsystems)
    if (!ids.insert(sub.id).second) throw Error("make_network: duplicate subsystem id");
  for (const auto& sub : net.subsystems) {
    Index stacked = 0;
    for (int nb : sub.neighbors) {
      if (!ids.count(nb))
        throw Error("make_network: neighbor id " + std::to_string(nb) + " does not resolve");
      stacked += net.by_id(nb).output_dim;
    }
    if (stacked != sub.coupling_dim)
      throw Error("make_network: neighbor output stacking does not match coupling dimension");
  }
  return net;
}

NetworkStepResult network_step(const NetworkSystem& net, const std::vector<Vector>& states,
                               const std::vector<Vector>& inputs,
                               const std::vector<Vector>& disturbances) {
  const size_t n = net.subsystems.size();
  if (states.size() != n || inputs.size() != n || disturbances.size() != n)
    throw Error("network_step: missing subsystem entry");

  NetworkStepResult res;
  res.outputs.resize(n);
  for (size_t i = 0; i < n; ++i) res.outputs[i] = subsystem_output(net.subsystems[i], states[i]);
  res.next_states.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const Vector y_n = net.stack_neighbor_outputs(i, res.outputs);
    res.next_states[i] = step(net.subsystems[i], states[i], y_n, inputs[i], disturbances[i]);
  }
  return res;
}

double load_bus_frequency(const BusSpec& bus, double theta, const std::map<int, double>& neighbor_theta,
                          double u, double d) {
  double flow = 0.0;
  for (const auto& [nb, b] : bus.susceptance) flow += b * (theta - neighbor_theta.at(nb));
  return (bus.injection - d - u - flow) / bus.damping;
}

NetworkSystem build_microgrid(const std::vector<BusSpec>& buses, double ts) {
  if (!(ts > 0.0) || ts > 0.1) throw Error("build_microgrid: ts outside (0, 0.1]");
  if (buses.empty()) throw Error("build_microgrid: no buses");

  bool has_gen = false, has_load = false;
  std::set<int> ids;
  for (const auto& b : buses) {
    if (!ids.insert(b.id).second) throw Error("build_microgrid: duplicate bus id");
    if (b.kind == BusKind::Generator) {
      has_gen = true;
      if (!(b.inertia > 0.0)) throw Error("build_microgrid: generator inertia must be positive");
    } else {
      has_load = true;
    }
    if (!(b.damping > 0.0)) throw Error("build_microgrid: damping must be positive");
  }
  if (buses.size() >= 2 && (!has_gen || !has_load))
    throw Error("build_microgrid: need at least one generator and one load bus");

  // Symmetry and declared-line checks.
  for (const auto& b : buses) {
    for (const auto& [nb, sus] : b.susceptance) {
      if (!ids.count(nb)) throw Error("build_microgrid: line to unknown bus " + std::to_string(nb));
      if (nb == b.id) throw Error("build_microgrid: self line");
      if (!(sus > 0.0)) throw Error("build_microgrid: susceptance must be positive");
      const auto& other = *std::find_if(buses.begin(), buses.end(),
                                        [&](const BusSpec& o) { return o.id == nb; });
      auto it = other.susceptance.find(b.id);
      if (it == other.susceptance.end() || std::abs(it->second - sus) > 1e-12)
        throw Error("build_microgrid: susceptance not symmetric between " + std::to_string(b.id) +
                    " and " + std::to_string(nb));
    }
  }

  // Connectivity over the line graph.
  {
    std::set<int> seen{buses.front().id};
    std::vector<int> stack{buses.front().id};
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      const auto& b = *std::find_if(buses.begin(), buses.end(),
                                    [&](const BusSpec& o) { return o.id == cur; });
      for (const auto& [nb, sus] : b.susceptance)
        if (seen.insert(nb).second) stack.push_back(nb);
    }
    if (seen.size() != buses.size()) throw Error("build_microgrid: graph not connected");
  }

  std::vector<Subsystem> subs;
  subs.reserve(buses.size());
  for (const auto& b : buses) {
    std::vector<int> neighbors;
    for (const auto& [nb, sus] : b.susceptance) neighbors.push_back(nb);  // map order: ascending id
    const Index deg = static_cast<Index>(neighbors.size());
    double total_b = 0.0;
    for (const auto& [nb, sus] : b.susceptance) total_b += sus;

    AffineDynamics dyn;
    if (b.kind == BusKind::Generator) {
      // theta+ = theta + ts*omega
      // omega+ = omega + ts/M * (Pin - D*omega - d - u - sum B (theta - theta_j))
      dyn.a = Matrix(2, 2);
      dyn.a << 1.0, ts, -ts * total_b / b.inertia, 1.0 - ts * b.damping / b.inertia;
      dyn.b_input = Matrix(2, 1);
      dyn.b_input << 0.0, -ts / b.inertia;
      dyn.b_dist = dyn.b_input;
      dyn.b_coupling = Matrix::Zero(2, deg);
      for (Index k = 0; k < deg; ++k)
        dyn.b_coupling(1, k) = ts * b.susceptance.at(neighbors[static_cast<size_t>(k)]) / b.inertia;
      dyn.c = Vector(2);
      dyn.c << 0.0, ts * b.injection / b.inertia;
      dyn.output = Matrix(1, 2);
      dyn.output << 1.0, 0.0;
    } else {
      // omega solved per bus from the algebraic balance, then theta+ = theta + ts*omega:
      // theta+ = theta + ts/D * (Pin - d - u - sum B (theta - theta_j))
      dyn.a = Matrix(1, 1);
      dyn.a << 1.0 - ts * total_b / b.damping;
      dyn.b_input = Matrix(1, 1);
      dyn.b_input << -ts / b.damping;
      dyn.b_dist = dyn.b_input;
      dyn.b_coupling = Matrix::Zero(1, deg);
      for (Index k = 0; k < deg; ++k)
        dyn.b_coupling(0, k) = ts * b.susceptance.at(neighbors[static_cast<size_t>(k)]) / b.damping;
      dyn.c = Vector(1);
      dyn.c << ts * b.injection / b.damping;
      dyn.output = Matrix(1, 1);
      dyn.output << 1.0;
    }
    subs.push_back(make_affine_subsystem(b.id, std::move(dyn), std::move(neighbors)));
  }
  return make_network(std::move(subs), ts);
}

}  // namespace agc
