#include <doctest.h>

#include <random>

#include "agc/network.hpp"

using namespace agc;

namespace {

// Scalar affine system x+ = a x + bu u + by y + bd d + c, y = x.
Subsystem scalar_sub(int id, double a, double bu, double by, double bd, double c,
                     std::vector<int> neighbors) {
  AffineDynamics dyn;
  dyn.a = Matrix::Constant(1, 1, a);
  dyn.b_input = Matrix::Constant(1, 1, bu);
  dyn.b_coupling = neighbors.empty() ? Matrix(1, 0) : Matrix::Constant(1, 1, by);
  dyn.b_dist = Matrix::Constant(1, 1, bd);
  dyn.c = Vector::Constant(1, c);
  dyn.output = Matrix::Constant(1, 1, 1.0);
  return make_affine_subsystem(id, std::move(dyn), std::move(neighbors));
}

std::vector<BusSpec> nine_bus_specs() {
  // Standard 9-bus shape: three generators hanging off a six-bus load ring.
  std::vector<BusSpec> buses;
  auto gen = [](int id) {
    BusSpec b;
    b.id = id;
    b.kind = BusKind::Generator;
    b.inertia = 0.2;
    b.damping = 5.0;
    return b;
  };
  auto load = [](int id) {
    BusSpec b;
    b.id = id;
    b.kind = BusKind::Load;
    b.damping = 50.0;
    return b;
  };
  for (int id : {1, 2, 3}) buses.push_back(gen(id));
  for (int id : {4, 5, 6, 7, 8, 9}) buses.push_back(load(id));
  auto line = [&](int i, int j, double b) {
    for (auto& bus : buses) {
      if (bus.id == i) bus.susceptance[j] = b;
      if (bus.id == j) bus.susceptance[i] = b;
    }
  };
  line(1, 4, 5.0);
  line(4, 5, 5.0);
  line(4, 6, 5.0);
  line(5, 7, 5.0);
  line(6, 9, 5.0);
  line(7, 8, 5.0);
  line(8, 9, 5.0);
  line(2, 7, 5.0);
  line(3, 9, 5.0);
  return buses;
}

}  // namespace

TEST_CASE("step: equilibrium at the origin") {
  BusSpec gen;
  gen.id = 1;
  gen.kind = BusKind::Generator;
  gen.inertia = 0.2;
  gen.damping = 5.0;
  gen.susceptance[4] = 5.0;
  BusSpec load;
  load.id = 4;
  load.kind = BusKind::Load;
  load.damping = 50.0;
  load.susceptance[1] = 5.0;
  const auto net = build_microgrid({gen, load}, 0.01);
  const Subsystem& sub = net.by_id(1);
  const Vector next = step(sub, Vector::Zero(2), Vector::Zero(1), Vector::Zero(1), Vector::Zero(1));
  CHECK(next.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("step: scalar affine arithmetic") {
  // x+ = 0.5 x + d at x = 1, d = 0.1.
  const Subsystem sub = scalar_sub(0, 0.5, 0.0, 0.0, 1.0, 0.0, {});
  const Vector next = step(sub, Vector::Constant(1, 1.0), Vector(0), Vector::Constant(1, 0.0),
                           Vector::Constant(1, 0.1));
  CHECK(next(0) == doctest::Approx(0.6));
  // x+ = 0.5 x + 0.5 d gives 0.55 on the same inputs.
  const Subsystem half = scalar_sub(1, 0.5, 0.0, 0.0, 0.5, 0.0, {});
  CHECK(step(half, Vector::Constant(1, 1.0), Vector(0), Vector::Constant(1, 0.0),
             Vector::Constant(1, 0.1))(0) == doctest::Approx(0.55));
}

TEST_CASE("step: load bus integrates its injection") {
  BusSpec load;
  load.id = 7;
  load.kind = BusKind::Load;
  load.damping = 1.0;
  load.injection = 0.5;
  BusSpec gen;
  gen.id = 1;
  gen.kind = BusKind::Generator;
  gen.inertia = 0.1;
  gen.damping = 1.0;
  gen.susceptance[7] = 1.0;
  load.susceptance[1] = 1.0;
  const double ts = 0.01;
  const auto net = build_microgrid({gen, load}, ts);
  const Subsystem& sub = net.by_id(7);
  // theta+ = theta + ts * (Pin - coupling)/D with theta = theta_j = 0
  const Vector next = step(sub, Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), Vector::Zero(1));
  CHECK(next(0) == doctest::Approx(ts * 0.5));
}

TEST_CASE("step: dimension and finiteness errors") {
  const Subsystem sub = scalar_sub(0, 0.5, 0.0, 0.0, 1.0, 0.0, {});
  CHECK_THROWS_AS(step(sub, Vector::Zero(2), Vector(0), Vector::Zero(1), Vector::Zero(1)), Error);
  Vector bad = Vector::Constant(1, kInf);
  CHECK_THROWS_AS(step(sub, bad, Vector(0), Vector::Zero(1), Vector::Zero(1)), Error);
}

TEST_CASE("make_subsystem: violated conventions are rejected") {
  // Self loop.
  CHECK_THROWS_AS(scalar_sub(3, 0.5, 0, 0.1, 0, 0, {3}), Error);
  // h(0) != 0.
  AffineDynamics dyn;
  dyn.a = Matrix::Identity(1, 1);
  dyn.b_input = Matrix(1, 0);
  dyn.b_coupling = Matrix(1, 0);
  dyn.b_dist = Matrix(1, 0);
  dyn.c = Vector::Zero(1);
  dyn.output = Matrix::Constant(1, 1, 1.0);
  auto shifted_output = [](const Vector& x) { return Vector::Constant(1, x(0) + 1.0); };
  CHECK_THROWS_AS(make_subsystem(0, 1, 0, 0, 1, 0, {}, nullptr, shifted_output, std::nullopt), Error);
  // Affine disagreeing with the map.
  auto wrong_dyn = [](const Vector& x, const Vector&, const Vector&, const Vector&) {
    return Vector::Constant(1, 2.0 * x(0));
  };
  auto ident_output = [](const Vector& x) { return x; };
  CHECK_THROWS_AS(make_subsystem(0, 1, 0, 0, 1, 0, {}, wrong_dyn, ident_output, dyn), Error);
}

TEST_CASE("network_step: zero state maps to zero") {
  const auto net = make_network({scalar_sub(0, 0.5, 0, 0.25, 0, 0, {1}),
                                 scalar_sub(1, 0.5, 0, 0.25, 0, 0, {0})},
                                0.1);
  const std::vector<Vector> zeros = {Vector::Zero(1), Vector::Zero(1)};
  const auto res = network_step(net, zeros, zeros, zeros);
  CHECK(res.next_states[0](0) == 0.0);
  CHECK(res.next_states[1](0) == 0.0);
}

TEST_CASE("network_step: synchronous coupled update") {
  // x_i+ = 0.5 x_i + 0.25 y_j from (1, 0): outputs are computed first, so
  // the second subsystem sees y = 1, not the updated 0.5.
  const auto net = make_network({scalar_sub(0, 0.5, 0, 0.25, 0, 0, {1}),
                                 scalar_sub(1, 0.5, 0, 0.25, 0, 0, {0})},
                                0.1);
  const std::vector<Vector> x = {Vector::Constant(1, 1.0), Vector::Zero(1)};
  const std::vector<Vector> zero = {Vector::Zero(1), Vector::Zero(1)};
  const auto res = network_step(net, x, zero, zero);
  CHECK(res.next_states[0](0) == doctest::Approx(0.5));
  CHECK(res.next_states[1](0) == doctest::Approx(0.25));
}

TEST_CASE("network_step: storage order does not change trajectories") {
  auto a = scalar_sub(0, 0.5, 0, 0.25, 0, 0, {1});
  auto b = scalar_sub(1, 0.7, 0, -0.1, 0, 0, {0});
  const auto net1 = make_network({a, b}, 0.1);
  const auto net2 = make_network({b, a}, 0.1);

  std::vector<Vector> x1 = {Vector::Constant(1, 0.3), Vector::Constant(1, -0.8)};
  std::vector<Vector> x2 = {x1[1], x1[0]};
  const std::vector<Vector> zero = {Vector::Zero(1), Vector::Zero(1)};
  for (int t = 0; t < 20; ++t) {
    x1 = network_step(net1, x1, zero, zero).next_states;
    x2 = network_step(net2, x2, zero, zero).next_states;
  }
  CHECK(x1[0](0) == x2[1](0));  // bitwise: same additions in the same order per subsystem
  CHECK(x1[1](0) == x2[0](0));
}

TEST_CASE("network_step: missing entries rejected") {
  const auto net = make_network({scalar_sub(0, 0.5, 0, 0, 0, 0, {})}, 0.1);
  CHECK_THROWS_AS(network_step(net, {}, {}, {}), Error);
}

TEST_CASE("build_microgrid: nine-bus dimensions") {
  const auto net = build_microgrid(nine_bus_specs(), 0.01);
  REQUIRE(net.subsystems.size() == 9);
  Index total_states = 0;
  for (const auto& sub : net.subsystems) total_states += sub.state_dim;
  CHECK(total_states == 12);  // 3 generators x 2 + 6 loads x 1
  CHECK(net.by_id(1).state_dim == 2);
  CHECK(net.by_id(5).state_dim == 1);
}

TEST_CASE("build_microgrid: isolated generator eigenvalues") {
  BusSpec gen;
  gen.id = 1;
  gen.kind = BusKind::Generator;
  gen.inertia = 0.2;
  gen.damping = 5.0;
  const double ts = 0.01;
  const auto net = build_microgrid({gen}, ts);
  const Matrix a = net.by_id(1).affine->a;
  const Eigen::VectorXcd eigs = Eigen::EigenSolver<Matrix>(a).eigenvalues();
  std::vector<double> re = {eigs(0).real(), eigs(1).real()};
  std::sort(re.begin(), re.end());
  CHECK(re[1] == doctest::Approx(1.0));
  CHECK(re[0] == doctest::Approx(1.0 - ts * gen.damping / gen.inertia));
}

TEST_CASE("build_microgrid: symmetric line appears with opposite-sign coupling") {
  auto buses = nine_bus_specs();
  const auto net = build_microgrid(buses, 0.01);
  // Generator 1 -- load 4: own theta enters A negatively, neighbor theta
  // positively, scaled by the same susceptance over the bus's own inertia
  // or damping.
  const auto& g = net.by_id(1);
  const auto& l = net.by_id(4);
  const double ts = 0.01;
  CHECK(g.affine->a(1, 0) == doctest::Approx(-ts * 5.0 / 0.2));
  const Index pos_of_1 = static_cast<Index>(
      std::find(l.neighbors.begin(), l.neighbors.end(), 1) - l.neighbors.begin());
  CHECK(l.affine->b_coupling(0, pos_of_1) == doctest::Approx(ts * 5.0 / 50.0));
  CHECK(l.affine->a(0, 0) == doctest::Approx(1.0 - ts * 15.0 / 50.0));
}

TEST_CASE("build_microgrid: validation errors") {
  auto buses = nine_bus_specs();
  buses[0].inertia = 0.0;
  CHECK_THROWS_AS(build_microgrid(buses, 0.01), Error);

  buses = nine_bus_specs();
  CHECK_THROWS_AS(build_microgrid(buses, 0.2), Error);  // ts cap
  CHECK_THROWS_AS(build_microgrid(buses, 0.0), Error);

  // Disconnect bus 3 (drop its only line).
  buses = nine_bus_specs();
  for (auto& b : buses) {
    b.susceptance.erase(3);
    if (b.id == 3) b.susceptance.clear();
  }
  CHECK_THROWS_AS(build_microgrid(buses, 0.01), Error);
}

TEST_CASE("microgrid equilibrium and coupling locality") {
  const auto net = build_microgrid(nine_bus_specs(), 0.01);
  const size_t n = net.subsystems.size();
  std::vector<Vector> states(n), zero_u(n), zero_d(n);
  for (size_t i = 0; i < n; ++i) {
    states[i] = Vector::Zero(net.subsystems[i].state_dim);
    zero_u[i] = Vector::Zero(1);
    zero_d[i] = Vector::Zero(1);
  }
  // Balanced (all-zero) injections: the origin is a fixed point.
  auto res = network_step(net, states, zero_u, zero_d);
  for (const auto& x : res.next_states) CHECK(x.lpNorm<Eigen::Infinity>() == 0.0);

  // Locality: perturbing a non-neighbor's state leaves a subsystem's next
  // state untouched (bus 1's only neighbor is 4; perturb 9's state).
  std::vector<Vector> perturbed = states;
  perturbed[net.index_of(9)](0) = 0.5;
  const auto res1 = network_step(net, states, zero_u, zero_d);
  const auto res2 = network_step(net, perturbed, zero_u, zero_d);
  const size_t i1 = net.index_of(1);
  CHECK((res1.next_states[i1] - res2.next_states[i1]).lpNorm<Eigen::Infinity>() == 0.0);
  // ...while its neighbor 4 does react.
  const size_t i4 = net.index_of(4);
  std::vector<Vector> perturbed4 = states;
  perturbed4[net.index_of(1)](0) = 0.5;
  const auto res3 = network_step(net, perturbed4, zero_u, zero_d);
  CHECK((res1.next_states[i4] - res3.next_states[i4]).lpNorm<Eigen::Infinity>() > 0.0);
}

TEST_CASE("affine realization matches a hand-written dynamics map") {
  // Cross-check the generator affine matrices against the continuous model
  // discretized by hand.
  BusSpec gen;
  gen.id = 1;
  gen.kind = BusKind::Generator;
  gen.inertia = 0.25;
  gen.damping = 4.0;
  gen.injection = 0.1;
  gen.susceptance[2] = 3.0;
  BusSpec load;
  load.id = 2;
  load.kind = BusKind::Load;
  load.damping = 20.0;
  load.susceptance[1] = 3.0;
  const double ts = 0.01;
  const auto net = build_microgrid({gen, load}, ts);
  const auto& sub = net.by_id(1);

  auto by_hand = [&](const Vector& x, const Vector& y, const Vector& u, const Vector& d) {
    Vector next(2);
    next(0) = x(0) + ts * x(1);
    next(1) = x(1) + ts / gen.inertia *
                         (gen.injection - gen.damping * x(1) - d(0) - u(0) - 3.0 * (x(0) - y(0)));
    return next;
  };
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Vector x(2), y(1), u(1), d(1);
    x << unit(rng), unit(rng);
    y << unit(rng);
    u << unit(rng);
    d << unit(rng);
    const Vector a = step(sub, x, y, u, d);
    const Vector b = by_hand(x, y, u, d);
    CHECK((a - b).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}
