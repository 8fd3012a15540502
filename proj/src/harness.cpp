#include "agc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace agc {

RciTemplate bus_template(const NetworkSystem& net, const NetworkConfig& config, const BusSpec& bus) {
  const auto& syn = config.synthesis;
  if (bus.kind == BusKind::Load) {
    Matrix p(2, 1);
    p << 1.0, -1.0;
    Vector q(2);
    q << syn.load_theta_scale, syn.load_theta_scale;
    return RciTemplate(p, q);
  }
  Vector extents(2);
  extents << syn.gen_theta_scale, syn.gen_omega_scale;
  return lyapunov_ellipse_template(net.by_id(bus.id).affine->a, extents, syn.gen_facets);
}

RciProblem bus_problem(const NetworkSystem& net, const NetworkConfig& config, int bus_id) {
  const Subsystem& sub = net.by_id(bus_id);
  auto it = config.bounds.find(bus_id);
  if (it == config.bounds.end())
    throw Error("bus_problem: no bounds configured for bus " + std::to_string(bus_id));
  RciProblem prob;
  prob.subsystem = sub;
  prob.input_set = Box::centered(Vector::Constant(sub.input_dim, it->second.input));
  prob.disturbance_set = Box::centered(Vector::Constant(sub.dist_dim, it->second.disturbance));
  prob.neighbor_bound = Vector::Zero(sub.coupling_dim);
  return prob;
}

stl::Trace RunTrace::as_stl_trace() const {
  if (steps < 1) throw Error("RunTrace: empty trace");
  return stl::Trace(ts, signals);
}

namespace {

StudentController bus_student(const NetworkConfig& config, const ScenarioSpec& scenario,
                              const Subsystem& sub, double input_bound) {
  StudentController ctl;
  if (scenario.student_override) {
    ctl = *scenario.student_override;
  } else {
    ctl.kind = config.supervisor.student_kind;
    ctl.k_omega = config.supervisor.k_omega;
  }
  const double sat = config.supervisor.saturation.value_or(input_bound);
  ctl.saturation = Box::centered(Vector::Constant(sub.input_dim, std::min(sat, input_bound)));
  return ctl;
}

void validate_scenario(const NetworkConfig& config, const ScenarioSpec& scenario) {
  for (const auto& ev : scenario.events) {
    if (ev.start_step < 0 || ev.start_step >= scenario.horizon)
      throw Error("scenario '" + scenario.name + "': event start outside horizon");
    auto it = config.bounds.find(ev.bus);
    if (it == config.bounds.end())
      throw Error("scenario '" + scenario.name + "': event on unknown bus " + std::to_string(ev.bus));
    if (std::abs(ev.magnitude) > it->second.disturbance + 1e-12)
      throw Error("scenario '" + scenario.name + "': event magnitude exceeds the declared disturbance bound");
  }
}

}  // namespace

RunTrace simulate(const NetworkSystem& net, const NetworkConfig& config, const ScenarioSpec& scenario,
                  const std::map<int, Cbf>& barriers) {
  validate_scenario(config, scenario);
  const size_t n = net.subsystems.size();
  if (scenario.supervisor_on)
    for (const auto& sub : net.subsystems)
      if (!barriers.count(sub.id))
        throw Error("simulate: supervisor on but no barrier for bus " + std::to_string(sub.id));

  std::vector<StudentController> students;
  std::vector<Box> input_boxes, dist_boxes;
  for (const auto& sub : net.subsystems) {
    const auto& bb = config.bounds.at(sub.id);
    students.push_back(bus_student(config, scenario, sub, bb.input));
    input_boxes.push_back(Box::centered(Vector::Constant(sub.input_dim, bb.input)));
    dist_boxes.push_back(Box::centered(Vector::Constant(sub.dist_dim, bb.disturbance)));
  }

  std::map<std::string, std::vector<double>> sig;
  std::vector<Vector> states(n);
  for (size_t i = 0; i < n; ++i) states[i] = Vector::Zero(net.subsystems[i].state_dim);

  RunTrace trace;
  trace.scenario = scenario.name;
  trace.ts = net.ts;

  int completed = 0;
  for (int t = 0; t < scenario.horizon; ++t) {
    std::vector<Vector> outputs(n);
    for (size_t i = 0; i < n; ++i) outputs[i] = subsystem_output(net.subsystems[i], states[i]);

    std::vector<Vector> us(n), ds(n);
    bool halted = false;
    for (size_t i = 0; i < n; ++i) {
      const Subsystem& sub = net.subsystems[i];

      double d_val = 0.0;
      for (const auto& ev : scenario.events) {
        if (ev.bus != sub.id || t < ev.start_step) continue;
        d_val += ev.kind == DisturbanceEvent::Kind::StepLoad ? ev.magnitude : -ev.magnitude;
      }
      ds[i] = Vector::Constant(sub.dist_dim, d_val);

      const Vector y_n = net.stack_neighbor_outputs(i, outputs);
      const Vector u0 = student(students[i], states[i], t);
      Vector u_star = u0;
      bool intervened = false;
      if (scenario.supervisor_on) {
        // The scripted disturbance is treated as measured: a point box.
        const Box d_point(ds[i], ds[i]);
        try {
          const FilterResult fr = cbf_filter(barriers.at(sub.id), sub, states[i], y_n, d_point, u0,
                                             input_boxes[i], config.supervisor.filter);
          u_star = fr.u_star;
          intervened = fr.intervened;
        } catch (const FilterInfeasible&) {
          trace.halted_at = t;
          halted = true;
          break;
        }
      }
      us[i] = u_star;

      const std::string id = std::to_string(sub.id);
      sig["th" + id].push_back(outputs[i](0));
      sig["u0" + id].push_back(u0(0));
      sig["us" + id].push_back(u_star(0));
      sig["iv" + id].push_back(intervened ? 1.0 : 0.0);
      sig["d" + id].push_back(d_val);
      if (auto bit = barriers.find(sub.id); bit != barriers.end())
        sig["b" + id].push_back(cbf_value(bit->second, states[i]));
    }
    if (halted) {
      // Drop any partially recorded step.
      for (auto& [name, v] : sig) v.resize(static_cast<size_t>(completed));
      break;
    }

    // Frequencies: generator state or the load bus's algebraic balance.
    for (size_t i = 0; i < n; ++i) {
      const Subsystem& sub = net.subsystems[i];
      const std::string id = std::to_string(sub.id);
      double w;
      if (sub.state_dim == 2) {
        w = states[i](1);
      } else {
        const BusSpec& bus = *std::find_if(config.buses.begin(), config.buses.end(),
                                           [&](const BusSpec& b) { return b.id == sub.id; });
        std::map<int, double> nb_theta;
        for (int nb : sub.neighbors) nb_theta[nb] = outputs[net.index_of(nb)](0);
        w = load_bus_frequency(bus, outputs[i](0), nb_theta, us[i](0), ds[i](0));
      }
      sig["w" + id].push_back(w);
    }

    states = network_step(net, states, us, ds).next_states;
    ++completed;
  }

  trace.steps = completed;
  if (completed < 1) throw Error("simulate: no steps recorded");
  for (auto& [name, v] : sig)
    trace.signals[name] = Eigen::Map<Vector>(v.data(), static_cast<Index>(v.size()));
  return trace;
}

std::vector<TraceVerdict> verify_trace(const RunTrace& trace, const std::vector<std::string>& formulas) {
  const stl::Trace tr = trace.as_stl_trace();
  std::vector<TraceVerdict> out;
  for (const auto& text : formulas) {
    const stl::Formula f = stl::parse_formula(text);
    TraceVerdict v;
    v.formula = text;
    stl::EvalMeta meta;
    v.holds = stl::evaluate(f, tr, 0, &meta);
    v.prefix = meta.truncated;
    if (!v.holds) v.first_violation = stl::first_failure(f, tr);
    out.push_back(std::move(v));
  }
  return out;
}

std::map<int, Cbf> barriers_from_report(const NetworkConfig& config, const PipelineReport& report) {
  std::map<int, Cbf> out;
  for (const auto& bus : report.buses) {
    double kappa = config.supervisor.kappa_step;
    if (auto it = config.supervisor.kappa_per_bus.find(bus.bus_id);
        it != config.supervisor.kappa_per_bus.end())
      kappa = it->second;
    out.emplace(bus.bus_id, Cbf(bus.rci.set.a_matrix, bus.rci.q, kappa));
  }
  return out;
}

PipelineReport run_pipeline(const NetworkConfig& config) {
  PipelineReport report;

  NetworkSystem net = [&] {
    try {
      NetworkSystem n = build_microgrid(config.buses, config.ts);
      for (const auto& sub : n.subsystems)
        if (!config.bounds.count(sub.id))
          throw Error("no bounds configured for bus " + std::to_string(sub.id));
      for (const auto& sc : config.scenarios) validate_scenario(config, sc);
      return n;
    } catch (const Error& e) {
      throw PipelineError("config", e.what());
    }
  }();

  const auto& syn = config.synthesis;
  const size_t n = net.subsystems.size();
  RciOptions gain_opts = tight_options();
  gain_opts.tol = syn.rci_tol;
  gain_opts.max_iters = syn.rci_max_iters;

  // Gain sampling and epigraph approximation per bus.
  std::vector<BusArtifact> buses(n);
  std::vector<std::function<double(const Vector&)>> callables(n);
  GainFamily family;
  family.gains.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const Subsystem& sub = net.subsystems[i];
    const BusSpec& spec = *std::find_if(config.buses.begin(), config.buses.end(),
                                        [&](const BusSpec& b) { return b.id == sub.id; });
    buses[i].bus_id = sub.id;
    const RciTemplate tmpl = bus_template(net, config, spec);
    const RciProblem base = bus_problem(net, config, sub.id);
    callables[i] = [base, tmpl, gain_opts](const Vector& y) {
      return gain_evaluate(base, tmpl, y, gain_opts);
    };

    try {
      if (sub.coupling_dim == 0) {
        // Neighborless bus: the gain is one number; a single interval piece.
        const double v = callables[i](Vector());
        if (std::isinf(v)) throw Error("gain has no invariant set");
        const double crop = 2.0 * std::max(v, 1e-12);
        Matrix a(2, 1);
        a << 1.0, -1.0;
        Vector b(2);
        b << crop, -v;
        buses[i].epi = EpigraphApprox(syn.epi_kind, PolytopeUnion({HPolytope(a, b)}), crop,
                                      Box(Vector(0), Vector(0)));
      } else {
        std::vector<GridAxis> axes(static_cast<size_t>(sub.coupling_dim),
                                   GridAxis{0.0, syn.ymax_upper, syn.grid_count});
        buses[i].samples = sample_gain(callables[i], GridSpec(axes));
        buses[i].epi = syn.epi_kind == EpiKind::MonotoneCells
                           ? monotone_cells_approx(*buses[i].samples)
                           : hull_inner_approx(*buses[i].samples);
      }
    } catch (const Error& e) {
      throw PipelineError("gains", "bus " + std::to_string(sub.id) + ": " + e.what());
    }

    auto& gain = family.gains[i];
    gain.approx = buses[i].epi;
    for (int nb : sub.neighbors) gain.neighbors.push_back(static_cast<int>(net.index_of(nb)));
  }

  // Contract search over the approximations.
  report.search = search_contract(family);
  if (!report.search.feasible) {
    std::string buses_str;
    for (int c : report.search.conflict)
      buses_str += (buses_str.empty() ? "" : ", ") + std::to_string(net.subsystems[static_cast<size_t>(c)].id);
    throw PipelineError("contract", "no valid contract within the sampled domain (conflict: " +
                                        buses_str + ")");
  }

  // Value-iteration refinement through the callable gains. The reported
  // bounds are the penultimate iterate, so the final RCIs' output bounds
  // (the last iterate) satisfy them with certainty.
  GainFamily callable_family;
  callable_family.gains.resize(n);
  for (size_t i = 0; i < n; ++i) {
    callable_family.gains[i].neighbors = family.gains[i].neighbors;
    callable_family.gains[i].callable = callables[i];
  }
  try {
    report.refinement = refine(report.search.params, callable_family, syn.refine_tol,
                               syn.refine_max_iters);
  } catch (const Error& e) {
    throw PipelineError("refine", e.what());
  }
  const auto& iters = report.refinement.iterates;
  report.contract =
      ContractParams(iters.size() >= 2 ? iters[iters.size() - 2] : iters.front());
  report.validity = check_validity(report.contract, callable_family, 1e-9);
  if (!report.validity.valid) throw PipelineError("refine", "refined contract failed validity");

  // Final invariant sets at the contract bounds, then independent checks.
  for (size_t i = 0; i < n; ++i) {
    const Subsystem& sub = net.subsystems[i];
    const BusSpec& spec = *std::find_if(config.buses.begin(), config.buses.end(),
                                        [&](const BusSpec& b) { return b.id == sub.id; });
    RciProblem prob = bus_problem(net, config, sub.id);
    prob.neighbor_bound = callable_family.neighbor_projection(static_cast<int>(i), report.contract.y_max);
    const RciResult res = compute_rci(prob, bus_template(net, config, spec), gain_opts);
    if (res.status != RciStatus::Invariant)
      throw PipelineError("rci", "bus " + std::to_string(sub.id) + ": no invariant set at the contract bounds");
    buses[i].rci = res;
    buses[i].output_bound_value = output_bound(res.set, sub.affine->output.row(0).transpose());

    buses[i].verification = verify_rci(res.set, prob, syn.verify_density);
    if (buses[i].verification.pass_fraction < 1.0)
      throw PipelineError("verify", "bus " + std::to_string(sub.id) + ": grid verification failed (worst margin " +
                                        std::to_string(buses[i].verification.worst_margin) + ")");
  }
  report.buses = std::move(buses);

  // Configured scenarios: simulate, then monitor the configured formulas.
  const std::map<int, Cbf> barriers = barriers_from_report(config, report);
  for (const auto& scenario : config.scenarios) {
    ScenarioOutcome outcome;
    outcome.trace = simulate(net, config, scenario, barriers);
    if (scenario.supervisor_on) outcome.verdicts = verify_trace(outcome.trace, config.formulas);
    for (const auto& sub : net.subsystems) {
      const auto it = outcome.trace.signals.find("b" + std::to_string(sub.id));
      if (it == outcome.trace.signals.end() || it->second.size() == 0) continue;
      outcome.min_b = std::min(outcome.min_b, it->second.minCoeff());
      const auto iv = outcome.trace.signals.find("iv" + std::to_string(sub.id));
      if (iv != outcome.trace.signals.end()) outcome.interventions += static_cast<long>(iv->second.sum());
    }
    outcome.rci_exit = outcome.min_b < 0.0;
    report.scenarios.push_back(std::move(outcome));
  }
  return report;
}

SmallGainDemo demo_small_gain(double mu1, double mu2, double nu1, double nu2, double d1, double d2) {
  for (double v : {mu1, mu2, nu1, nu2, d1, d2})
    if (v < 0.0 || !std::isfinite(v)) throw Error("demo_small_gain: arguments must be nonnegative");

  SmallGainDemo demo;
  demo.closed_form = small_gain_closed_form(mu1, mu2, nu1, nu2, d1, d2);

  // Crop well above any bound of interest; the closed form sizes it when
  // the loop gain admits one.
  double crop = 10.0 * (1.0 + mu1 * d1 + mu2 * d2);
  if (demo.closed_form) crop = std::max(crop, 4.0 * (1.0 + std::max(demo.closed_form->y1, demo.closed_form->y2)));

  // Exact epigraph of a linear gain lambda(x) = offset + slope * x over
  // [0, crop]^2: one convex piece.
  auto linear_epi = [crop](double offset, double slope) {
    Matrix a(4, 2);
    Vector b(4);
    a << slope, -1.0,  //  y >= offset + slope x
        -1.0, 0.0,     //  x >= 0
        1.0, 0.0,      //  x <= crop
        0.0, 1.0;      //  y <= crop
    b << -offset, 0.0, crop, crop;
    return EpigraphApprox(EpiKind::ConvexHull, PolytopeUnion({HPolytope(a, b)}), crop,
                          Box(Vector::Zero(1), Vector::Constant(1, crop)));
  };

  demo.family.gains.resize(2);
  demo.family.gains[0].neighbors = {1};
  demo.family.gains[0].approx = linear_epi(mu1 * d1, nu1);
  demo.family.gains[0].callable = [=](const Vector& y) { return mu1 * d1 + nu1 * y(0); };
  demo.family.gains[1].neighbors = {0};
  demo.family.gains[1].approx = linear_epi(mu2 * d2, nu2);
  demo.family.gains[1].callable = [=](const Vector& y) { return mu2 * d2 + nu2 * y(0); };

  demo.search = search_contract(demo.family);
  return demo;
}

void emit_trace_csv(const RunTrace& trace, const std::string& directory) {
  namespace fs = std::filesystem;
  fs::create_directories(directory);
  for (const auto& [name, values] : trace.signals) {
    std::ofstream out(fs::path(directory) / ("sig_" + name + ".csv"));
    if (!out) throw Error("emit_trace_csv: cannot write in " + directory);
    out << "step,time_s,value\n";
    out.precision(17);
    for (Index t = 0; t < values.size(); ++t)
      out << t << "," << static_cast<double>(t) * trace.ts << "," << values(t) << "\n";
  }
}

}  // namespace agc
