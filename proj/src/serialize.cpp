#include "agc/serialize.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace agc {

json to_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<size_t>(i)][static_cast<size_t>(c)].get<double>();
  return m;
}

json to_json(const HPolytope& p) { return json{{"A", to_json(p.a_matrix)}, {"b", to_json(p.b_vector)}}; }

HPolytope hpolytope_from_json(const json& j) {
  return HPolytope(matrix_from_json(j.at("A")), vector_from_json(j.at("b")));
}

json to_json(const GridSpec& grid) {
  json axes = json::array();
  for (const auto& a : grid.axes) axes.push_back(json{{"lo", a.lo}, {"hi", a.hi}, {"count", a.count}});
  return json{{"axes", std::move(axes)}};
}

GridSpec gridspec_from_json(const json& j) {
  std::vector<GridAxis> axes;
  for (const auto& a : j.at("axes"))
    axes.push_back(GridAxis{a.at("lo").get<double>(), a.at("hi").get<double>(), a.at("count").get<int>()});
  return GridSpec(std::move(axes));
}

json to_json(const GainSampleSet& samples) {
  json holes = json::array();
  for (long h : samples.holes) holes.push_back(h);
  // +inf is not representable in JSON; holes carry the information.
  Vector finite = samples.values;
  for (long h : samples.holes) finite(h) = 0.0;
  return json{{"grid", to_json(samples.grid)},
              {"values", to_json(finite)},
              {"holes", std::move(holes)},
              {"crop", samples.crop}};
}

GainSampleSet samples_from_json(const json& j) {
  GainSampleSet out{gridspec_from_json(j.at("grid")), vector_from_json(j.at("values")), {}, j.at("crop").get<double>()};
  for (const auto& h : j.at("holes")) {
    out.holes.push_back(h.get<long>());
    out.values(out.holes.back()) = kInf;
  }
  return out;
}

json to_json(const EpigraphApprox& approx) {
  json pieces = json::array();
  for (const auto& p : approx.body.pieces) pieces.push_back(to_json(p));
  return json{{"kind", approx.kind == EpiKind::ConvexHull ? "convex-hull" : "monotone-cells"},
              {"pieces", std::move(pieces)},
              {"crop", approx.crop},
              {"domain_lo", to_json(approx.domain.lower)},
              {"domain_hi", to_json(approx.domain.upper)}};
}

EpigraphApprox epigraph_from_json(const json& j) {
  std::vector<HPolytope> pieces;
  for (const auto& p : j.at("pieces")) pieces.push_back(hpolytope_from_json(p));
  const EpiKind kind =
      j.at("kind").get<std::string>() == "convex-hull" ? EpiKind::ConvexHull : EpiKind::MonotoneCells;
  return EpigraphApprox(kind, PolytopeUnion(std::move(pieces)), j.at("crop").get<double>(),
                        Box(vector_from_json(j.at("domain_lo")), vector_from_json(j.at("domain_hi"))));
}

namespace {

void hash_mix(uint64_t& h, const double* data, Index count) {
  for (Index i = 0; i < count; ++i) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &data[i], sizeof(bits));
    h ^= bits;
    h *= 0x100000001b3ULL;  // FNV prime
  }
}

}  // namespace

uint64_t problem_hash(const RciProblem& prob, const Matrix& facets, const Vector& q0) {
  uint64_t h = 0xcbf29ce484222325ULL;
  const auto& dyn = *prob.subsystem.affine;
  for (const Matrix* m : {&dyn.a, &dyn.b_input, &dyn.b_coupling, &dyn.b_dist, &dyn.output, &facets})
    hash_mix(h, m->data(), m->size());
  for (const Vector* v : {&dyn.c, &prob.input_set.lower, &prob.input_set.upper,
                          &prob.disturbance_set.lower, &prob.disturbance_set.upper,
                          &prob.neighbor_bound, &q0})
    hash_mix(h, v->data(), v->size());
  return h;
}

json rci_to_json(const RciResult& result, const RciProblem& prob, const RciTemplate& tmpl) {
  const char* status = result.status == RciStatus::Invariant
                           ? "invariant"
                           : result.status == RciStatus::Empty ? "empty" : "not-converged";
  json j{{"P", to_json(result.set.a_matrix)},
         {"q", to_json(result.q)},
         {"status", status},
         {"iterations", result.iterations},
         {"facet_margins", to_json(result.facet_margins)},
         {"problem_hash", problem_hash(prob, tmpl.facets, tmpl.q0)}};
  if (result.set.dim() == 2) {
    json verts = json::array();
    for (const auto& v : polytope_vertices_lowdim(result.set)) verts.push_back(to_json(v));
    j["vertices"] = std::move(verts);
  }
  return j;
}

json to_json(const SearchResult& result) {
  json j{{"feasible", result.feasible}, {"nodes", result.nodes}};
  if (result.feasible) {
    j["y_max"] = to_json(result.params.y_max);
    j["objective"] = result.objective;
    j["pieces"] = result.pieces;
  } else {
    j["conflict"] = result.conflict;
  }
  return j;
}

json to_json(const ValidityOutcome& outcome) {
  json entries = json::array();
  for (const auto& e : outcome.entries)
    entries.push_back(json{{"subsystem", e.subsystem},
                           {"slack", e.hole ? json("hole") : json(e.slack)},
                           {"piece", e.piece}});
  return json{{"valid", outcome.valid}, {"y_max", to_json(outcome.params.y_max)}, {"entries", std::move(entries)}};
}

json to_json(const RefinementLog& log) {
  json iters = json::array();
  for (const auto& y : log.iterates) iters.push_back(to_json(y));
  return json{{"iterates", std::move(iters)},
              {"reason", log.reason == RefinementLog::Reason::Converged ? "converged" : "max-iters"}};
}

json to_json(const RunTrace& trace) {
  json sig;
  for (const auto& [name, v] : trace.signals) sig[name] = to_json(v);
  json j{{"scenario", trace.scenario}, {"Ts", trace.ts}, {"steps", trace.steps}, {"signals", std::move(sig)}};
  if (trace.halted_at) j["halted_at"] = *trace.halted_at;
  return j;
}

json to_json(const TraceVerdict& verdict) {
  json j{{"formula", verdict.formula}, {"holds", verdict.holds}, {"prefix", verdict.prefix}};
  if (verdict.first_violation) j["first_violation"] = *verdict.first_violation;
  if (verdict.prefix && verdict.holds) j["note"] = "holds-on-prefix";
  return j;
}

json to_json(const PipelineReport& report) {
  json buses = json::array();
  for (const auto& b : report.buses) {
    json jb{{"bus", b.bus_id},
            {"rci", json{{"P", to_json(b.rci.set.a_matrix)},
                         {"q", to_json(b.rci.q)},
                         {"iterations", b.rci.iterations}}},
            {"output_bound", b.output_bound_value},
            {"verification", json{{"pass_fraction", b.verification.pass_fraction},
                                  {"worst_margin", b.verification.worst_margin},
                                  {"checks", b.verification.checks}}}};
    if (b.samples) jb["samples"] = to_json(*b.samples);
    if (b.epi) jb["epigraph"] = to_json(*b.epi);
    buses.push_back(std::move(jb));
  }
  json scenarios = json::array();
  for (const auto& s : report.scenarios) {
    json verdicts = json::array();
    for (const auto& v : s.verdicts) verdicts.push_back(to_json(v));
    scenarios.push_back(json{{"scenario", s.trace.scenario},
                             {"steps", s.trace.steps},
                             {"halted", s.trace.halted_at.has_value()},
                             {"min_b", s.min_b},
                             {"rci_exit", s.rci_exit},
                             {"interventions", s.interventions},
                             {"verdicts", std::move(verdicts)}});
  }
  return json{{"contract", to_json(report.contract.y_max)},
              {"search", to_json(report.search)},
              {"refinement", to_json(report.refinement)},
              {"validity", to_json(report.validity)},
              {"buses", std::move(buses)},
              {"scenarios", std::move(scenarios)}};
}

NetworkConfig parse_network_config(const json& j) {
  NetworkConfig cfg;
  for (const auto& jb : j.at("buses")) {
    BusSpec bus;
    bus.id = jb.at("id").get<int>();
    const std::string kind = jb.at("kind").get<std::string>();
    if (kind == "generator") {
      bus.kind = BusKind::Generator;
      bus.inertia = jb.at("M").get<double>();
    } else if (kind == "load") {
      bus.kind = BusKind::Load;
    } else {
      throw Error("config: unknown bus kind '" + kind + "'");
    }
    bus.damping = jb.at("D").get<double>();
    bus.injection = jb.value("Pin", 0.0);
    cfg.buses.push_back(std::move(bus));
  }
  for (const auto& jl : j.at("lines")) {
    const int a = jl.at("i").get<int>();
    const int b = jl.at("j").get<int>();
    const double sus = jl.at("B").get<double>();
    for (auto& bus : cfg.buses) {
      if (bus.id == a) bus.susceptance[b] = sus;
      if (bus.id == b) bus.susceptance[a] = sus;
    }
  }
  const auto& sim = j.at("simulation");
  cfg.ts = sim.at("Ts").get<double>();
  cfg.horizon = sim.at("horizon").get<int>();

  for (const auto& [key, val] : j.at("bounds").items())
    cfg.bounds[std::stoi(key)] = BusBounds{val.at("u").get<double>(), val.at("d").get<double>()};

  if (j.contains("synthesis")) {
    const auto& s = j.at("synthesis");
    auto& syn = cfg.synthesis;
    syn.gen_facets = s.value("gen_facets", syn.gen_facets);
    syn.gen_theta_scale = s.value("gen_theta_scale", syn.gen_theta_scale);
    syn.gen_omega_scale = s.value("gen_omega_scale", syn.gen_omega_scale);
    syn.load_theta_scale = s.value("load_theta_scale", syn.load_theta_scale);
    syn.grid_count = s.value("grid_count", syn.grid_count);
    syn.ymax_upper = s.value("ymax_upper", syn.ymax_upper);
    syn.verify_density = s.value("verify_density", syn.verify_density);
    syn.refine_tol = s.value("refine_tol", syn.refine_tol);
    syn.refine_max_iters = s.value("refine_max_iters", syn.refine_max_iters);
    syn.rci_tol = s.value("rci_tol", syn.rci_tol);
    syn.rci_max_iters = s.value("rci_max_iters", syn.rci_max_iters);
    if (s.contains("epi_kind"))
      syn.epi_kind = s.at("epi_kind").get<std::string>() == "convex-hull" ? EpiKind::ConvexHull
                                                                          : EpiKind::MonotoneCells;
  }

  if (j.contains("supervisor")) {
    const auto& s = j.at("supervisor");
    auto& sup = cfg.supervisor;
    sup.kappa_step = s.value("kappa", sup.kappa_step);
    sup.filter.eps_active_rel = s.value("eps_active_rel", sup.filter.eps_active_rel);
    sup.filter.eps_active_abs = s.value("eps_active_abs", sup.filter.eps_active_abs);
    if (s.contains("kappa_per_bus"))
      for (const auto& [key, val] : s.at("kappa_per_bus").items())
        sup.kappa_per_bus[std::stoi(key)] = val.get<double>();
    if (s.contains("student")) {
      const auto& st = s.at("student");
      const std::string kind = st.value("kind", "proportional-frequency");
      if (kind == "zero")
        sup.student_kind = StudentKind::Zero;
      else if (kind == "proportional-frequency")
        sup.student_kind = StudentKind::ProportionalFrequency;
      else
        throw Error("config: default student kind must be zero or proportional-frequency");
      sup.k_omega = st.value("k_omega", 0.0);
      if (st.contains("saturation")) sup.saturation = st.at("saturation").get<double>();
    }
  }

  if (j.contains("scenarios")) {
    for (const auto& js : j.at("scenarios")) {
      ScenarioSpec sc;
      sc.name = js.at("name").get<std::string>();
      sc.horizon = js.value("horizon", cfg.horizon);
      sc.supervisor_on = js.value("supervisor", true);
      if (js.contains("events")) {
        for (const auto& je : js.at("events")) {
          DisturbanceEvent ev;
          ev.bus = je.at("bus").get<int>();
          if (je.contains("start_step"))
            ev.start_step = je.at("start_step").get<int>();
          else
            ev.start_step = static_cast<int>(std::lround(je.at("start_time").get<double>() / cfg.ts));
          ev.magnitude = je.at("magnitude").get<double>();
          const std::string kind = je.at("kind").get<std::string>();
          if (kind == "step-load")
            ev.kind = DisturbanceEvent::Kind::StepLoad;
          else if (kind == "step-injection")
            ev.kind = DisturbanceEvent::Kind::StepInjection;
          else
            throw Error("config: unknown event kind '" + kind + "'");
          sc.events.push_back(ev);
        }
      }
      if (js.contains("student_override")) {
        const auto& so = js.at("student_override");
        StudentController ctl;
        const std::string kind = so.at("kind").get<std::string>();
        if (kind == "zero") {
          ctl.kind = StudentKind::Zero;
        } else if (kind == "proportional-frequency") {
          ctl.kind = StudentKind::ProportionalFrequency;
          ctl.k_omega = so.value("k_omega", 0.0);
        } else if (kind == "scripted") {
          ctl.kind = StudentKind::Scripted;
          const double push = so.at("push").get<double>();
          ctl.script = [push](const Vector&, int) { return Vector::Constant(1, push); };
        } else {
          throw Error("config: unknown student kind '" + kind + "'");
        }
        sc.student_override = std::move(ctl);
      }
      cfg.scenarios.push_back(std::move(sc));
    }
  }

  if (j.contains("formulas"))
    for (const auto& f : j.at("formulas")) cfg.formulas.push_back(f.get<std::string>());
  return cfg;
}

NetworkConfig load_network_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config parse failure in " + path + ": " + e.what());
  }
  try {
    return parse_network_config(j);
  } catch (const json::exception& e) {
    throw Error("config schema failure in " + path + ": " + e.what());
  }
}

void write_artifact(const std::string& path, json payload) {
  payload["schema_version"] = kSchemaVersion;
  std::ofstream out(path);
  if (!out) throw Error("cannot write artifact: " + path);
  out << payload.dump(2) << "\n";
}

json read_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open artifact: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("artifact parse failure in " + path + ": " + e.what());
  }
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != kSchemaVersion)
    throw Error("artifact schema version mismatch in " + path);
  return j;
}

}  // namespace agc
