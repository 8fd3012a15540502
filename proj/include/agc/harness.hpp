#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agc/contract.hpp"
#include "agc/epigraph.hpp"
#include "agc/invariant.hpp"
#include "agc/network.hpp"
#include "agc/stl.hpp"
#include "agc/supervisor.hpp"
#include "agc/types.hpp"

namespace agc {

struct DisturbanceEvent {
  enum class Kind { StepLoad, StepInjection };
  int bus = 0;
  int start_step = 0;
  double magnitude = 0.0;
  Kind kind = Kind::StepLoad;
};

struct ScenarioSpec {
  std::string name;
  int horizon = 0;
  bool supervisor_on = true;
  std::vector<DisturbanceEvent> events;
  std::optional<StudentController> student_override;  // replaces the default per-bus student
};

/// Symmetric admissible boxes per bus: |u| <= input, |d| <= disturbance.
struct BusBounds {
  double input = 0.0;
  double disturbance = 0.0;
};

struct SupervisorSettings {
  double kappa_step = 0.5;
  FilterConfig filter;
  StudentKind student_kind = StudentKind::ProportionalFrequency;
  double k_omega = 0.0;
  std::optional<double> saturation;  // half-width; defaults to the input bound
  std::map<int, double> kappa_per_bus;
};

struct SynthesisSettings {
  int gen_facets = 32;            // tangent facets on the generator ellipse template
  double gen_theta_scale = 0.01;  // intended phase-angle extent of the template
  double gen_omega_scale = 0.005; // template frequency extent (the safety bound)
  double load_theta_scale = 0.01;
  int grid_count = 5;
  double ymax_upper = 0.01;  // assumption-bound sampling domain per neighbor axis
  int verify_density = 10;
  double refine_tol = 1e-8;
  int refine_max_iters = 20;
  double rci_tol = 1e-9;
  int rci_max_iters = 60000;
  EpiKind epi_kind = EpiKind::MonotoneCells;
};

struct NetworkConfig {
  std::vector<BusSpec> buses;
  double ts = 0.01;
  int horizon = 1000;
  std::map<int, BusBounds> bounds;
  SynthesisSettings synthesis;
  SupervisorSettings supervisor;
  std::vector<ScenarioSpec> scenarios;
  std::vector<std::string> formulas;  // pSTL text, checked on supervised runs
};

/// RCI template for one bus: an interval for loads; for generators the
/// tangent polytope of the bus's own Lyapunov ellipse, scaled so the
/// frequency extent equals the configured safety bound.
RciTemplate bus_template(const NetworkSystem& net, const NetworkConfig& config, const BusSpec& bus);

/// RCI problem for one bus with the neighbor bound left at zero.
RciProblem bus_problem(const NetworkSystem& net, const NetworkConfig& config, int bus_id);

struct RunTrace {
  std::string scenario;
  double ts = 0.0;
  int steps = 0;
  std::map<std::string, Vector> signals;  // th<i>, w<i>, u0<i>, us<i>, b<i>, iv<i>, d<i>
  std::optional<int> halted_at;           // filter infeasibility step

  stl::Trace as_stl_trace() const;
};

struct TraceVerdict {
  std::string formula;
  bool holds = false;
  bool prefix = false;  // verdict from a truncated (finite-trace) window
  std::optional<Index> first_violation;
};

/// Scripted deterministic closed-loop run. Barriers are used for filtering
/// when the scenario enables the supervisor and for recording b either way.
RunTrace simulate(const NetworkSystem& net, const NetworkConfig& config, const ScenarioSpec& scenario,
                  const std::map<int, Cbf>& barriers);

std::vector<TraceVerdict> verify_trace(const RunTrace& trace, const std::vector<std::string>& formulas);

struct BusArtifact {
  int bus_id = 0;
  std::optional<GainSampleSet> samples;  // absent for neighborless buses
  std::optional<EpigraphApprox> epi;
  RciResult rci;
  RciVerification verification;
  double output_bound_value = 0.0;
};

struct ScenarioOutcome {
  RunTrace trace;
  std::vector<TraceVerdict> verdicts;
  double min_b = kInf;
  bool rci_exit = false;
  long interventions = 0;
};

struct PipelineReport {
  ContractParams contract;  // reported bound vector
  SearchResult search;
  RefinementLog refinement;
  ValidityOutcome validity;
  std::vector<BusArtifact> buses;
  std::vector<ScenarioOutcome> scenarios;
};

class PipelineError : public Error {
 public:
  PipelineError(std::string stage_name, const std::string& msg)
      : Error("[" + stage_name + "] " + msg), stage(std::move(stage_name)) {}
  std::string stage;
};

/// Full synthesis chain: gain sampling per bus, epigraph approximation,
/// contract search, value-iteration refinement, final RCIs at the refined
/// bounds, independent verification, then the configured scenarios.
PipelineReport run_pipeline(const NetworkConfig& config);

/// Barriers from the report's final RCIs at the configured decay rates.
std::map<int, Cbf> barriers_from_report(const NetworkConfig& config, const PipelineReport& report);

struct SmallGainDemo {
  GainFamily family;  // exact half-plane epigraphs of the two linear gains
  SearchResult search;
  std::optional<SmallGainBounds> closed_form;
};

/// Two-system interconnection: builds exact epigraph bodies for the linear
/// gains and solves the contract search next to the closed form.
SmallGainDemo demo_small_gain(double mu1, double mu2, double nu1, double nu2, double d1, double d2);

// Plot-data emission: one CSV per signal with columns step,time_s,value.
void emit_trace_csv(const RunTrace& trace, const std::string& directory);

}  // namespace agc
