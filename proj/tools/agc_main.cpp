// Command-line front end: every synthesis and verification stage reads and
// writes JSON artifacts so the stages can be run independently or as one
// pipeline. Exit codes: 0 success, 2 infeasible contract, 3 verification
// failure, 4 configuration error, 1 anything else.

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "agc/serialize.hpp"

namespace fs = std::filesystem;
using namespace agc;

namespace {

constexpr int kExitInfeasible = 2;
constexpr int kExitVerification = 3;
constexpr int kExitConfig = 4;

Vector parse_csv_vector(const std::string& text) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  Vector v(static_cast<Index>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) v(static_cast<Index>(i)) = vals[i];
  return v;
}

struct GainSetup {
  NetworkSystem net;
  RciProblem problem;
  RciTemplate tmpl;
  RciOptions opts;
};

GainSetup gain_setup(const NetworkConfig& config, int bus_id) {
  NetworkSystem net = build_microgrid(config.buses, config.ts);
  const BusSpec& spec = *std::find_if(config.buses.begin(), config.buses.end(),
                                      [&](const BusSpec& b) { return b.id == bus_id; });
  RciOptions opts = tight_options();
  opts.tol = config.synthesis.rci_tol;
  opts.max_iters = config.synthesis.rci_max_iters;
  return GainSetup{net, bus_problem(net, config, bus_id), bus_template(net, config, spec), opts};
}

int run_demo_smallgain(double mu1, double mu2, double nu1, double nu2, double d1, double d2,
                       const std::string& out_dir) {
  const SmallGainDemo demo = demo_small_gain(mu1, mu2, nu1, nu2, d1, d2);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    json region{{"epigraphs",
                 json::array({json{{"offset", mu1 * d1}, {"slope", nu1}},
                              json{{"offset", mu2 * d2}, {"slope", nu2}}})},
                {"search", to_json(demo.search)}};
    if (demo.closed_form)
      region["closed_form"] = json::array({demo.closed_form->y1, demo.closed_form->y2});
    write_artifact((fs::path(out_dir) / "smallgain.json").string(), std::move(region));
  }
  if (!demo.search.feasible) {
    std::cout << "infeasible: nu1*nu2 = " << nu1 * nu2 << " admits no certificate\n";
    return kExitInfeasible;
  }
  std::cout << "contract: y1 = " << demo.search.params.y_max(0)
            << ", y2 = " << demo.search.params.y_max(1) << "\n";
  if (demo.closed_form)
    std::cout << "closed form: y1 = " << demo.closed_form->y1 << ", y2 = " << demo.closed_form->y2
              << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"assume-guarantee contract synthesis and invariance toolkit"};
  app.require_subcommand(1);

  double tol = 0.0;
  app.add_option("--tol", tol, "feasibility tolerance override");

  std::string config_path, out_dir = ".", samples_path, epi_path, contract_path, rci_path,
              trace_path, scenario_name, ymax_text, kind = "cells";
  int bus_id = 0, grid_count = 0, density = 10;
  bool no_supervisor = false;
  std::vector<std::string> formula_texts;
  double mu1 = 1, mu2 = 1, nu1 = 0.5, nu2 = 0.5, d1 = 1, d2 = 1;

  auto* demo = app.add_subcommand("demo", "worked demonstrations");
  auto* smallgain = demo->add_subcommand("smallgain", "two-system interconnection");
  smallgain->add_option("--mu1", mu1);
  smallgain->add_option("--mu2", mu2);
  smallgain->add_option("--nu1", nu1);
  smallgain->add_option("--nu2", nu2);
  smallgain->add_option("--d1", d1);
  smallgain->add_option("--d2", d2);
  smallgain->add_option("--out", out_dir);

  auto* gains = app.add_subcommand("gains", "gain-function sampling");
  auto* gains_sample = gains->add_subcommand("sample", "sample one bus's gain on a grid");
  gains_sample->add_option("--config", config_path)->required();
  gains_sample->add_option("--bus", bus_id)->required();
  gains_sample->add_option("--out", samples_path)->required();
  gains_sample->add_option("--grid", grid_count, "per-axis point count");

  auto* epi = app.add_subcommand("epi", "epigraph approximation");
  auto* epi_build = epi->add_subcommand("build", "build an inner approximation from samples");
  epi_build->add_option("--samples", samples_path)->required();
  epi_build->add_option("--kind", kind, "cells|hull");
  epi_build->add_option("--out", epi_path)->required();

  auto* contract = app.add_subcommand("contract", "contract search and refinement");
  auto* contract_solve = contract->add_subcommand("solve", "search a valid contract");
  contract_solve->add_option("--config", config_path)->required();
  contract_solve->add_option("--epi-dir", out_dir, "directory with epi_bus<id>.json files")->required();
  contract_solve->add_option("--out", contract_path)->required();
  auto* contract_refine = contract->add_subcommand("refine", "value-iteration refinement");
  contract_refine->add_option("--config", config_path)->required();
  contract_refine->add_option("--contract", contract_path)->required();
  contract_refine->add_option("--out", epi_path)->required();

  auto* rci = app.add_subcommand("rci", "robust control invariant sets");
  auto* rci_compute = rci->add_subcommand("compute", "compute one bus's RCI");
  rci_compute->add_option("--config", config_path)->required();
  rci_compute->add_option("--bus", bus_id)->required();
  rci_compute->add_option("--ymax", ymax_text, "neighbor bound components, comma separated")->required();
  rci_compute->add_option("--out", rci_path)->required();
  auto* rci_verify = rci->add_subcommand("verify", "grid verification of an RCI artifact");
  rci_verify->add_option("--config", config_path)->required();
  rci_verify->add_option("--bus", bus_id)->required();
  rci_verify->add_option("--rci", rci_path)->required();
  rci_verify->add_option("--ymax", ymax_text)->required();
  rci_verify->add_option("--density", density);

  auto* simulate_cmd = app.add_subcommand("simulate", "run one scenario");
  simulate_cmd->add_option("--config", config_path)->required();
  simulate_cmd->add_option("--scenario", scenario_name)->required();
  simulate_cmd->add_option("--rcis", rci_path, "directory with rci_bus<id>.json artifacts");
  simulate_cmd->add_option("--out", out_dir);
  simulate_cmd->add_flag("--no-supervisor", no_supervisor);

  auto* verify_cmd = app.add_subcommand("verify", "monitor formulas on a recorded trace");
  verify_cmd->add_option("--trace", trace_path)->required();
  verify_cmd->add_option("--formula", formula_texts, "pSTL formula (repeatable)");
  verify_cmd->add_option("--config", config_path, "take formulas from a config file");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "full synthesis and verification chain");
  pipeline_cmd->add_option("--config", config_path)->required();
  pipeline_cmd->add_option("--out", out_dir);
  pipeline_cmd->add_option("--grid", grid_count, "per-axis point count override");

  CLI11_PARSE(app, argc, argv);
  if (tol > 0.0) tolerances().feasibility = tol;

  try {
    if (smallgain->parsed())
      return run_demo_smallgain(mu1, mu2, nu1, nu2, d1, d2, smallgain->count("--out") ? out_dir : "");

    if (gains_sample->parsed()) {
      const NetworkConfig config = load_network_config(config_path);
      GainSetup setup = gain_setup(config, bus_id);
      const int count = grid_count > 0 ? grid_count : config.synthesis.grid_count;
      std::vector<GridAxis> axes(static_cast<size_t>(setup.problem.subsystem.coupling_dim),
                                 GridAxis{0.0, config.synthesis.ymax_upper, count});
      const GainSampleSet samples = sample_gain(
          [&](const Vector& y) { return gain_evaluate(setup.problem, setup.tmpl, y, setup.opts); },
          GridSpec(axes));
      json payload = to_json(samples);
      payload["bus"] = bus_id;
      write_artifact(samples_path, std::move(payload));
      std::cout << "sampled " << samples.values.size() << " points, " << samples.holes.size()
                << " holes, crop " << samples.crop << "\n";
      return 0;
    }

    if (epi_build->parsed()) {
      const json artifact = read_artifact(samples_path);
      const GainSampleSet samples = samples_from_json(artifact);
      const EpigraphApprox approx =
          kind == "hull" ? hull_inner_approx(samples) : monotone_cells_approx(samples);
      json payload = to_json(approx);
      if (artifact.contains("bus")) payload["bus"] = artifact.at("bus");
      write_artifact(epi_path, std::move(payload));
      std::cout << "built " << approx.body.pieces.size() << " piece(s)\n";
      return 0;
    }

    if (contract_solve->parsed()) {
      const NetworkConfig config = load_network_config(config_path);
      const NetworkSystem net = build_microgrid(config.buses, config.ts);
      GainFamily family;
      family.gains.resize(net.subsystems.size());
      for (size_t i = 0; i < net.subsystems.size(); ++i) {
        const auto path = fs::path(out_dir) / ("epi_bus" + std::to_string(net.subsystems[i].id) + ".json");
        family.gains[i].approx = epigraph_from_json(read_artifact(path.string()));
        for (int nb : net.subsystems[i].neighbors)
          family.gains[i].neighbors.push_back(static_cast<int>(net.index_of(nb)));
      }
      const SearchResult result = search_contract(family);
      write_artifact(contract_path, to_json(result));
      if (!result.feasible) {
        std::cout << "infeasible\n";
        return kExitInfeasible;
      }
      std::cout << "contract objective " << result.objective << "\n";
      return 0;
    }

    if (contract_refine->parsed()) {
      const NetworkConfig config = load_network_config(config_path);
      const NetworkSystem net = build_microgrid(config.buses, config.ts);
      const json artifact = read_artifact(contract_path);
      if (!artifact.value("feasible", false)) throw Error("contract artifact is infeasible");
      GainFamily family;
      family.gains.resize(net.subsystems.size());
      for (size_t i = 0; i < net.subsystems.size(); ++i) {
        GainSetup setup = gain_setup(config, net.subsystems[i].id);
        family.gains[i].callable = [setup](const Vector& y) {
          return gain_evaluate(setup.problem, setup.tmpl, y, setup.opts);
        };
        for (int nb : net.subsystems[i].neighbors)
          family.gains[i].neighbors.push_back(static_cast<int>(net.index_of(nb)));
      }
      const RefinementLog log = refine(ContractParams(vector_from_json(artifact.at("y_max"))), family,
                                       config.synthesis.refine_tol, config.synthesis.refine_max_iters);
      json payload = to_json(log);
      payload["y_max"] = to_json(log.iterates.back());
      write_artifact(epi_path, std::move(payload));
      std::cout << "refined in " << log.iterates.size() - 1 << " iteration(s)\n";
      return 0;
    }

    if (rci_compute->parsed()) {
      const NetworkConfig config = load_network_config(config_path);
      GainSetup setup = gain_setup(config, bus_id);
      setup.problem.neighbor_bound = parse_csv_vector(ymax_text);
      const RciResult result = compute_rci(setup.problem, setup.tmpl, setup.opts);
      write_artifact(rci_path, rci_to_json(result, setup.problem, setup.tmpl));
      std::cout << "status "
                << (result.status == RciStatus::Invariant
                        ? "invariant"
                        : result.status == RciStatus::Empty ? "empty" : "not-converged")
                << " after " << result.iterations << " iteration(s)\n";
      return result.status == RciStatus::Invariant ? 0 : kExitVerification;
    }

    if (rci_verify->parsed()) {
      const NetworkConfig config = load_network_config(config_path);
      GainSetup setup = gain_setup(config, bus_id);
      setup.problem.neighbor_bound = parse_csv_vector(ymax_text);
      const json artifact = read_artifact(rci_path);
      const HPolytope set(matrix_from_json(artifact.at("P")), vector_from_json(artifact.at("q")));
      const uint64_t expect = problem_hash(setup.problem, setup.tmpl.facets, setup.tmpl.q0);
      if (artifact.contains("problem_hash") && artifact.at("problem_hash").get<uint64_t>() != expect)
        std::cerr << "warning: artifact was produced for different problem data\n";
      const RciVerification rep = verify_rci(set, setup.problem, density);
      std::cout << "pass fraction " << rep.pass_fraction << ", worst margin " << rep.worst_margin
                << " over " << rep.checks << " checks\n";
      return rep.pass_fraction == 1.0 ? 0 : kExitVerification;
    }

    if (simulate_cmd->parsed()) {
      const NetworkConfig config = load_network_config(config_path);
      const NetworkSystem net = build_microgrid(config.buses, config.ts);
      auto it = std::find_if(config.scenarios.begin(), config.scenarios.end(),
                             [&](const ScenarioSpec& s) { return s.name == scenario_name; });
      if (it == config.scenarios.end()) throw Error("unknown scenario: " + scenario_name);
      ScenarioSpec scenario = *it;
      if (no_supervisor) scenario.supervisor_on = false;

      std::map<int, Cbf> barriers;
      if (!rci_path.empty()) {
        for (const auto& sub : net.subsystems) {
          const auto path = fs::path(rci_path) / ("rci_bus" + std::to_string(sub.id) + ".json");
          if (!fs::exists(path)) continue;
          const json artifact = read_artifact(path.string());
          double kappa = config.supervisor.kappa_step;
          if (auto k = config.supervisor.kappa_per_bus.find(sub.id);
              k != config.supervisor.kappa_per_bus.end())
            kappa = k->second;
          barriers.emplace(sub.id, Cbf(matrix_from_json(artifact.at("P")),
                                       vector_from_json(artifact.at("q")), kappa));
        }
      }
      const RunTrace trace = simulate(net, config, scenario, barriers);
      fs::create_directories(out_dir);
      write_artifact((fs::path(out_dir) / ("trace_" + scenario.name + ".json")).string(), to_json(trace));
      emit_trace_csv(trace, (fs::path(out_dir) / ("trace_" + scenario.name)).string());
      std::cout << "recorded " << trace.steps << " step(s)"
                << (trace.halted_at ? " (halted by filter infeasibility)" : "") << "\n";
      return trace.halted_at ? kExitVerification : 0;
    }

    if (verify_cmd->parsed()) {
      const json artifact = read_artifact(trace_path);
      RunTrace trace;
      trace.scenario = artifact.value("scenario", "");
      trace.ts = artifact.at("Ts").get<double>();
      trace.steps = artifact.at("steps").get<int>();
      for (const auto& [name, v] : artifact.at("signals").items())
        trace.signals[name] = vector_from_json(v);
      std::vector<std::string> formulas = formula_texts;
      if (!config_path.empty()) {
        const NetworkConfig config = load_network_config(config_path);
        formulas.insert(formulas.end(), config.formulas.begin(), config.formulas.end());
      }
      if (formulas.empty()) {
        std::cout << "no formulas given\n";
        return 0;
      }
      bool all_hold = true;
      for (const auto& v : verify_trace(trace, formulas)) {
        std::cout << (v.holds ? (v.prefix ? "holds-on-prefix" : "holds") : "violated") << ": "
                  << v.formula;
        if (v.first_violation) std::cout << " (first violation at step " << *v.first_violation << ")";
        std::cout << "\n";
        all_hold &= v.holds;
      }
      return all_hold ? 0 : kExitVerification;
    }

    if (pipeline_cmd->parsed()) {
      NetworkConfig config = load_network_config(config_path);
      if (grid_count > 0) config.synthesis.grid_count = grid_count;
      try {
        const PipelineReport report = run_pipeline(config);
        fs::create_directories(out_dir);
        write_artifact((fs::path(out_dir) / "report.json").string(), to_json(report));
        for (const auto& outcome : report.scenarios) {
          write_artifact((fs::path(out_dir) / ("trace_" + outcome.trace.scenario + ".json")).string(),
                         to_json(outcome.trace));
          emit_trace_csv(outcome.trace, (fs::path(out_dir) / ("trace_" + outcome.trace.scenario)).string());
        }
        std::cout << "contract:";
        for (Index i = 0; i < report.contract.y_max.size(); ++i)
          std::cout << " " << report.contract.y_max(i);
        std::cout << "\nbuses verified: " << report.buses.size() << "\n";
        bool verdicts_ok = true;
        for (const auto& outcome : report.scenarios) {
          std::cout << "scenario " << outcome.trace.scenario << ": min b = " << outcome.min_b
                    << ", interventions = " << outcome.interventions << "\n";
          for (const auto& v : outcome.verdicts) {
            std::cout << "  " << (v.holds ? (v.prefix ? "holds-on-prefix" : "holds") : "violated")
                      << ": " << v.formula << "\n";
            verdicts_ok &= v.holds;
          }
        }
        return verdicts_ok ? 0 : kExitVerification;
      } catch (const PipelineError& e) {
        std::cerr << "pipeline failure " << e.what() << "\n";
        if (e.stage == "contract") return kExitInfeasible;
        if (e.stage == "config") return kExitConfig;
        return kExitVerification;
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const std::string what = e.what();
    if (what.find("config") != std::string::npos || what.find("cannot open") != std::string::npos)
      return kExitConfig;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
