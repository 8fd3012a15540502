#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "agc/epigraph.hpp"
#include "agc/types.hpp"

namespace agc {

/// Network-wide output bounds, one magnitude per subsystem output.
struct ContractParams {
  Vector y_max;

  ContractParams() = default;
  explicit ContractParams(Vector y);
};

/// One subsystem's gain: neighbor indices into the bound vector plus a
/// callable gain, an epigraph approximation, or both.
struct SubsystemGain {
  std::vector<int> neighbors;  // 0-based indices, stacking order
  std::function<double(const Vector&)> callable;
  std::optional<EpigraphApprox> approx;
};

struct GainFamily {
  std::vector<SubsystemGain> gains;

  int size() const { return static_cast<int>(gains.size()); }
  Vector neighbor_projection(int i, const Vector& y) const;
};

struct ValidityEntry {
  int subsystem = 0;
  double slack = 0.0;  // lambda_i(y_N) - y_i (callable) or selected-piece row margin
  int piece = -1;      // approximation piece index, -1 for callable/hull evaluation
  bool hole = false;   // gain evaluation failed (+inf)
};

struct ValidityOutcome {
  bool valid = false;
  ContractParams params;
  std::vector<ValidityEntry> entries;  // one per subsystem
};

/// The per-subsystem inequalities lambda_i(y_N_i) <= y_i, each within tol.
ValidityOutcome check_validity(const ContractParams& params, const GainFamily& gains,
                               double tol = 1e-9);

struct SearchOptions {
  Vector weights;                // default: all ones
  Vector floor;                  // componentwise lower bounds on y, default zero
  bool pure_feasibility = false; // stop at the first feasible point, objective ignored
  long node_cap = 2'000'000;
};

struct SearchResult {
  bool feasible = false;
  ContractParams params;
  double objective = kInf;
  std::vector<int> pieces;    // chosen piece per subsystem, -1 where convex
  std::vector<int> conflict;  // on infeasibility: subsystems whose epigraphs cannot intersect
  long nodes = 0;
};

/// Feasibility/minimization over the epigraph approximations: weighted-sum
/// LP when every body is convex, best-first branch-and-bound over piece
/// selections otherwise. Families built entirely from monotone cells are
/// solved exactly by a least-fixed-point sweep over the staircase bounds
/// (the result equals exhaustive piece enumeration either way).
SearchResult search_contract(const GainFamily& gains, const SearchOptions& opts = {});

struct RefinementLog {
  std::vector<Vector> iterates;  // y[0..k], componentwise nonincreasing
  enum class Reason { Converged, MaxIters } reason = Reason::MaxIters;
};

/// Value iteration y[k+1] = Lambda(y[k]) from a valid starting point.
/// Rejects invalid starts and aborts if an iterate ever increases, which
/// would contradict the gains' monotonicity. A floor vector clips the
/// iteration from below; validity is preserved because clipping only ever
/// raises components back toward the still-valid previous iterate.
RefinementLog refine(const ContractParams& start, const GainFamily& gains, double tol = 1e-8,
                     int max_iters = 10000, const Vector& floor = Vector());

struct SmallGainBounds {
  double y1 = 0.0, y2 = 0.0;
};

/// Two-system closed form. Empty when nu1*nu2 >= 1 (no certificate).
std::optional<SmallGainBounds> small_gain_closed_form(double mu1, double mu2, double nu1, double nu2,
                                                      double d1, double d2);

/// General assume-guarantee iteration: alternate guarantee and feedback
/// parameter maps from an initial feedback point.
struct GeneralContractIteration {
  std::function<Vector(const Vector&)> lambda_hat;  // feedback params -> guarantee params
  std::function<Vector(const Vector&)> gamma;       // guarantee params -> feedback params
  Vector initial_feedback;
};

struct IterationResult {
  std::vector<Vector> guarantees;     // p_g[0..K] when no failure
  std::optional<int> failure_index;   // first index whose map evaluation failed
};

IterationResult general_ag_iterate(const GeneralContractIteration& iteration, int steps);

/// Set-invariance specialization: horizon extension by one step per round
/// with identity feedback. The initial feedback horizon is seeded one step
/// below zero so the first produced guarantee is the horizon-0 claim made
/// by the initial condition alone; the sequence is then 0, ts, 2 ts, ...
GeneralContractIteration invariance_horizon_iteration(double ts, int subsystems);

}  // namespace agc
