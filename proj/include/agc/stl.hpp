#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "agc/types.hpp"

namespace agc::stl {

enum class Cmp { Ge, Le };

/// Time interval [a, b] in seconds, b may be +inf.
struct Interval {
  double a = 0.0;
  double b = kInf;

  Interval() = default;
  Interval(double lo, double hi) : a(lo), b(hi) {
    if (!(a >= 0.0) || !(b >= a)) throw Error("Interval: need 0 <= a <= b");
  }
  bool unbounded() const { return b == kInf; }
};

/// Immutable formula tree over the core grammar
///   phi := true | mu | !phi | phi & phi | phi U_I phi
/// with always/eventually provided as expansions into the core.
class Formula {
 public:
  enum class Kind { True, Pred, Not, And, Until };

  static Formula tautology();
  static Formula pred(std::string signal, Cmp cmp, double threshold);
  static Formula negate(Formula f);
  static Formula conj(Formula lhs, Formula rhs);
  static Formula until(Formula lhs, Interval itv, Formula rhs);

  // Derived operators, expanded structurally:
  //   eventually_I f  =  true U_I f
  //   always_I f      =  !(true U_I !f)
  //   disj(a, b)      =  !(!a & !b)
  static Formula eventually(Interval itv, Formula f);
  static Formula always(Interval itv, Formula f);
  static Formula disj(Formula lhs, Formula rhs);

  /// abs(signal) <= c  as  (signal <= c) & (signal >= -c); Ge mirrors it.
  static Formula abs_pred(std::string signal, Cmp cmp, double threshold);

  Kind kind() const;
  Formula child(int i) const;  // Not: 0; And/Until: 0, 1
  const Interval& interval() const;   // Until only
  const std::string& signal() const;  // Pred only
  Cmp cmp() const;                    // Pred only
  double threshold() const;           // Pred only

  std::string to_string() const;

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

/// Sampled multi-signal trajectory; every signal has the same length T >= 1.
struct Trace {
  double step = 0.0;  // T_s > 0, seconds per sample
  std::map<std::string, Vector> values;

  Trace() = default;
  Trace(double ts, std::map<std::string, Vector> sig);
  Index length() const;
  const Vector& signal(const std::string& name) const;
};

/// Evaluation side data: truncated is set when some until window was cut
/// short by the end of the trace, i.e. the verdict is a prefix verdict.
struct EvalMeta {
  bool truncated = false;
};

/// Recursive boolean semantics at sample index t.
bool evaluate(const Formula& f, const Trace& tr, Index t, EvalMeta* meta = nullptr);

/// Earliest index at which an always-shaped formula's body fails on the
/// trace, if the formula itself fails at t = 0. For other shapes, index 0.
std::optional<Index> first_failure(const Formula& f, const Trace& tr);

enum class ParamDir { Ascending, Descending };

struct ParamSpec {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  ParamDir dir = ParamDir::Ascending;
};

/// pSTL template: parameter box with a declared order direction per axis
/// plus an instantiation rule.
struct ParamTemplate {
  std::vector<ParamSpec> params;
  std::function<Formula(const Vector&)> instantiate;
};

struct MonotoneCounterexample {
  size_t trace_index;
  Vector p1, p2;  // p1 <= p2 in the declared order; phi(p1) held, phi(p2) did not
};

struct MonotoneReport {
  long pairs_checked = 0;
  std::optional<MonotoneCounterexample> counterexample;
};

/// Samples ordered parameter pairs against the trace pool looking for
/// monotonicity violations. Absence of a counterexample is evidence only.
MonotoneReport check_monotone(const ParamTemplate& tmpl, const std::vector<Trace>& pool,
                              int sample_count, uint64_t seed = 1);

/// Parse error with the offending position in the input text.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, size_t position)
      : Error(msg + " (at position " + std::to_string(position) + ")"), pos(position) {}
  size_t pos;
};

/// Text syntax: G[0,inf](abs(w1) <= 0.005), F[0,2](x >= 2), U, &, !, true,
/// parenthesized subformulas. Omitted intervals default to [0,inf).
Formula parse_formula(const std::string& text);

}  // namespace agc::stl
