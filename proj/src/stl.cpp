#include "agc/stl.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace agc::stl {

struct Formula::Node {
  Kind kind;
  std::string signal;
  Cmp cmp = Cmp::Ge;
  double threshold = 0.0;
  Interval itv;
  std::shared_ptr<const Node> lhs, rhs;
};

Formula Formula::tautology() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::True;
  return Formula(std::move(n));
}

Formula Formula::pred(std::string signal, Cmp cmp, double threshold) {
  if (signal.empty()) throw Error("Formula::pred: empty signal name");
  if (!std::isfinite(threshold)) throw Error("Formula::pred: non-finite threshold");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Pred;
  n->signal = std::move(signal);
  n->cmp = cmp;
  n->threshold = threshold;
  return Formula(std::move(n));
}

Formula Formula::negate(Formula f) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Not;
  n->lhs = std::move(f.node_);
  return Formula(std::move(n));
}

Formula Formula::conj(Formula lhs, Formula rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::And;
  n->lhs = std::move(lhs.node_);
  n->rhs = std::move(rhs.node_);
  return Formula(std::move(n));
}

Formula Formula::until(Formula lhs, Interval itv, Formula rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Until;
  n->itv = itv;
  n->lhs = std::move(lhs.node_);
  n->rhs = std::move(rhs.node_);
  return Formula(std::move(n));
}

Formula Formula::eventually(Interval itv, Formula f) { return until(tautology(), itv, std::move(f)); }

Formula Formula::always(Interval itv, Formula f) {
  return negate(eventually(itv, negate(std::move(f))));
}

Formula Formula::disj(Formula lhs, Formula rhs) {
  return negate(conj(negate(std::move(lhs)), negate(std::move(rhs))));
}

Formula Formula::abs_pred(std::string signal, Cmp cmp, double threshold) {
  Formula upper = pred(signal, cmp == Cmp::Le ? Cmp::Le : Cmp::Ge, threshold);
  Formula lower = pred(std::move(signal), cmp == Cmp::Le ? Cmp::Ge : Cmp::Le, -threshold);
  return cmp == Cmp::Le ? conj(std::move(upper), std::move(lower))   // |s| <= c
                        : disj(std::move(upper), std::move(lower));  // |s| >= c
}

Formula::Kind Formula::kind() const { return node_->kind; }

Formula Formula::child(int i) const { return Formula(i == 0 ? node_->lhs : node_->rhs); }

const Interval& Formula::interval() const { return node_->itv; }
const std::string& Formula::signal() const { return node_->signal; }
Cmp Formula::cmp() const { return node_->cmp; }
double Formula::threshold() const { return node_->threshold; }

std::string Formula::to_string() const {
  std::ostringstream os;
  switch (kind()) {
    case Kind::True:
      os << "true";
      break;
    case Kind::Pred:
      os << signal() << (cmp() == Cmp::Ge ? " >= " : " <= ") << threshold();
      break;
    case Kind::Not:
      os << "!(" << child(0).to_string() << ")";
      break;
    case Kind::And:
      os << "(" << child(0).to_string() << " & " << child(1).to_string() << ")";
      break;
    case Kind::Until: {
      os << "(" << child(0).to_string() << " U[" << interval().a << ",";
      if (interval().unbounded())
        os << "inf";
      else
        os << interval().b;
      os << "] " << child(1).to_string() << ")";
      break;
    }
  }
  return os.str();
}

Trace::Trace(double ts, std::map<std::string, Vector> sig) : step(ts), values(std::move(sig)) {
  if (!(step > 0.0)) throw Error("Trace: step must be positive");
  if (values.empty()) throw Error("Trace: no signals");
  const Index t = values.begin()->second.size();
  if (t < 1) throw Error("Trace: length must be >= 1");
  for (const auto& [name, v] : values) {
    if (v.size() != t) throw Error("Trace: signal '" + name + "' length mismatch");
    if (!is_finite(v)) throw Error("Trace: signal '" + name + "' has non-finite samples");
  }
}

Index Trace::length() const { return values.begin()->second.size(); }

const Vector& Trace::signal(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw Error("Trace: unknown signal '" + name + "'");
  return it->second;
}

namespace {

// Interval -> sample-index window relative to t: ceil(a/Ts) .. floor(b/Ts),
// truncated at the trace end. A small guard absorbs roundoff in a/Ts.
struct Window {
  Index lo, hi;      // absolute indices, inclusive; empty if lo > hi
  bool truncated;    // window extended past the last sample
};

Window index_window(const Interval& itv, double ts, Index t, Index len) {
  constexpr double kGuard = 1e-9;
  const Index lo = t + static_cast<Index>(std::ceil(itv.a / ts - kGuard));
  Index hi;
  bool truncated = false;
  if (itv.unbounded()) {
    hi = len - 1;
    truncated = true;
  } else {
    hi = t + static_cast<Index>(std::floor(itv.b / ts + kGuard));
    if (hi > len - 1) {
      hi = len - 1;
      truncated = true;
    }
  }
  return {lo, hi, truncated};
}

bool eval_rec(const Formula& f, const Trace& tr, Index t, EvalMeta& meta) {
  switch (f.kind()) {
    case Formula::Kind::True:
      return true;
    case Formula::Kind::Pred: {
      const double v = tr.signal(f.signal())(t);
      return f.cmp() == Cmp::Ge ? v >= f.threshold() : v <= f.threshold();
    }
    case Formula::Kind::Not:
      return !eval_rec(f.child(0), tr, t, meta);
    case Formula::Kind::And: {
      const bool a = eval_rec(f.child(0), tr, t, meta);
      const bool b = eval_rec(f.child(1), tr, t, meta);
      return a && b;
    }
    case Formula::Kind::Until: {
      const Window w = index_window(f.interval(), tr.step, t, tr.length());
      if (w.truncated) meta.truncated = true;
      const Formula lhs = f.child(0);
      const Formula rhs = f.child(1);
      for (Index tp = w.lo; tp <= w.hi; ++tp) {
        if (!eval_rec(rhs, tr, tp, meta)) continue;
        bool hold = true;
        for (Index ts = t; ts <= tp && hold; ++ts) hold = eval_rec(lhs, tr, ts, meta);
        if (hold) return true;
      }
      return false;
    }
  }
  throw Error("evaluate: unreachable");
}

}  // namespace

bool evaluate(const Formula& f, const Trace& tr, Index t, EvalMeta* meta) {
  if (t < 0 || t >= tr.length()) throw Error("evaluate: t out of range");
  EvalMeta local;
  const bool v = eval_rec(f, tr, t, local);
  if (meta) *meta = local;
  return v;
}

std::optional<Index> first_failure(const Formula& f, const Trace& tr) {
  if (evaluate(f, tr, 0)) return std::nullopt;
  // always_I(body) expands to !(true U_I !body); report the first body
  // failure inside the window instead of the (always-0) failure of the whole.
  if (f.kind() == Formula::Kind::Not && f.child(0).kind() == Formula::Kind::Until &&
      f.child(0).child(0).kind() == Formula::Kind::True &&
      f.child(0).child(1).kind() == Formula::Kind::Not) {
    const Formula body = f.child(0).child(1).child(0);
    const Interval itv = f.child(0).interval();
    const Index lo = static_cast<Index>(std::ceil(itv.a / tr.step - 1e-9));
    const Index hi = itv.unbounded()
                         ? tr.length() - 1
                         : std::min<Index>(tr.length() - 1,
                                           static_cast<Index>(std::floor(itv.b / tr.step + 1e-9)));
    for (Index t = std::max<Index>(lo, 0); t <= hi; ++t)
      if (!evaluate(body, tr, t)) return t;
  }
  return 0;
}

MonotoneReport check_monotone(const ParamTemplate& tmpl, const std::vector<Trace>& pool,
                              int sample_count, uint64_t seed) {
  if (pool.empty()) throw Error("check_monotone: empty trace pool");
  if (!tmpl.instantiate) throw Error("check_monotone: template has no instantiation rule");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const size_t np = tmpl.params.size();

  MonotoneReport report;
  for (int s = 0; s < sample_count; ++s) {
    Vector p1(static_cast<Index>(np)), p2(static_cast<Index>(np));
    for (size_t j = 0; j < np; ++j) {
      const auto& ps = tmpl.params[j];
      const double x = ps.lo + (ps.hi - ps.lo) * unit(rng);
      const double y = ps.lo + (ps.hi - ps.lo) * unit(rng);
      // p1 below p2 in the declared order direction
      const double small = std::min(x, y), big = std::max(x, y);
      if (ps.dir == ParamDir::Ascending) {
        p1(static_cast<Index>(j)) = small;
        p2(static_cast<Index>(j)) = big;
      } else {
        p1(static_cast<Index>(j)) = big;
        p2(static_cast<Index>(j)) = small;
      }
    }
    const Formula f1 = tmpl.instantiate(p1);
    const Formula f2 = tmpl.instantiate(p2);
    for (size_t ti = 0; ti < pool.size(); ++ti) {
      ++report.pairs_checked;
      if (evaluate(f1, pool[ti], 0) && !evaluate(f2, pool[ti], 0)) {
        report.counterexample = MonotoneCounterexample{ti, p1, p2};
        return report;
      }
    }
  }
  return report;
}

}  // namespace agc::stl
