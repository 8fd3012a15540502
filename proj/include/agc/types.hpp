#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace agc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Eigen::Index;

/// Error type for rejected inputs and failed preconditions across the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Numeric tolerances shared by all modules. Configurable once per run
/// (the CLI maps --tol onto feasibility).
struct Tolerances {
  double feasibility = 1e-9;  // constraint satisfaction checks
  double dedup = 1e-12;       // geometric deduplication
};

Tolerances& tolerances();

inline bool is_finite(const Vector& v) { return v.allFinite(); }
inline bool is_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace agc
