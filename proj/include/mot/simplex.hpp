#pragma once

#include <cstddef>
#include <vector>

#include "mot/lp.hpp"
#include "mot/pdhg.hpp"

namespace mot {

/// Dense row-major LP: min c^T x s.t. A x (sense) b, x >= 0.
struct DenseLP {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // rows * cols
  std::vector<double> b;
  std::vector<double> c;
  std::vector<Sense> senses;

  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

inline constexpr std::size_t kSimplexSizeLimit = 1'000'000;

/// Throws Errc::SizeGuard past rows * cols = 10^6.
DenseLP densify(const LinearProgram& lp);

enum class SimplexStatus { Optimal, Infeasible, Unbounded };

struct SimplexResult {
  SimplexStatus status = SimplexStatus::Infeasible;
  double value = 0.0;     // min-form objective c^T x
  std::vector<double> x;  // basic solution
  std::vector<double> y;  // same sign convention as the PDHG duals
  std::size_t pivots = 0;
};

/// Two-phase primal simplex on a dense tableau, Bland's rule throughout.
/// Throws Errc::SizeGuard and Errc::CycleGuard (10^6 pivots).
SimplexResult simplex_solve(const DenseLP& lp);

struct CrossCheck {
  SimplexStatus status = SimplexStatus::Infeasible;
  double oracle_value = 0.0;  // user direction
  double pdhg_value = 0.0;    // user direction
  double relative_error = 0.0;
  bool within_tolerance = false;
  /// max over columns of |(A^T y_simplex)_j - (A^T y_pdhg)_j|: the two
  /// certificates' portfolio values on every path. Duals need not be
  /// unique, so this is reported, not asserted.
  double portfolio_max_diff = 0.0;
};

CrossCheck cross_check(const LinearProgram& lp, const Solution& pdhg, double tol);

}  // namespace mot
