#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mot/index_map.hpp"
#include "mot/marginals.hpp"

namespace mot {

enum class Discounting { Continuous, Simple };

/// Worst-of autocallable, per unit notional. Times are in years relative to
/// the valuation date; prices are relative to the initial fixing.
struct AutocallSpec {
  std::size_t n_assets = 2;
  std::vector<double> observation_times;
  double inception_time = 0.0;
  double strike = 1.0;
  double knock_in = 0.6;
  double knock_out = 1.2;
  double coupon_rate = 0.08;
  double discount_rate = 0.01;
  Discounting discounting = Discounting::Continuous;

  /// Throws Errc::InvalidConfig when the invariants do not hold.
  void validate() const;
  /// C_j = coupon_rate * (t_j - t_{j-1}) with t_0 = 0.
  std::vector<double> coupons() const;
  double discount_factor(double t) const;
};

/// Knock-out date index (0-based) or nullopt when no observation reaches the
/// barrier.
std::optional<std::size_t> knock_out_index(std::span<const double> path,
                                           const AutocallSpec& spec);

/// Present value at t = 0. `path` is row-major m x d: row j holds the d
/// asset levels at observation j.
double worst_of_autocall(std::span<const double> path, const AutocallSpec& spec);

enum class Direction { Minimize, Maximize };

struct CostTensor {
  std::vector<double> values;  // flat, in IndexMap order
  IndexMap index_map;
  Direction direction = Direction::Minimize;
};

/// Path functional: receives the N*d prices of one grid path, time-major.
using PathFunction = std::function<double(std::span<const double>)>;

/// Evaluates `f` on every grid path. Throws Errc::NonFiniteCost on NaN/inf.
CostTensor build_cost_tensor(const MarginalSystem& system, const PathFunction& f,
                             Direction direction);

/// Same contract, single-threaded reference path.
CostTensor build_cost_tensor_serial(const MarginalSystem& system,
                                    const PathFunction& f, Direction direction);

}  // namespace mot
