#include "mot/payoff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mot/error.hpp"
#include "mot/kernels.hpp"

namespace mot {

void AutocallSpec::validate() const {
  if (n_assets == 0) throw Error(Errc::InvalidConfig, "autocall: d must be >= 1");
  if (observation_times.empty()) {
    throw Error(Errc::InvalidConfig, "autocall: no observation times");
  }
  for (std::size_t j = 0; j < observation_times.size(); ++j) {
    if (!(observation_times[j] > inception_time)) {
      throw Error(Errc::InvalidConfig, "autocall: observation before inception");
    }
    if (j > 0 && !(observation_times[j] > observation_times[j - 1])) {
      throw Error(Errc::InvalidConfig, "autocall: observation times not increasing");
    }
  }
  if (!(knock_in > 0.0 && knock_in <= strike)) {
    throw Error(Errc::InvalidConfig, "autocall: need 0 < knock_in <= strike");
  }
  if (!(knock_out > 0.0)) throw Error(Errc::InvalidConfig, "autocall: knock_out <= 0");
  for (double c : coupons()) {
    if (c < 0.0) throw Error(Errc::InvalidConfig, "autocall: negative coupon");
  }
}

std::vector<double> AutocallSpec::coupons() const {
  std::vector<double> c(observation_times.size());
  double prev = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    c[j] = coupon_rate * (observation_times[j] - prev);
    prev = observation_times[j];
  }
  return c;
}

double AutocallSpec::discount_factor(double t) const {
  return discounting == Discounting::Continuous ? std::exp(-discount_rate * t)
                                                : 1.0 / (1.0 + discount_rate * t);
}

namespace {

double worst_at(std::span<const double> path, std::size_t j, std::size_t d) {
  return *std::min_element(path.begin() + j * d, path.begin() + (j + 1) * d);
}

}  // namespace

std::optional<std::size_t> knock_out_index(std::span<const double> path,
                                           const AutocallSpec& spec) {
  const std::size_t m = spec.observation_times.size();
  for (std::size_t j = 0; j < m; ++j) {
    if (worst_at(path, j, spec.n_assets) >= spec.knock_out) return j;
  }
  return std::nullopt;
}

double worst_of_autocall(std::span<const double> path, const AutocallSpec& spec) {
  const std::size_t m = spec.observation_times.size();
  const std::size_t d = spec.n_assets;
  if (path.size() != m * d) {
    throw Error(Errc::ShapeMismatch, "path has " + std::to_string(path.size()) +
                                         " entries, expected " +
                                         std::to_string(m * d));
  }
  const auto coupons = spec.coupons();
  const auto tau = knock_out_index(path, spec);
  // knock-out strictly before maturity pays accrued coupons at t_tau
  if (tau && *tau + 1 < m) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= *tau; ++j) acc += coupons[j];
    return spec.discount_factor(spec.observation_times[*tau]) * acc;
  }
  const double df = spec.discount_factor(spec.observation_times.back());
  const double x_final = worst_at(path, m - 1, d);
  if (x_final <= spec.knock_in) return df * std::min(x_final - spec.strike, 0.0);
  double acc = 0.0;
  for (double c : coupons) acc += c;
  return df * acc;
}

namespace {

template <class Fill>
CostTensor build_with(const MarginalSystem& system, const PathFunction& f,
                      Direction direction, Fill&& fill) {
  CostTensor cost;
  cost.index_map = IndexMap(system.dims());
  cost.direction = direction;
  cost.values.resize(cost.index_map.size());
  const auto grids = system.grids();
  const std::size_t rank = grids.size();
  fill(cost.index_map,
       [&](std::span<const std::size_t> idx, std::size_t) {
         // small fixed buffer keeps the hot loop allocation-free
         double buf[64];
         std::vector<double> heap;
         std::span<double> prices;
         if (rank <= 64) {
           prices = std::span<double>(buf, rank);
         } else {
           heap.resize(rank);
           prices = heap;
         }
         for (std::size_t r = 0; r < rank; ++r) prices[r] = grids[r].support()[idx[r]];
         return f(prices);
       },
       std::span<double>(cost.values));
  for (std::size_t j = 0; j < cost.values.size(); ++j) {
    if (!std::isfinite(cost.values[j])) {
      throw Error(Errc::NonFiniteCost, "cost at flat index " + std::to_string(j));
    }
  }
  return cost;
}

}  // namespace

CostTensor build_cost_tensor(const MarginalSystem& system, const PathFunction& f,
                             Direction direction) {
  return build_with(system, f, direction, [](const IndexMap& map, auto&& g,
                                             std::span<double> out) {
    kernels::omp::fill_paths(map, g, out);
  });
}

CostTensor build_cost_tensor_serial(const MarginalSystem& system,
                                    const PathFunction& f, Direction direction) {
  return build_with(system, f, direction, [](const IndexMap& map, auto&& g,
                                             std::span<double> out) {
    kernels::serial::fill_paths(map, g, out);
  });
}

}  // namespace mot
