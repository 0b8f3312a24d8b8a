#pragma once

// Instance generators shared by the test binaries. Everything is seeded;
// there is no hidden global state.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mot/lp.hpp"
#include "mot/marginals.hpp"
#include "mot/payoff.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::vector<double> random_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& v : w) v = uniform(rng, 0.1, 1.0);
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= s;
  // exact unit sum up to one rounding
  w.back() = 1.0 - std::accumulate(w.begin(), w.end() - 1, 0.0);
  return w;
}

inline std::vector<double> random_support(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> s;
  while (s.size() < n) {
    const double v = uniform(rng, lo, hi);
    bool clash = false;
    for (double u : s) clash = clash || std::abs(u - v) < 1e-3;
    if (!clash) s.push_back(v);
  }
  std::sort(s.begin(), s.end());
  return s;
}

inline mot::MarginalGrid random_grid(Rng& rng, std::size_t n, double lo = 0.5,
                                     double hi = 1.5) {
  return mot::MarginalGrid(random_support(rng, n, lo, hi), random_weights(rng, n));
}

/// Splits every atom of mu into a mean-preserving two-point law.
inline mot::MarginalGrid mean_preserving_split(Rng& rng, const mot::MarginalGrid& mu) {
  std::vector<std::pair<double, double>> atoms;
  for (std::size_t j = 0; j < mu.size(); ++j) {
    const double x = mu.support()[j];
    const double w = mu.weights()[j];
    const double a = uniform(rng, 0.01, 0.5);
    const double b = uniform(rng, 0.01, 0.5);
    atoms.push_back({x - a, w * b / (a + b)});
    atoms.push_back({x + b, w * a / (a + b)});
  }
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> s, w;
  for (const auto& [x, m] : atoms) {
    if (!s.empty() && std::abs(x - s.back()) < 1e-12) {
      w.back() += m;
    } else {
      s.push_back(x);
      w.push_back(m);
    }
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= total;
  return mot::MarginalGrid(s, w);
}

/// A law dominated by nu in convex order with at most `groups` atoms: nu's
/// atoms are pooled into consecutive groups, each replaced by its barycentre.
inline mot::MarginalGrid mean_preserving_contraction(Rng& rng, const mot::MarginalGrid& nu,
                                                     std::size_t groups) {
  const std::size_t n = nu.size();
  groups = std::clamp<std::size_t>(groups, 1, n);
  // random cut points
  std::vector<std::size_t> cuts(n - 1);
  std::iota(cuts.begin(), cuts.end(), 1);
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(groups - 1);
  cuts.push_back(0);
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> s, w;
  for (std::size_t g = 0; g + 1 < cuts.size(); ++g) {
    double mass = 0.0, moment = 0.0;
    for (std::size_t j = cuts[g]; j < cuts[g + 1]; ++j) {
      mass += nu.weights()[j];
      moment += nu.weights()[j] * nu.support()[j];
    }
    s.push_back(moment / mass);
    w.push_back(mass);
  }
  return mot::MarginalGrid(s, w);
}

/// T = 2 system with d assets, grids of at most n atoms, in convex order.
inline mot::MarginalSystem random_system(Rng& rng, std::size_t d, std::size_t n) {
  std::vector<mot::MarginalGrid> first, second;
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t n2 = 2 + rng() % (n - 1);
    mot::MarginalGrid nu = random_grid(rng, n2);
    const std::size_t n1 = 1 + rng() % n2;
    mot::MarginalGrid mu = mean_preserving_contraction(rng, nu, n1);
    mu.set_label({0, k});
    nu.set_label({1, k});
    first.push_back(mu);
    second.push_back(nu);
  }
  std::vector<mot::MarginalGrid> grids = first;
  grids.insert(grids.end(), second.begin(), second.end());
  return mot::validate_system(mot::MarginalSystem({1.0, 2.0}, d, std::move(grids)));
}

/// Marginals generated by explicit martingale kernels, together with the
/// joint plan they induce. Each asset moves independently: from atom x the
/// next law is a tilt of a fixed base onto a common grid with mean x.
struct KernelInstance {
  mot::MarginalSystem system;
  std::vector<double> plan;  // IndexMap order
};

inline KernelInstance kernel_instance(Rng& rng, std::size_t d, std::size_t n_times,
                                      std::size_t n) {
  // per asset: grid at each time, and transition matrices
  std::vector<std::vector<std::vector<double>>> support(n_times, std::vector<std::vector<double>>(d));
  std::vector<std::vector<std::vector<double>>> weight(n_times, std::vector<std::vector<double>>(d));
  std::vector<std::vector<std::vector<double>>> kernel(n_times, std::vector<std::vector<double>>(d));
  for (std::size_t k = 0; k < d; ++k) {
    support[0][k] = random_support(rng, n, 0.8, 1.2);
    weight[0][k] = random_weights(rng, n);
    for (std::size_t t = 1; t < n_times; ++t) {
      const double spread = 0.3 * static_cast<double>(t);
      std::vector<double> s(n);
      for (std::size_t j = 0; j < n; ++j) {
        s[j] = 1.0 - spread + 2.0 * spread * static_cast<double>(j) / static_cast<double>(n - 1);
      }
      const auto base = random_weights(rng, n);
      const auto& prev = support[t - 1][k];
      auto& kern = kernel[t][k];
      kern.assign(prev.size() * n, 0.0);
      std::vector<double> w(n, 0.0);
      for (std::size_t i = 0; i < prev.size(); ++i) {
        const auto row = mot::tilt_to_mean(s, base, prev[i]);
        for (std::size_t j = 0; j < n; ++j) {
          kern[i * n + j] = row[j];
          w[j] += weight[t - 1][k][i] * row[j];
        }
      }
      support[t][k] = s;
      weight[t][k] = w;
    }
  }
  std::vector<mot::MarginalGrid> grids;
  std::vector<double> times;
  for (std::size_t t = 0; t < n_times; ++t) {
    times.push_back(static_cast<double>(t + 1));
    for (std::size_t k = 0; k < d; ++k) {
      // renormalise against rounding; the plan below uses the same numbers
      grids.emplace_back(support[t][k], weight[t][k], mot::GridLabel{t, k});
    }
  }
  mot::MarginalSystem system =
      mot::validate_system(mot::MarginalSystem(times, d, std::move(grids)));
  const mot::IndexMap map(system.dims());
  std::vector<double> plan(map.size());
  std::vector<std::size_t> idx(map.rank(), 0);
  for (std::size_t f = 0; f < map.size(); ++f) {
    double p = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      p *= weight[0][k][idx[k]];
      for (std::size_t t = 1; t < n_times; ++t) {
        p *= kernel[t][k][idx[(t - 1) * d + k] * n + idx[t * d + k]];
      }
    }
    plan[f] = p;
    map.next(idx);
  }
  return {std::move(system), std::move(plan)};
}

inline mot::CostTensor random_cost(Rng& rng, const mot::MarginalSystem& s,
                                   mot::Direction dir) {
  mot::CostTensor c;
  c.index_map = mot::IndexMap(s.dims());
  c.values.resize(c.index_map.size());
  for (auto& v : c.values) v = uniform(rng, 0.0, 1.0);
  c.direction = dir;
  return c;
}

/// delta_0 -> {(-1, 1/2), (1, 1/2)}: the only martingale coupling.
inline mot::MarginalSystem unique_coupling_system() {
  std::vector<mot::MarginalGrid> grids{
      mot::MarginalGrid::dirac(0.0, {0, 0}),
      mot::MarginalGrid({-1.0, 1.0}, {0.5, 0.5}, {1, 0})};
  return mot::validate_system(mot::MarginalSystem({1.0, 2.0}, 1, std::move(grids)));
}

inline mot::CostTensor abs_increment_cost(const mot::MarginalSystem& s, mot::Direction dir) {
  return mot::build_cost_tensor_serial(
      s, [](std::span<const double> p) { return std::abs(p[1] - p[0]); }, dir);
}

}  // namespace testing
