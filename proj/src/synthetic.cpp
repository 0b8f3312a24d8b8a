#include <algorithm>
#include <cmath>
#include <numeric>

#include "mot/error.hpp"
#include "mot/marginals.hpp"

namespace mot {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> make_grid(const SyntheticSpec& spec, double vol, double T) {
  const std::size_t n = spec.n_points;
  if (n == 1) return {spec.spot};
  const double s = vol * std::sqrt(T);
  const double m = -0.5 * s * s;
  std::vector<double> g(n);
  if (spec.placement == GridPlacement::Uniform) {
    const double lo = spec.spot * std::exp(m - spec.width * s);
    const double hi = spec.spot * std::exp(m + spec.width * s);
    for (std::size_t j = 0; j < n; ++j) {
      g[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      g[j] = spec.spot * std::exp(m + s * normal_quantile(p));
    }
  }
  return g;
}

// Lognormal mass around `from` over the cells of `grid` (midpoint cells).
std::vector<double> lognormal_cell_weights(std::span<const double> grid,
                                           double from, double s) {
  const std::size_t n = grid.size();
  std::vector<double> w(n);
  const double m = std::log(from) - 0.5 * s * s;
  for (std::size_t j = 0; j < n; ++j) {
    const double a = j == 0 ? 0.0 : 0.5 * (grid[j - 1] + grid[j]);
    const double b = j + 1 == n ? INFINITY : 0.5 * (grid[j] + grid[j + 1]);
    const double ca = a <= 0.0 ? 0.0 : normal_cdf((std::log(a) - m) / s);
    const double cb = std::isinf(b) ? 1.0 : normal_cdf((std::log(b) - m) / s);
    w[j] = std::max(cb - ca, 0.0);
  }
  const double top = *std::max_element(w.begin(), w.end());
  for (auto& x : w) x = std::max(x, 1e-12 * std::max(top, 1e-300));
  return w;
}

}  // namespace

std::vector<double> tilt_to_mean(std::span<const double> support,
                                 std::span<const double> base, double target) {
  const std::size_t n = support.size();
  if (n == 0 || base.size() != n) {
    throw Error(Errc::ShapeMismatch, "tilt_to_mean: bad input sizes");
  }
  if (n == 1) {
    if (std::abs(support[0] - target) > 1e-12) {
      throw Error(Errc::InvalidConfig, "single atom cannot carry target mean");
    }
    return {1.0};
  }
  const double lo_s = support.front(), hi_s = support.back();
  if (!(target > lo_s && target < hi_s)) {
    throw Error(Errc::InvalidConfig,
                "target mean " + std::to_string(target) +
                    " not strictly inside grid hull [" + std::to_string(lo_s) +
                    ", " + std::to_string(hi_s) + "]");
  }
  const double range = hi_s - lo_s;
  std::vector<double> u(n), w(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = (support[j] - target) / range;

  auto tilted = [&](double lambda) {
    double umax = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      if (base[j] > 0.0) umax = std::max(umax, lambda * u[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = base[j] > 0.0 ? base[j] * std::exp(lambda * u[j] - umax) : 0.0;
      z += w[j];
    }
    double mean_u = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] /= z;
      mean_u += w[j] * u[j];
    }
    return mean_u;
  };

  double lo = -1.0, hi = 1.0;
  while (tilted(lo) > 0.0) lo *= 2.0;
  while (tilted(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 300 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (tilted(mid) < 0.0 ? lo : hi) = mid;
  }
  tilted(0.5 * (lo + hi));

  // Remove the last rounding residue in the mean with a two-atom
  // adjustment around the target, keeping weights nonnegative.
  double mean = 0.0;
  for (std::size_t j = 0; j < n; ++j) mean += w[j] * support[j];
  const double err = mean - target;
  if (err != 0.0) {
    const std::size_t k =
        err > 0.0 ? 0 : n - 1;  // move mass toward the side that fixes the mean
    const std::size_t from = std::upper_bound(support.begin(), support.end(), target) -
                             support.begin() - (err > 0.0 ? 0 : 1);
    const double dx = support[k] - support[from];
    if (dx != 0.0) {
      const double shift = std::clamp(-err / dx, 0.0, w[from]);
      w[from] -= shift;
      w[k] += shift;
    }
  }
  return w;
}

MarginalSystem lognormal_martingale_system(const SyntheticSpec& spec) {
  const std::size_t N = spec.times.size();
  const std::size_t d = spec.volatilities.size();
  if (N == 0 || d == 0 || spec.n_points == 0) {
    throw Error(Errc::InvalidConfig, "synthetic spec needs times, vols, points");
  }
  if (!(spec.times.front() > 0.0)) {
    throw Error(Errc::InvalidConfig, "synthetic maturities must be positive");
  }
  std::vector<MarginalGrid> grids;
  grids.reserve(N * d);
  // previous marginal per asset, starting from the spot atom
  std::vector<std::vector<double>> prev_s(d, {spec.spot}), prev_w(d, {1.0});
  std::vector<std::vector<std::vector<double>>> layers(N);
  for (std::size_t t = 0; t < N; ++t) {
    const double T = spec.times[t];
    const double dt = T - (t == 0 ? 0.0 : spec.times[t - 1]);
    if (!(dt > 0.0)) throw Error(Errc::InvalidConfig, "times must increase");
    for (std::size_t i = 0; i < d; ++i) {
      const double vol = spec.volatilities[i];
      auto grid = make_grid(spec, vol, T);
      std::vector<double> next(grid.size(), 0.0);
      for (std::size_t a = 0; a < prev_s[i].size(); ++a) {
        if (prev_w[i][a] == 0.0) continue;
        const auto base = lognormal_cell_weights(grid, prev_s[i][a], vol * std::sqrt(dt));
        const auto k = tilt_to_mean(grid, base, prev_s[i][a]);
        for (std::size_t j = 0; j < grid.size(); ++j) next[j] += prev_w[i][a] * k[j];
      }
      const double total = std::accumulate(next.begin(), next.end(), 0.0);
      for (auto& x : next) x /= total;
      prev_s[i] = grid;
      prev_w[i] = next;
      grids.emplace_back(std::move(grid), std::move(next), GridLabel{t, i});
    }
  }
  return MarginalSystem(spec.times, d, std::move(grids));
}

}  // namespace mot
