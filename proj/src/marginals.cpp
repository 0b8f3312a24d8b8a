#include "mot/marginals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "csv.hpp"
#include "mot/error.hpp"

namespace mot {

MarginalGrid::MarginalGrid(std::vector<double> support,
                           std::vector<double> weights, GridLabel label)
    : support_(std::move(support)), weights_(std::move(weights)), label_(label) {
  if (support_.empty()) throw Error(Errc::InvalidGrid, "empty support");
  if (support_.size() != weights_.size()) {
    throw Error(Errc::InvalidGrid, "support and weights differ in length");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < support_.size(); ++j) {
    if (!std::isfinite(support_[j]) || !std::isfinite(weights_[j])) {
      throw Error(Errc::InvalidGrid, "non-finite support or weight");
    }
    if (j > 0 && !(support_[j] > support_[j - 1])) {
      throw Error(Errc::InvalidGrid, "support must be strictly increasing");
    }
    if (weights_[j] < 0.0) throw Error(Errc::InvalidGrid, "negative weight");
    total += weights_[j];
  }
  if (std::abs(total - 1.0) > kWeightSumTol) {
    throw Error(Errc::InvalidGrid, "weights sum to " + std::to_string(total));
  }
  for (std::size_t j = 0; j < support_.size(); ++j) {
    mean_ += weights_[j] * support_[j];
  }
}

MarginalGrid MarginalGrid::dirac(double x, GridLabel label) {
  return MarginalGrid({x}, {1.0}, label);
}

double MarginalGrid::max_spacing() const {
  double gap = 0.0;
  for (std::size_t j = 1; j < support_.size(); ++j) {
    gap = std::max(gap, support_[j] - support_[j - 1]);
  }
  return gap;
}

double potential(const MarginalGrid& m, double x) {
  double u = 0.0;
  const auto s = m.support();
  const auto w = m.weights();
  for (std::size_t j = 0; j < s.size(); ++j) u += w[j] * std::abs(x - s[j]);
  return u;
}

namespace {

std::vector<double> merged_support(const MarginalGrid& a, const MarginalGrid& b) {
  std::vector<double> pts;
  pts.reserve(a.size() + b.size());
  std::merge(a.support().begin(), a.support().end(), b.support().begin(),
             b.support().end(), std::back_inserter(pts));
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace

PairReport check_convex_order(const MarginalGrid& mu, const MarginalGrid& nu,
                              const ConvexOrderTolerance& tol) {
  PairReport rep;
  rep.asset = mu.label().asset;
  rep.t = mu.label().t;
  if (std::abs(mu.mean() - nu.mean()) > tol.mean) {
    rep.mean_mismatch = true;
    return rep;
  }
  for (double x : merged_support(mu, nu)) {
    if (potential(mu, x) > potential(nu, x) + tol.potential) {
      rep.witness = x;
      return rep;
    }
  }
  rep.in_convex_order = true;
  return rep;
}

PairReport irreducible_domain(const MarginalGrid& mu, const MarginalGrid& nu,
                              const ConvexOrderTolerance& tol) {
  PairReport rep = check_convex_order(mu, nu, tol);
  if (!rep.in_convex_order) {
    throw Error(Errc::NotInConvexOrder,
                "irreducible_domain requires mu <=_c nu");
  }

  // Both potentials are linear between merged support points and agree
  // outside their hull, so the strict set is a union of open segments
  // (detected at midpoints) and the merged points between them.
  const auto pts = merged_support(mu, nu);
  auto strict = [&](double x) {
    return potential(mu, x) - potential(nu, x) < -tol.potential;
  };

  struct Component {
    double lo, hi;
  };
  std::vector<Component> comps;
  bool open = false;
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
    const bool seg = strict(0.5 * (pts[j] + pts[j + 1]));
    if (seg && !open) {
      comps.push_back({pts[j], pts[j + 1]});
      open = true;
    } else if (seg && open) {
      if (strict(pts[j])) {
        comps.back().hi = pts[j + 1];
      } else {
        comps.push_back({pts[j], pts[j + 1]});
      }
    } else {
      open = false;
    }
  }

  // J: smallest interval carrying all of nu's mass.
  const auto ns = nu.support();
  const auto nw = nu.weights();
  std::size_t first = 0, last = ns.size() - 1;
  while (first < last && nw[first] == 0.0) ++first;
  while (last > first && nw[last] == 0.0) --last;
  rep.domain_J = Interval{ns[first], ns[last], nw[first] > 0.0, nw[last] > 0.0,
                          false};

  if (comps.size() == 1) {
    rep.domain_I = Interval{comps[0].lo, comps[0].hi, false, false, false};
    bool carries_mass = true;
    const auto ms = mu.support();
    const auto mw = mu.weights();
    for (std::size_t j = 0; j < ms.size(); ++j) {
      if (mw[j] > 0.0 && !(ms[j] > comps[0].lo && ms[j] < comps[0].hi)) {
        carries_mass = false;
      }
    }
    rep.irreducible = carries_mass;
  } else {
    rep.domain_I = Interval::empty();
    rep.irreducible = false;
  }
  rep.interior_consistent = rep.irreducible &&
                            rep.domain_I.lo == rep.domain_J.lo &&
                            rep.domain_I.hi == rep.domain_J.hi;
  return rep;
}

ExtractedDensity breeden_litzenberger(std::span<const double> strikes,
                                      std::span<const double> call_prices,
                                      bool clip_negatives, GridLabel label) {
  constexpr double kTol = 1e-8;
  if (strikes.size() != call_prices.size()) {
    throw Error(Errc::ShapeMismatch, "strikes and prices differ in length");
  }
  const std::size_t n = strikes.size();
  if (n < 3) throw Error(Errc::DegenerateGrid, "need at least 3 strikes");
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0 && !(strikes[j] > strikes[j - 1])) {
      throw Error(Errc::DegenerateGrid, "strikes must be strictly increasing");
    }
    if (call_prices[j] < -kTol) {
      throw Error(Errc::NonConvexPrices, "negative call price");
    }
  }
  std::vector<double> slope(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    slope[j] = (call_prices[j + 1] - call_prices[j]) / (strikes[j + 1] - strikes[j]);
    if (slope[j] > kTol) {
      throw Error(Errc::NonConvexPrices, "call prices increase in strike");
    }
  }

  std::vector<double> raw(n - 2);
  std::vector<double> support(strikes.begin() + 1, strikes.end() - 1);
  for (std::size_t j = 1; j + 1 < n; ++j) raw[j - 1] = slope[j] - slope[j - 1];

  ExtractedDensity out{MarginalGrid::dirac(0.0), 0.0, 0.0, 0.0};
  double raw_mean = 0.0;
  std::vector<double> mass(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    out.raw_mass += raw[j];
    raw_mean += raw[j] * support[j];
    if (raw[j] < 0.0) {
      if (raw[j] < -kTol && !clip_negatives) {
        throw Error(Errc::NonConvexPrices,
                    "negative butterfly at strike " + std::to_string(support[j]));
      }
      out.clipped_mass += -raw[j];
      mass[j] = 0.0;
    } else {
      mass[j] = raw[j];
    }
  }
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (!(total > 0.0)) throw Error(Errc::DegenerateGrid, "no positive mass");
  double mean = 0.0;
  for (std::size_t j = 0; j < mass.size(); ++j) {
    mass[j] /= total;
    mean += mass[j] * support[j];
  }
  // renormalisation leaves a rounding residue; push it to the largest atom
  const double residue =
      1.0 - std::accumulate(mass.begin(), mass.end(), 0.0);
  *std::max_element(mass.begin(), mass.end()) += residue;
  if (out.raw_mass > 0.0) out.mean_drift = mean - raw_mean / out.raw_mass;
  out.grid = MarginalGrid(std::move(support), std::move(mass), label);
  return out;
}

MarginalSystem::MarginalSystem(std::vector<double> times, std::size_t n_assets,
                               std::vector<MarginalGrid> grids)
    : times_(std::move(times)), n_assets_(n_assets), grids_(std::move(grids)) {
  if (times_.empty() || n_assets_ == 0) {
    throw Error(Errc::ShapeMismatch, "system needs at least one time and asset");
  }
  for (std::size_t t = 1; t < times_.size(); ++t) {
    if (!(times_[t] > times_[t - 1])) {
      throw Error(Errc::InvalidGrid, "times must be strictly increasing");
    }
  }
  if (grids_.size() != times_.size() * n_assets_) {
    throw Error(Errc::ShapeMismatch, "expected " +
                                         std::to_string(times_.size() * n_assets_) +
                                         " grids, got " +
                                         std::to_string(grids_.size()));
  }
  for (std::size_t t = 0; t < times_.size(); ++t) {
    for (std::size_t i = 0; i < n_assets_; ++i) {
      grids_[t * n_assets_ + i].set_label({t, i});
    }
  }
}

std::vector<std::size_t> MarginalSystem::dims() const {
  std::vector<std::size_t> d;
  d.reserve(grids_.size());
  for (const auto& g : grids_) d.push_back(g.size());
  return d;
}

MarginalSystem validate_system(MarginalSystem s, const ConvexOrderTolerance& tol) {
  s.validation_.assign(s.n_assets(), {});
  s.feasible_ = true;
  s.theorem_hypotheses_ = true;
  for (std::size_t i = 0; i < s.n_assets(); ++i) {
    for (std::size_t t = 0; t + 1 < s.n_times(); ++t) {
      const auto& mu = s.grid(t, i);
      const auto& nu = s.grid(t + 1, i);
      PairReport rep = check_convex_order(mu, nu, tol);
      if (rep.in_convex_order) rep = irreducible_domain(mu, nu, tol);
      rep.asset = i;
      rep.t = t;
      s.feasible_ = s.feasible_ && rep.in_convex_order;
      s.theorem_hypotheses_ = s.theorem_hypotheses_ && rep.irreducible;
      s.validation_[i].push_back(rep);
    }
  }
  s.theorem_hypotheses_ = s.theorem_hypotheses_ && s.feasible_;
  s.validated_ = true;
  return s;
}

MarginalGrid read_marginal_csv(const std::filesystem::path& path, GridLabel label) {
  auto cols = detail::read_numeric_csv(path, {"support", "weight"});
  return MarginalGrid(std::move(cols[0]), std::move(cols[1]), label);
}

void write_marginal_csv(const std::filesystem::path& path, const MarginalGrid& grid) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << "support,weight\n" << std::setprecision(17);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    out << grid.support()[j] << ',' << grid.weights()[j] << '\n';
  }
}

CallQuotes read_call_prices_csv(const std::filesystem::path& path) {
  auto cols = detail::read_numeric_csv(path, {"strike", "price"});
  return {std::move(cols[0]), std::move(cols[1])};
}

}  // namespace mot
