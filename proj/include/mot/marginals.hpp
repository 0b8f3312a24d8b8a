#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mot {

/// (time index, asset index) of a marginal, both zero-based.
struct GridLabel {
  std::size_t t = 0;
  std::size_t asset = 0;
};

/// Discrete one-dimensional law: strictly increasing support with
/// nonnegative weights summing to one. Prices are spot-relative.
class MarginalGrid {
 public:
  static constexpr double kWeightSumTol = 1e-12;

  MarginalGrid(std::vector<double> support, std::vector<double> weights,
               GridLabel label = {});

  static MarginalGrid dirac(double x, GridLabel label = {});

  std::span<const double> support() const { return support_; }
  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return support_.size(); }
  double mean() const { return mean_; }
  /// Largest gap between adjacent support points (0 for a single atom).
  double max_spacing() const;
  const GridLabel& label() const { return label_; }
  void set_label(GridLabel label) { label_ = label; }

 private:
  std::vector<double> support_;
  std::vector<double> weights_;
  GridLabel label_;
  double mean_ = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = false;
  bool hi_closed = false;
  bool is_empty = true;

  static Interval empty() { return {}; }
};

struct PairReport {
  std::size_t asset = 0;
  std::size_t t = 0;  // pair is (t, t + 1)
  bool in_convex_order = false;
  bool mean_mismatch = false;
  std::optional<double> witness;
  bool irreducible = false;
  Interval domain_I;
  Interval domain_J;
  /// I == int(J); only meaningful when irreducible.
  bool interior_consistent = false;
};

struct ConvexOrderTolerance {
  double potential = 1e-10;
  double mean = 1e-9;
};

/// x -> sum_j w_j |x - s_j|.
double potential(const MarginalGrid& m, double x);

/// Fills the order fields of a PairReport. Potentials are compared on the
/// merged support, which is exact for piecewise-linear potentials.
PairReport check_convex_order(const MarginalGrid& mu, const MarginalGrid& nu,
                              const ConvexOrderTolerance& tol = {});

/// Computes the open set {u_mu < u_nu} and the domain (I, J).
/// Throws Errc::NotInConvexOrder when mu is not dominated by nu.
PairReport irreducible_domain(const MarginalGrid& mu, const MarginalGrid& nu,
                              const ConvexOrderTolerance& tol = {});

struct ExtractedDensity {
  MarginalGrid grid;
  double clipped_mass = 0.0;  // total negative mass removed before renormalising
  double raw_mass = 0.0;      // sum of second differences before clipping
  double mean_drift = 0.0;    // mean(after clip) - mean(before clip)
};

/// Butterfly second differences of call prices. Support is the interior
/// strikes; negative masses are clipped when allowed, then renormalised.
ExtractedDensity breeden_litzenberger(std::span<const double> strikes,
                                      std::span<const double> call_prices,
                                      bool clip_negatives, GridLabel label = {});

/// N x d family of marginal grids, stored time-major.
class MarginalSystem {
 public:
  MarginalSystem(std::vector<double> times, std::size_t n_assets,
                 std::vector<MarginalGrid> grids);

  std::size_t n_times() const { return times_.size(); }
  std::size_t n_assets() const { return n_assets_; }
  std::span<const double> times() const { return times_; }
  const MarginalGrid& grid(std::size_t t, std::size_t asset) const {
    return grids_[t * n_assets_ + asset];
  }
  std::span<const MarginalGrid> grids() const { return grids_; }
  /// Grid sizes in time-major, asset-minor order.
  std::vector<std::size_t> dims() const;

  bool validated() const { return validated_; }
  bool feasible() const { return feasible_; }
  bool theorem_hypotheses() const { return theorem_hypotheses_; }
  /// validation()[asset][t] describes the pair (t, t + 1).
  const std::vector<std::vector<PairReport>>& validation() const {
    return validation_;
  }

 private:
  friend MarginalSystem validate_system(MarginalSystem s,
                                        const ConvexOrderTolerance& tol);

  std::vector<double> times_;
  std::size_t n_assets_ = 0;
  std::vector<MarginalGrid> grids_;
  std::vector<std::vector<PairReport>> validation_;
  bool validated_ = false;
  bool feasible_ = false;
  bool theorem_hypotheses_ = false;
};

/// Convex order and irreducibility for every (asset, consecutive time) pair.
/// Failures are recorded in the result, never thrown.
MarginalSystem validate_system(MarginalSystem s,
                               const ConvexOrderTolerance& tol = {});

enum class GridPlacement { Uniform, Quantile };

/// Lognormal-shaped marginals that are in convex order by construction:
/// each step applies an exponentially tilted lognormal kernel whose
/// conditional mean equals the starting point.
struct SyntheticSpec {
  std::vector<double> times;          // maturities in years, > 0, increasing
  std::vector<double> volatilities;   // one per asset
  std::size_t n_points = 10;
  double width = 2.5;                 // half-width in standard deviations
  GridPlacement placement = GridPlacement::Uniform;
  double spot = 1.0;
};

MarginalSystem lognormal_martingale_system(const SyntheticSpec& spec);

/// Reweights `base` by exp(lambda * s) so the mean equals `target`.
/// `target` must lie strictly inside the support hull unless the grid is a
/// single atom at `target`.
std::vector<double> tilt_to_mean(std::span<const double> support,
                                 std::span<const double> base, double target);

// CSV i/o: `support,weight` for marginals, `strike,price` for call quotes.
MarginalGrid read_marginal_csv(const std::filesystem::path& path,
                               GridLabel label = {});
void write_marginal_csv(const std::filesystem::path& path,
                        const MarginalGrid& grid);
struct CallQuotes {
  std::vector<double> strikes;
  std::vector<double> prices;
};
CallQuotes read_call_prices_csv(const std::filesystem::path& path);

}  // namespace mot
