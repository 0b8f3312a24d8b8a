#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mot/lp.hpp"
#include "mot/marginals.hpp"
#include "mot/payoff.hpp"

namespace mot {

struct NormTriple {
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;

  static NormTriple of(std::span<const double> v);
};

/// Solution-quality metrics. Objective values are in the LP's user
/// direction (un-negated for maximisation).
struct SolveReport {
  double primal_objective = 0.0;  // V_p
  double dual_objective = 0.0;    // V_d
  double duality_gap = 0.0;       // G = V_p - V_d
  std::vector<double> primal_infeasibility;  // per row, >= 0
  std::vector<double> dual_infeasibility;    // per column, >= 0
  NormTriple primal_norms;
  NormTriple dual_norms;
  std::size_t iterations = 0;
  double wall_time_s = 0.0;
};

/// Evaluates V_p, V_d, G, delta^p and delta^d at (x, y).
SolveReport compute_report(std::span<const double> x, std::span<const double> y,
                           const LinearProgram& lp);

/// Same metrics from precomputed products ax = A x and aty = A^T y.
/// Vectors are only kept when `keep_vectors` is set; norms always are.
SolveReport report_from_products(const LinearProgram& lp, std::span<const double> x,
                                 std::span<const double> y,
                                 std::span<const double> ax,
                                 std::span<const double> aty, bool keep_vectors);

/// max(|dp|_2 / (1 + |b|_inf), |dd|_2 / (1 + |c|_inf), |G| / (1 + |V_p| + |V_d|)).
/// The solver's restart logic uses exactly this function.
double kkt_error(const SolveReport& report, double rhs_norm_inf,
                 double objective_norm_inf);
double kkt_error(const SolveReport& report, const LinearProgram& lp);

/// Termination test: each residual against eps_abs + eps_rel * scale.
bool meets_tolerance(const SolveReport& report, const LinearProgram& lp,
                     double eps_abs, double eps_rel);

void write_report_json(const std::filesystem::path& path, const SolveReport& report,
                       const std::string& termination);
void write_infeasibility_csv(const std::filesystem::path& primal_path,
                             const std::filesystem::path& dual_path,
                             const SolveReport& report, const LinearProgram& lp);

enum class HedgeDirection { Sub, Super };

/// Semi-static hedge on the grid: static positions phi[t*d+i][grid point]
/// and trading positions h[t*d+k][history cell] for t < N-1.
struct DualCertificate {
  std::size_t n_times = 0;
  std::size_t n_assets = 0;
  std::vector<std::vector<double>> phi;
  std::vector<std::vector<double>> h;
  HedgeDirection direction = HedgeDirection::Sub;

  /// sum_{t,i} phi_{t,i} . mu_{t,i}
  double static_value(const MarginalSystem& system) const;
};

/// Maps LP row duals to (phi, h). Maximisation LPs yield superhedges with
/// signs flipped back to the user's direction.
DualCertificate extract_certificate(std::span<const double> y, const LinearProgram& lp);

/// Per-column slack carried by relaxed-mode duals: the Delta/2 terms that
/// the certificate's pathwise inequality absorbs. Zero in exact mode.
std::vector<double> relaxation_slack(std::span<const double> y, const LinearProgram& lp);

/// Portfolio value at a grid path: sum phi + sum h * (x_{t+1,k} - x_{t,k}).
double portfolio_value(const DualCertificate& cert, std::span<const std::size_t> idx,
                       const MarginalSystem& system);

struct PathCheck {
  double max_violation = 0.0;
  std::vector<std::size_t> worst_path;
  std::size_t worst_flat = 0;
  std::size_t paths_checked = 0;
  bool exhaustive = true;
};

struct SubhedgeOptions {
  std::size_t exhaustive_limit = 10'000'000;
  std::size_t sample_count = 1'000'000;
  std::uint64_t seed = 0;
};

/// Sub: max over paths of (portfolio - cost); Super: max of (cost - portfolio).
PathCheck verify_subhedge(const DualCertificate& cert, const CostTensor& cost,
                          const MarginalSystem& system,
                          const SubhedgeOptions& options = {});
/// Single-threaded reference of the exhaustive sweep.
PathCheck verify_subhedge_serial(const DualCertificate& cert, const CostTensor& cost,
                                 const MarginalSystem& system);

struct SupportCheck {
  double max_gap = 0.0;
  double mass_weighted_gap = 0.0;
  double support_mass = 0.0;
  std::size_t support_size = 0;
};

/// Gap |cost - portfolio| on the support {plan >= mass_floor}.
SupportCheck verify_support_equality(std::span<const double> plan,
                                     const DualCertificate& cert,
                                     const CostTensor& cost,
                                     const MarginalSystem& system,
                                     double mass_floor = 1e-8);

void write_certificate_json(const std::filesystem::path& path,
                            const DualCertificate& cert);
DualCertificate read_certificate_json(const std::filesystem::path& path);

}  // namespace mot
