#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mot/certificates.hpp"
#include "mot/lp.hpp"
#include "mot/sparse.hpp"

namespace mot {

enum class InitialStep { PowerIteration, Fixed };

struct SolverConfig {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  /// Also require the l-infinity primal and dual residuals to be at most
  /// eps_abs. The relative test alone admits entries near 2 * eps.
  bool linf_guard = true;
  /// Budget of step attempts (accepted or rejected).
  std::size_t max_kkt_passes = 2'000'000;
  std::size_t ruiz_iters = 10;
  bool pock_chambolle = true;
  bool presolve = true;
  double restart_sufficient_decay = 0.2;
  double restart_necessary_decay = 0.8;
  /// Artificial restart once the current period reaches this fraction of
  /// all iterations so far.
  double restart_artificial_period = 0.36;
  double primal_weight_smoothing = 0.5;
  InitialStep initial_step_rule = InitialStep::PowerIteration;
  double initial_step = 1.0;  // used with InitialStep::Fixed
  std::size_t check_frequency = 64;
  bool deterministic_reductions = true;
  /// One key=value line per restart when set.
  std::ostream* log = nullptr;

  /// Throws Errc::InvalidConfig.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Preconditioning

struct Preconditioned {
  LinearProgram lp;  // scaled: A~ = R A C, c~ = C c, b~ = R b
  std::vector<double> row_scale;
  std::vector<double> col_scale;
};

/// Ruiz equilibration (simultaneous row/column sqrt-max sweeps) followed by
/// an optional Pock-Chambolle l1 pass. x = col_scale * x~, y = row_scale * y~.
Preconditioned precondition(const LinearProgram& lp, std::size_t ruiz_iters,
                            bool pock_chambolle = false);

// ---------------------------------------------------------------------------
// Presolve

/// Removes rows that force their columns to zero (zero right-hand side,
/// one-signed coefficients, compatible sense), rows left without entries,
/// and empty columns with nonnegative cost. Zero-mass marginal atoms are
/// the motivating case. The original LP must outlive this object.
class Presolve {
 public:
  explicit Presolve(const LinearProgram& lp);

  const LinearProgram& reduced() const { return reduced_; }
  std::size_t removed_rows() const { return original_->n_rows() - kept_rows_.size(); }
  std::size_t removed_cols() const { return original_->n_vars - kept_cols_.size(); }

  /// Lifts a solution of the reduced LP to the original one. Dual values of
  /// removed rows are chosen so fixed columns keep nonnegative reduced cost.
  void postsolve(std::span<const double> x_reduced, std::span<const double> y_reduced,
                 std::vector<double>& x, std::vector<double>& y) const;

 private:
  struct Removal {
    std::size_t row;
    bool fixing;  // false: empty row
  };
  const LinearProgram* original_;
  LinearProgram reduced_;
  std::vector<std::size_t> kept_rows_;
  std::vector<std::size_t> kept_cols_;
  std::vector<Removal> removals_;
  static constexpr std::size_t kNotFixed = static_cast<std::size_t>(-1);
  std::vector<std::size_t> col_fixed_by_;  // index into removals_
};

// ---------------------------------------------------------------------------
// Iteration primitives

/// A and A^T for one LP, with the configured reduction policy.
struct SaddleOperator {
  const LinearProgram* lp = nullptr;
  CsrMatrix at;
  bool deterministic = true;

  explicit SaddleOperator(const LinearProgram& problem, bool deterministic = true);
  void apply(std::span<const double> x, std::span<double> ax) const;
  void apply_t(std::span<const double> y, std::span<double> aty) const;
  double dot(std::span<const double> a, std::span<const double> b) const;
};

/// Componentwise projection onto the dual cone of the row senses:
/// free for =, y <= 0 for <=, y >= 0 for >= (for L = c'x - y'Ax + b'y).
double project_dual(Sense sense, double v);

struct SaddleState {
  std::vector<double> x, y;
  std::vector<double> ax, aty;  // cached A x and A^T y
  double eta = 1.0;
  double omega = 1.0;
  // uniform running sums since the last restart
  std::vector<double> sum_x, sum_y, sum_ax, sum_aty;
  std::size_t average_count = 0;
  std::size_t iterations = 0;  // accepted steps
  std::size_t attempts = 0;    // accepted + rejected
  std::size_t restarts = 0;
  std::size_t since_restart = 0;
  double last_restart_kkt = 0.0;
  std::vector<double> last_restart_x, last_restart_y;

  /// Zero start with averages cleared.
  static SaddleState zeros(const SaddleOperator& op);
  void average(std::vector<double>& x_avg, std::vector<double>& y_avg,
               std::vector<double>& ax_avg, std::vector<double>& aty_avg) const;
};

struct StepTrial {
  std::vector<double> x, y, ax, aty;
  double dx_sq = 0.0;
  double dy_sq = 0.0;
  double interaction = 0.0;  // (y+ - y)' A (x+ - x)
};

/// One extrapolated primal-dual update with tau = eta/omega, sigma = eta*omega.
/// Throws Errc::NonFinite if the trial iterate is not finite.
StepTrial pdhg_trial(const SaddleState& state, const SaddleOperator& op);
/// Commits a trial: iterates, caches and running averages.
void accept_trial(SaddleState& state, StepTrial&& trial);
/// pdhg_trial + accept_trial at the current eta.
void pdhg_step(SaddleState& state, const SaddleOperator& op);

/// (omega |dx|^2 + |dy|^2 / omega) / (2 |interaction|); infinity if the
/// interaction vanishes.
double step_bound(double dx_sq, double dy_sq, double interaction, double omega);
/// min((1 - (k+1)^-0.3) * bound, (1 + (k+1)^-0.6) * eta).
double next_step_size(double bound, double eta, std::size_t k);

struct StepOutcome {
  bool accepted = false;
  double bound = 0.0;
  double eta_used = 0.0;
};

/// Tries the current eta; accepts iff eta <= bound. Always updates eta to
/// the next proposal. Throws Errc::StepUnderflow below 1e-30.
StepOutcome adaptive_step(SaddleState& state, const SaddleOperator& op);

enum class RestartReason { None, SufficientDecay, NecessaryDecay, Artificial };

struct RestartDecision {
  RestartReason reason = RestartReason::None;
  bool to_average = false;
  double candidate_kkt = 0.0;
};

/// Pure restart rule on KKT errors. `previous_candidate` is the candidate
/// error at the previous check in this restart period (nullopt if none).
RestartDecision restart_rule(double kkt_current, double kkt_average,
                             double last_restart_kkt,
                             std::optional<double> previous_candidate,
                             std::size_t since_restart, std::size_t total_iterations,
                             const SolverConfig& config);

/// log w' = theta log(dy/dx) + (1 - theta) log w, skipped if either
/// movement is <= 1e-30, clamped to [1e-10, 1e10].
double primal_weight_update(double omega, double dx, double dy, double theta);

/// Scaled-space KKT error of (x, y) with cached products.
double kkt_at(const LinearProgram& lp, std::span<const double> x,
              std::span<const double> y, std::span<const double> ax,
              std::span<const double> aty);

/// Largest singular value estimate of A by power iteration from ones.
double spectral_norm_estimate(const SaddleOperator& op, std::size_t iterations = 20);

// ---------------------------------------------------------------------------
// Driver

enum class Termination { Optimal, IterationLimit };

std::string to_string(Termination t);
std::string to_string(RestartReason r);

struct RestartRecord {
  std::size_t iteration = 0;
  RestartReason reason = RestartReason::None;
  bool to_average = false;
  double kkt = 0.0;
  double eta = 0.0;
  double omega = 0.0;
};

struct Solution {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> reduced_costs;  // c - A^T y
  SolveReport report;                 // on the original LP
  Termination termination = Termination::IterationLimit;
  std::vector<RestartRecord> restarts;
  std::size_t rejected_steps = 0;
  std::size_t step_attempts = 0;
  double final_kkt = 0.0;
  std::size_t presolve_rows_removed = 0;
  std::size_t presolve_cols_removed = 0;
};

Solution solve(const LinearProgram& lp, const SolverConfig& config = {});

}  // namespace mot
