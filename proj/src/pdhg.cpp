#include "mot/pdhg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "mot/error.hpp"
#include "mot/kernels.hpp"

namespace mot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

void SolverConfig::validate() const {
  if (!positive_finite(eps_abs) || !positive_finite(eps_rel)) {
    throw Error(Errc::InvalidConfig, "solver tolerances must be positive");
  }
  if (!(restart_sufficient_decay > 0.0 && restart_sufficient_decay < 1.0)) {
    throw Error(Errc::InvalidConfig, "restart_sufficient_decay must lie in (0, 1)");
  }
  if (!(restart_necessary_decay > 0.0 && restart_necessary_decay < 1.0)) {
    throw Error(Errc::InvalidConfig, "restart_necessary_decay must lie in (0, 1)");
  }
  if (!(primal_weight_smoothing >= 0.0 && primal_weight_smoothing <= 1.0)) {
    throw Error(Errc::InvalidConfig, "primal_weight_smoothing must lie in [0, 1]");
  }
  if (!(restart_artificial_period > 0.0)) {
    throw Error(Errc::InvalidConfig, "restart_artificial_period must be positive");
  }
  if (check_frequency == 0) {
    throw Error(Errc::InvalidConfig, "check_frequency must be positive");
  }
  if (initial_step_rule == InitialStep::Fixed && !positive_finite(initial_step)) {
    throw Error(Errc::InvalidConfig, "initial_step must be positive");
  }
}

SaddleOperator::SaddleOperator(const LinearProgram& problem, bool det)
    : lp(&problem), at(transpose(problem.matrix)), deterministic(det) {}

void SaddleOperator::apply(std::span<const double> x, std::span<double> ax) const {
  kernels::omp::spmv(lp->matrix, x, ax);
}

void SaddleOperator::apply_t(std::span<const double> y, std::span<double> aty) const {
  kernels::omp::spmv(at, y, aty);
}

double SaddleOperator::dot(std::span<const double> a, std::span<const double> b) const {
  return kernels::omp::dot(a, b, deterministic);
}

double project_dual(Sense sense, double v) {
  switch (sense) {
    case Sense::Equal: return v;
    case Sense::LessEqual: return std::min(v, 0.0);
    case Sense::GreaterEqual: return std::max(v, 0.0);
  }
  return v;
}

SaddleState SaddleState::zeros(const SaddleOperator& op) {
  const std::size_t n = op.lp->n_vars;
  const std::size_t m = op.lp->n_rows();
  SaddleState s;
  s.x.assign(n, 0.0);
  s.ax.assign(m, 0.0);
  s.y.assign(m, 0.0);
  s.aty.assign(n, 0.0);
  s.sum_x.assign(n, 0.0);
  s.sum_aty.assign(n, 0.0);
  s.sum_y.assign(m, 0.0);
  s.sum_ax.assign(m, 0.0);
  s.last_restart_x = s.x;
  s.last_restart_y = s.y;
  return s;
}

void SaddleState::average(std::vector<double>& x_avg, std::vector<double>& y_avg,
                          std::vector<double>& ax_avg,
                          std::vector<double>& aty_avg) const {
  if (average_count == 0) {
    x_avg = x;
    y_avg = y;
    ax_avg = ax;
    aty_avg = aty;
    return;
  }
  const double w = 1.0 / static_cast<double>(average_count);
  auto scale = [w](const std::vector<double>& src, std::vector<double>& dst) {
    dst.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * w;
  };
  scale(sum_x, x_avg);
  scale(sum_y, y_avg);
  scale(sum_ax, ax_avg);
  scale(sum_aty, aty_avg);
}

StepTrial pdhg_trial(const SaddleState& s, const SaddleOperator& op) {
  const LinearProgram& lp = *op.lp;
  const std::size_t n = lp.n_vars;
  const std::size_t m = lp.n_rows();
  const double tau = s.eta / s.omega;
  const double sigma = s.eta * s.omega;

  StepTrial t;
  t.x.resize(n);
  t.ax.resize(m);
  t.y.resize(m);
  t.aty.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    t.x[j] = std::max(0.0, s.x[j] - tau * (lp.objective[j] - s.aty[j]));
  }
  op.apply(t.x, t.ax);
  for (std::size_t i = 0; i < m; ++i) {
    const double v = s.y[i] + sigma * (lp.rhs[i] - 2.0 * t.ax[i] + s.ax[i]);
    t.y[i] = project_dual(lp.senses[i], v);
  }
  op.apply_t(t.y, t.aty);

  std::vector<double> dx(n), dy(m), daty(n);
  for (std::size_t j = 0; j < n; ++j) {
    dx[j] = t.x[j] - s.x[j];
    daty[j] = t.aty[j] - s.aty[j];
  }
  for (std::size_t i = 0; i < m; ++i) dy[i] = t.y[i] - s.y[i];
  t.dx_sq = op.dot(dx, dx);
  t.dy_sq = op.dot(dy, dy);
  t.interaction = op.dot(dx, daty);
  if (!std::isfinite(t.dx_sq) || !std::isfinite(t.dy_sq) ||
      !std::isfinite(t.interaction)) {
    throw Error(Errc::NonFinite, "PDHG iterate is not finite after " +
                                     std::to_string(s.iterations) + " iterations");
  }
  return t;
}

void accept_trial(SaddleState& s, StepTrial&& t) {
  s.x = std::move(t.x);
  s.y = std::move(t.y);
  s.ax = std::move(t.ax);
  s.aty = std::move(t.aty);
  auto add = [](std::vector<double>& sum, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i];
  };
  add(s.sum_x, s.x);
  add(s.sum_y, s.y);
  add(s.sum_ax, s.ax);
  add(s.sum_aty, s.aty);
  ++s.average_count;
  ++s.iterations;
  ++s.since_restart;
}

void pdhg_step(SaddleState& state, const SaddleOperator& op) {
  accept_trial(state, pdhg_trial(state, op));
}

double step_bound(double dx_sq, double dy_sq, double interaction, double omega) {
  if (interaction == 0.0) return kInf;
  return (omega * dx_sq + dy_sq / omega) / (2.0 * std::abs(interaction));
}

double next_step_size(double bound, double eta, std::size_t k) {
  const double kk = static_cast<double>(k + 1);
  const double shrink = (1.0 - std::pow(kk, -0.3)) * bound;
  const double grow = (1.0 + std::pow(kk, -0.6)) * eta;
  return std::min(shrink, grow);
}

StepOutcome adaptive_step(SaddleState& state, const SaddleOperator& op) {
  StepTrial trial = pdhg_trial(state, op);
  ++state.attempts;
  StepOutcome out;
  out.eta_used = state.eta;
  out.bound = step_bound(trial.dx_sq, trial.dy_sq, trial.interaction, state.omega);
  out.accepted = state.eta <= out.bound;
  const double next = next_step_size(out.bound, state.eta, state.attempts);
  if (out.accepted) accept_trial(state, std::move(trial));
  state.eta = next;
  if (!(state.eta >= 1e-30)) {
    throw Error(Errc::StepUnderflow,
                "step size fell below 1e-30 after " + std::to_string(state.attempts) +
                    " attempts");
  }
  return out;
}

RestartDecision restart_rule(double kkt_current, double kkt_average,
                             double last_restart_kkt,
                             std::optional<double> previous_candidate,
                             std::size_t since_restart, std::size_t total_iterations,
                             const SolverConfig& config) {
  RestartDecision d;
  d.to_average = kkt_average < kkt_current;
  d.candidate_kkt = d.to_average ? kkt_average : kkt_current;
  if (since_restart == 0) return d;
  const double c = d.candidate_kkt;
  if (c <= config.restart_sufficient_decay * last_restart_kkt) {
    d.reason = RestartReason::SufficientDecay;
  } else if (c <= config.restart_necessary_decay * last_restart_kkt &&
             previous_candidate && c > *previous_candidate) {
    d.reason = RestartReason::NecessaryDecay;
  } else if (static_cast<double>(since_restart) >=
                 config.restart_artificial_period * static_cast<double>(total_iterations) &&
             c <= last_restart_kkt) {
    // only restarts that do not raise the recorded error
    d.reason = RestartReason::Artificial;
  }
  return d;
}

double primal_weight_update(double omega, double dx, double dy, double theta) {
  if (!(dx > 1e-30) || !(dy > 1e-30)) return omega;
  const double log_w = theta * std::log(dy / dx) + (1.0 - theta) * std::log(omega);
  return std::clamp(std::exp(log_w), 1e-10, 1e10);
}

double kkt_at(const LinearProgram& lp, std::span<const double> x,
              std::span<const double> y, std::span<const double> ax,
              std::span<const double> aty) {
  const SolveReport r = report_from_products(lp, x, y, ax, aty, false);
  return kkt_error(r, kernels::serial::norm_inf(lp.rhs),
                   kernels::serial::norm_inf(lp.objective));
}

double spectral_norm_estimate(const SaddleOperator& op, std::size_t iterations) {
  const std::size_t n = op.lp->n_vars;
  if (n == 0 || op.lp->n_rows() == 0) return 0.0;
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> av(op.lp->n_rows()), w(n);
  double sigma = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    op.apply(v, av);
    op.apply_t(av, w);
    const double norm = std::sqrt(op.dot(w, w));
    if (norm == 0.0) return 0.0;
    sigma = std::sqrt(norm);  // |A^T A v| -> sigma_max^2 for unit v
    for (std::size_t j = 0; j < n; ++j) v[j] = w[j] / norm;
  }
  return sigma;
}

std::string to_string(Termination t) {
  return t == Termination::Optimal ? "optimal" : "iteration_limit";
}

std::string to_string(RestartReason r) {
  switch (r) {
    case RestartReason::None: return "none";
    case RestartReason::SufficientDecay: return "sufficient";
    case RestartReason::NecessaryDecay: return "necessary";
    case RestartReason::Artificial: return "artificial";
  }
  return "none";
}

namespace {

// Iterates (x, y) of the scaled problem mapped back to the presolved LP,
// with the matching unscaled products.
struct Unscaled {
  std::vector<double> x, y, ax, aty;
};

Unscaled unscale(const Preconditioned& pre, std::span<const double> x,
                 std::span<const double> y, std::span<const double> ax,
                 std::span<const double> aty) {
  Unscaled u;
  const std::size_t n = x.size(), m = y.size();
  u.x.resize(n);
  u.aty.resize(n);
  u.y.resize(m);
  u.ax.resize(m);
  for (std::size_t j = 0; j < n; ++j) {
    u.x[j] = pre.col_scale[j] * x[j];
    u.aty[j] = aty[j] / pre.col_scale[j];
  }
  for (std::size_t i = 0; i < m; ++i) {
    u.y[i] = pre.row_scale[i] * y[i];
    u.ax[i] = ax[i] / pre.row_scale[i];
  }
  return u;
}

double distance(const SaddleOperator& op, std::span<const double> a,
                std::span<const double> b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return std::sqrt(op.dot(d, d));
}

}  // namespace

Solution solve(const LinearProgram& lp, const SolverConfig& config) {
  config.validate();
  lp.validate();
  const auto start = std::chrono::steady_clock::now();

  std::optional<Presolve> presolve;
  if (config.presolve) presolve.emplace(lp);
  const LinearProgram& work = presolve ? presolve->reduced() : lp;

  const Preconditioned pre = precondition(work, config.ruiz_iters, config.pock_chambolle);
  const SaddleOperator op(pre.lp, config.deterministic_reductions);
  SaddleState state = SaddleState::zeros(op);

  const double b_inf = kernels::serial::norm_inf(pre.lp.rhs);
  const double c_inf = kernels::serial::norm_inf(pre.lp.objective);
  auto scaled_kkt = [&](std::span<const double> x, std::span<const double> y,
                        std::span<const double> ax, std::span<const double> aty) {
    const SolveReport r = report_from_products(pre.lp, x, y, ax, aty, false);
    return kkt_error(r, b_inf, c_inf);
  };
  auto converged = [&](std::span<const double> x, std::span<const double> y,
                       std::span<const double> ax, std::span<const double> aty) {
    const Unscaled u = unscale(pre, x, y, ax, aty);
    const SolveReport r = report_from_products(work, u.x, u.y, u.ax, u.aty, false);
    if (config.linf_guard &&
        (r.primal_norms.linf > config.eps_abs || r.dual_norms.linf > config.eps_abs)) {
      return false;
    }
    return meets_tolerance(r, work, config.eps_abs, config.eps_rel);
  };

  if (config.initial_step_rule == InitialStep::Fixed) {
    state.eta = config.initial_step;
  } else {
    const double s = spectral_norm_estimate(op);
    state.eta = s > 0.0 ? 1.0 / s : 1.0;
  }
  {
    const double cn = std::sqrt(op.dot(pre.lp.objective, pre.lp.objective));
    const double bn = std::sqrt(op.dot(pre.lp.rhs, pre.lp.rhs));
    state.omega = (cn > 0.0 && bn > 0.0) ? std::clamp(cn / bn, 1e-10, 1e10) : 1.0;
  }
  state.last_restart_kkt = scaled_kkt(state.x, state.y, state.ax, state.aty);

  Solution sol;
  bool done = converged(state.x, state.y, state.ax, state.aty);
  std::optional<double> previous_candidate;
  std::vector<double> xa, ya, axa, atya;
  auto adopt_average = [&] {
    state.x = xa;
    state.y = ya;
    state.ax = axa;
    state.aty = atya;
  };

  while (!done && state.attempts < config.max_kkt_passes) {
    const StepOutcome step = adaptive_step(state, op);
    if (!step.accepted) {
      ++sol.rejected_steps;
      continue;
    }
    if (state.iterations % config.check_frequency != 0) continue;

    state.average(xa, ya, axa, atya);
    const double k_cur = scaled_kkt(state.x, state.y, state.ax, state.aty);
    const double k_avg = scaled_kkt(xa, ya, axa, atya);
    // termination is tested on the lower-error iterate first
    const bool avg_first = k_avg < k_cur;
    const bool avg_ok = avg_first && converged(xa, ya, axa, atya);
    const bool cur_ok = !avg_ok && converged(state.x, state.y, state.ax, state.aty);
    if (avg_ok || cur_ok || (!avg_first && converged(xa, ya, axa, atya))) {
      if (!cur_ok) adopt_average();
      done = true;
      break;
    }

    const RestartDecision d =
        restart_rule(k_cur, k_avg, state.last_restart_kkt, previous_candidate,
                     state.since_restart, state.iterations, config);
    if (d.reason == RestartReason::None) {
      previous_candidate = d.candidate_kkt;
      continue;
    }
    if (d.to_average) adopt_average();
    const double dx = distance(op, state.x, state.last_restart_x);
    const double dy = distance(op, state.y, state.last_restart_y);
    state.omega = primal_weight_update(state.omega, dx, dy, config.primal_weight_smoothing);
    state.last_restart_x = state.x;
    state.last_restart_y = state.y;
    state.last_restart_kkt = d.candidate_kkt;
    std::fill(state.sum_x.begin(), state.sum_x.end(), 0.0);
    std::fill(state.sum_y.begin(), state.sum_y.end(), 0.0);
    std::fill(state.sum_ax.begin(), state.sum_ax.end(), 0.0);
    std::fill(state.sum_aty.begin(), state.sum_aty.end(), 0.0);
    state.average_count = 0;
    state.since_restart = 0;
    ++state.restarts;
    previous_candidate.reset();
    sol.restarts.push_back({state.iterations, d.reason, d.to_average, d.candidate_kkt,
                            state.eta, state.omega});

    if (config.log) {
      const Unscaled u = unscale(pre, state.x, state.y, state.ax, state.aty);
      const SolveReport r = report_from_products(work, u.x, u.y, u.ax, u.aty, false);
      *config.log << "iteration=" << state.iterations
                  << " primal_residual=" << r.primal_norms.l2
                  << " dual_residual=" << r.dual_norms.l2 << " gap=" << r.duality_gap
                  << " eta=" << state.eta << " omega=" << state.omega
                  << " reason=" << to_string(d.reason) << '\n';
    }
  }

  if (!done) {
    // budget exhausted: report the better of current and average
    state.average(xa, ya, axa, atya);
    if (scaled_kkt(xa, ya, axa, atya) < scaled_kkt(state.x, state.y, state.ax, state.aty)) {
      adopt_average();
    }
  }
  sol.final_kkt = scaled_kkt(state.x, state.y, state.ax, state.aty);
  sol.termination = done ? Termination::Optimal : Termination::IterationLimit;
  sol.step_attempts = state.attempts;

  Unscaled u = unscale(pre, state.x, state.y, state.ax, state.aty);
  if (presolve) {
    presolve->postsolve(u.x, u.y, sol.x, sol.y);
    sol.presolve_rows_removed = presolve->removed_rows();
    sol.presolve_cols_removed = presolve->removed_cols();
  } else {
    sol.x = std::move(u.x);
    sol.y = std::move(u.y);
  }

  std::vector<double> ax(lp.n_rows()), aty(lp.n_vars);
  kernels::omp::spmv(lp.matrix, sol.x, ax);
  kernels::omp::spmv(transpose(lp.matrix), sol.y, aty);
  sol.report = report_from_products(lp, sol.x, sol.y, ax, aty, true);
  sol.reduced_costs.resize(lp.n_vars);
  for (std::size_t j = 0; j < lp.n_vars; ++j) sol.reduced_costs[j] = lp.objective[j] - aty[j];
  sol.report.iterations = state.iterations;
  sol.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

}  // namespace mot
