#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "mot/error.hpp"
#include "mot/kernels.hpp"
#include "mot/pdhg.hpp"
#include "mot/simplex.hpp"
#include "support.hpp"

using namespace mot;
using testing::Rng;

namespace {

LinearProgram dense_lp(std::size_t rows, std::size_t cols, const std::vector<double>& a,
                       std::vector<double> b, std::vector<double> c,
                       std::vector<Sense> senses) {
  LinearProgram lp;
  lp.n_vars = cols;
  lp.objective = std::move(c);
  lp.rhs = std::move(b);
  lp.senses = std::move(senses);
  lp.matrix.rows = rows;
  lp.matrix.cols = cols;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (a[i * cols + j] != 0.0) {
        lp.matrix.indices.push_back(static_cast<std::uint32_t>(j));
        lp.matrix.values.push_back(a[i * cols + j]);
      }
    }
    lp.matrix.offsets.push_back(lp.matrix.values.size());
  }
  return lp;
}

// min x s.t. x = 1
LinearProgram unit_lp() { return dense_lp(1, 1, {1.0}, {1.0}, {1.0}, {Sense::Equal}); }

LinearProgram random_mot_lp(Rng& rng, std::size_t d, std::size_t n,
                            MartingaleMode mode = MartingaleMode::Exact) {
  const auto s = testing::random_system(rng, d, n);
  return build_lp(s, testing::random_cost(rng, s, Direction::Minimize), mode);
}

std::vector<double> dense_of(const CsrMatrix& a) {
  std::vector<double> out(a.rows * a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) {
      out[i * a.cols + a.indices[p]] = a.values[p];
    }
  }
  return out;
}

}  // namespace

// --- preconditioning -----------------------------------------------------------

TEST_CASE("Ruiz on a 1x1 matrix splits the scale symmetrically") {
  LinearProgram lp = dense_lp(1, 1, {2.0}, {1.0}, {1.0}, {Sense::Equal});
  const auto p = precondition(lp, 10);
  CHECK(p.lp.matrix.values[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.row_scale[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(p.col_scale[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("Ruiz leaves the identity alone") {
  LinearProgram lp = dense_lp(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {1, 2, 3}, {1, 1, 1},
                              {Sense::Equal, Sense::Equal, Sense::Equal});
  const auto p = precondition(lp, 10);
  for (double v : p.lp.matrix.values) CHECK(v == 1.0);
  for (double v : p.row_scale) CHECK(v == 1.0);
  for (double v : p.col_scale) CHECK(v == 1.0);
  CHECK(p.lp.rhs == lp.rhs);
}

TEST_CASE("one Ruiz sweep equilibrates a badly scaled diagonal") {
  LinearProgram lp = dense_lp(2, 2, {100, 0, 0, 0.01}, {1, 1}, {1, 1},
                              {Sense::Equal, Sense::Equal});
  const auto p = precondition(lp, 1);
  CHECK(p.lp.matrix.values[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.lp.matrix.values[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("preconditioned matrices are bounded and consistent with the scales") {
  Rng rng(40);
  for (int trial = 0; trial < 10; ++trial) {
    const auto lp = random_mot_lp(rng, 1 + trial % 2, 4);
    for (bool pc : {false, true}) {
      const auto p = precondition(lp, 10, pc);
      for (double v : p.lp.matrix.values) CHECK(std::abs(v) <= 1.0 + 1e-12);
      for (std::size_t i = 0; i < lp.n_rows(); ++i) {
        for (std::size_t q = lp.matrix.offsets[i]; q < lp.matrix.offsets[i + 1]; ++q) {
          const double expect = p.row_scale[i] * lp.matrix.values[q] * p.col_scale[lp.matrix.indices[q]];
          CHECK(p.lp.matrix.values[q] == doctest::Approx(expect).epsilon(1e-13));
        }
        CHECK(p.lp.rhs[i] == doctest::Approx(p.row_scale[i] * lp.rhs[i]).epsilon(1e-14));
      }
    }
  }
}

// --- iteration primitives --------------------------------------------------------

TEST_CASE("hand iteration on min x s.t. x = 1") {
  const auto lp = unit_lp();
  const SaddleOperator op(lp);
  SaddleState s = SaddleState::zeros(op);
  s.eta = 0.5;
  s.omega = 1.0;
  pdhg_step(s, op);
  CHECK(s.x[0] == 0.0);
  CHECK(s.y[0] == 0.5);

  SaddleState f = SaddleState::zeros(op);
  f.eta = 0.5;
  f.x = {1.0};
  f.y = {1.0};
  f.ax = {1.0};
  f.aty = {1.0};
  pdhg_step(f, op);
  CHECK(f.x[0] == 1.0);
  CHECK(f.y[0] == 1.0);
}

TEST_CASE("dual projection respects the row-sense cone") {
  CHECK(project_dual(Sense::Equal, -3.0) == -3.0);
  CHECK(project_dual(Sense::LessEqual, 2.0) == 0.0);
  CHECK(project_dual(Sense::LessEqual, -2.0) == -2.0);
  CHECK(project_dual(Sense::GreaterEqual, -2.0) == 0.0);
  CHECK(project_dual(Sense::GreaterEqual, 2.0) == 2.0);
}

TEST_CASE("step bound examples") {
  CHECK(std::isinf(step_bound(1.0, 1.0, 0.0, 1.0)));
  CHECK(step_bound(1.0, 1.0, 1.0, 1.0) == 1.0);
  CHECK(0.5 <= step_bound(1.0, 1.0, 1.0, 1.0));
  CHECK_FALSE(2.0 <= step_bound(1.0, 1.0, -1.0, 1.0));
  // next proposal never exceeds the growth cap nor the shrunk bound
  CHECK(next_step_size(1.0, 0.5, 0) == doctest::Approx(std::min((1 - 1.0) * 1.0, 1.5 * 0.5)));
  CHECK(next_step_size(10.0, 0.5, 3) == doctest::Approx((1 + std::pow(4.0, -0.6)) * 0.5));
}

TEST_CASE("zero matrix accepts any step") {
  LinearProgram lp = dense_lp(1, 1, {0.0}, {0.0}, {1.0}, {Sense::Equal});
  const SaddleOperator op(lp);
  SaddleState s = SaddleState::zeros(op);
  s.eta = 1e6;
  const auto out = adaptive_step(s, op);
  CHECK(out.accepted);
  CHECK(std::isinf(out.bound));
}

TEST_CASE("scalar trial: eta 0.5 accepted, eta 2 rejected") {
  // A = [1]; from (x, y) = (0, 0) with c = -1 and b = 1 a unit step
  // moves both coordinates by eta.
  const auto lp = dense_lp(1, 1, {1.0}, {1.0}, {-1.0}, {Sense::Equal});
  const SaddleOperator op(lp);
  for (double eta : {0.5, 2.0}) {
    SaddleState s = SaddleState::zeros(op);
    s.eta = eta;
    const auto out = adaptive_step(s, op);
    // dx = eta, dy = eta * (1 - 2 eta): bound depends on eta, so compare
    // against an independent evaluation of the displayed condition
    const double dx = eta, dy = eta * (1.0 - 2.0 * eta);
    const double bound = (dx * dx + dy * dy) / (2.0 * std::abs(dx * dy));
    if (std::isinf(bound)) {
      CHECK(std::isinf(out.bound));
    } else {
      CHECK(out.bound == doctest::Approx(bound));
    }
    CHECK(out.accepted == (eta <= bound));
    CHECK(out.accepted == (eta == 0.5));
  }
  // the literal example: a trial with dx = dy = 1 has bound 1
  CHECK((0.5 <= step_bound(1, 1, 1, 1)) == true);
  CHECK((2.0 <= step_bound(1, 1, 1, 1)) == false);
}

TEST_CASE("step condition holds on every accepted step (dense recompute)") {
  Rng rng(41);
  for (int inst = 0; inst < 3; ++inst) {
    const auto lp = random_mot_lp(rng, 1 + inst % 2, 3, inst == 2 ? MartingaleMode::Relaxed
                                                                  : MartingaleMode::Exact);
    const SaddleOperator op(lp);
    const auto a = dense_of(lp.matrix);
    SaddleState s = SaddleState::zeros(op);
    s.eta = 1.0 / spectral_norm_estimate(op);
    std::size_t accepted = 0;
    for (int it = 0; it < 1000; ++it) {
      const auto x0 = s.x, y0 = s.y;
      const auto out = adaptive_step(s, op);
      if (!out.accepted) continue;
      ++accepted;
      double nx = 0, ny = 0, inter = 0;
      std::vector<double> dx(lp.n_vars), dy(lp.n_rows());
      for (std::size_t j = 0; j < lp.n_vars; ++j) dx[j] = s.x[j] - x0[j], nx += dx[j] * dx[j];
      for (std::size_t i = 0; i < lp.n_rows(); ++i) dy[i] = s.y[i] - y0[i], ny += dy[i] * dy[i];
      for (std::size_t i = 0; i < lp.n_rows(); ++i) {
        for (std::size_t j = 0; j < lp.n_vars; ++j) inter += dy[i] * a[i * lp.n_vars + j] * dx[j];
      }
      const double lhs = out.eta_used * 2.0 * std::abs(inter);
      const double rhs = s.omega * nx + ny / s.omega;
      CHECK(lhs <= rhs + 1e-12 * std::max(1.0, rhs));
      for (double v : s.x) CHECK(v >= 0.0);
      for (std::size_t i = 0; i < lp.n_rows(); ++i) {
        CHECK(project_dual(lp.senses[i], s.y[i]) == s.y[i]);
      }
    }
    CHECK(accepted > 0);
  }
}

TEST_CASE("restart rule examples") {
  SolverConfig cfg;
  // nothing happened since the restart
  CHECK(restart_rule(1.0, 1.0, 1.0, std::nullopt, 0, 10, cfg).reason == RestartReason::None);
  // average dropped from 1.0 to 0.1
  const auto d = restart_rule(0.5, 0.1, 1.0, std::nullopt, 5, 100, cfg);
  CHECK(d.reason == RestartReason::SufficientDecay);
  CHECK(d.to_average);
  CHECK(d.candidate_kkt == 0.1);
  // necessary decay needs the candidate to have turned upward
  CHECK(restart_rule(0.7, 0.9, 1.0, 0.6, 5, 100, cfg).reason == RestartReason::NecessaryDecay);
  CHECK(restart_rule(0.7, 0.9, 1.0, 0.75, 5, 100, cfg).reason == RestartReason::None);
  // long period without progress beyond the last restart
  CHECK(restart_rule(0.95, 0.99, 1.0, 0.94, 40, 100, cfg).reason == RestartReason::Artificial);
  CHECK(restart_rule(1.5, 1.2, 1.0, 1.1, 40, 100, cfg).reason == RestartReason::None);
}

TEST_CASE("primal weight update examples") {
  CHECK(primal_weight_update(1.0, 2.0, 2.0, 0.5) == doctest::Approx(1.0));
  CHECK(primal_weight_update(1.0, 1.0, 4.0, 1.0) == doctest::Approx(4.0));
  CHECK(primal_weight_update(3.0, 0.0, 4.0, 0.5) == 3.0);
  CHECK(primal_weight_update(1.0, 1e-20, 1e20, 1.0) == 1e10);
  CHECK(primal_weight_update(4.0, 1.0, 1.0, 0.5) == doctest::Approx(2.0));
}

TEST_CASE("spectral norm estimate") {
  const auto lp = dense_lp(2, 2, {3, 0, 0, 1}, {1, 1}, {1, 1}, {Sense::Equal, Sense::Equal});
  const SaddleOperator op(lp);
  CHECK(spectral_norm_estimate(op) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.eps_abs = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.restart_sufficient_decay = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.primal_weight_smoothing = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
}

// --- solve -------------------------------------------------------------------------

TEST_CASE("solve: min x s.t. x = 1") {
  const auto sol = solve(unit_lp());
  CHECK(sol.termination == Termination::Optimal);
  CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.report.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(sol.report.duality_gap) <= 1e-8);
}

TEST_CASE("solve: unique coupling") {
  const auto s = testing::unique_coupling_system();
  for (auto dir : {Direction::Minimize, Direction::Maximize}) {
    const auto lp = build_lp(s, testing::abs_increment_cost(s, dir), MartingaleMode::Exact);
    const auto sol = solve(lp);
    CHECK(sol.termination == Termination::Optimal);
    CHECK(sol.report.primal_objective == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(std::abs(sol.x[0] - 0.5) <= 1e-7);
    CHECK(std::abs(sol.x[1] - 0.5) <= 1e-7);
  }
}

TEST_CASE("solve matches the simplex oracle on random d = 2, T = 2, n = 3 instances") {
  Rng rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const auto lp = random_mot_lp(rng, 2, 3);
    const auto sol = solve(lp);
    REQUIRE(sol.termination == Termination::Optimal);
    const auto cc = cross_check(lp, sol, 1e-6);
    CHECK(cc.status == SimplexStatus::Optimal);
    CHECK(cc.relative_error <= 1e-6);
  }
}

TEST_CASE("converged residuals respect eps_abs entrywise") {
  Rng rng(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto lp = random_mot_lp(rng, 1 + trial % 2, 4);
    SolverConfig cfg;
    cfg.eps_abs = 1e-7;
    cfg.eps_rel = 1e-7;
    const auto sol = solve(lp, cfg);
    REQUIRE(sol.termination == Termination::Optimal);
    CHECK(sol.report.primal_norms.linf <= 1e-7);
    CHECK(sol.report.dual_norms.linf <= 1e-7);
  }
}

TEST_CASE("solve handles inequality rows (relaxed mode)") {
  Rng rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const auto lp = random_mot_lp(rng, 1 + trial % 2, 3, MartingaleMode::Relaxed);
    const auto sol = solve(lp);
    REQUIRE(sol.termination == Termination::Optimal);
    CHECK(cross_check(lp, sol, 1e-6).relative_error <= 1e-6);
    for (std::size_t i = 0; i < lp.n_rows(); ++i) CHECK(project_dual(lp.senses[i], sol.y[i]) == sol.y[i]);
  }
}

TEST_CASE("scaling equivariance") {
  Rng rng(44);
  SolverConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    const auto lp = random_mot_lp(rng, 1 + trial % 2, 3);
    const auto base = solve(lp, cfg);
    REQUIRE(base.termination == Termination::Optimal);

    // solving without the preconditioner
    SolverConfig raw = cfg;
    raw.ruiz_iters = 0;
    raw.pock_chambolle = false;
    const auto unscaled = solve(lp, raw);
    REQUIRE(unscaled.termination == Termination::Optimal);

    // solving an explicitly rescaled copy: rows by r, columns by c
    LinearProgram scaled = lp;
    std::vector<double> r(lp.n_rows()), c(lp.n_vars);
    for (auto& v : r) v = std::exp(testing::uniform(rng, -2, 2));
    for (auto& v : c) v = std::exp(testing::uniform(rng, -2, 2));
    for (std::size_t i = 0; i < lp.n_rows(); ++i) {
      for (std::size_t p = lp.matrix.offsets[i]; p < lp.matrix.offsets[i + 1]; ++p) {
        scaled.matrix.values[p] *= r[i] * c[lp.matrix.indices[p]];
      }
      scaled.rhs[i] *= r[i];
    }
    for (std::size_t j = 0; j < lp.n_vars; ++j) scaled.objective[j] *= c[j];
    const auto rescaled = solve(scaled, cfg);
    REQUIRE(rescaled.termination == Termination::Optimal);

    const double v = base.report.primal_objective;
    const double allowance = 10.0 * (cfg.eps_abs + cfg.eps_rel * std::abs(v));
    CHECK(std::abs(unscaled.report.primal_objective - v) <= allowance);
    CHECK(std::abs(rescaled.report.primal_objective - v) <= allowance);
  }
}

TEST_CASE("deterministic mode is bit-identical across runs") {
  Rng rng(45);
  const auto lp = random_mot_lp(rng, 2, 4);
  SolverConfig cfg;
  cfg.deterministic_reductions = true;
  const auto a = solve(lp, cfg);
  const auto b = solve(lp, cfg);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.report.iterations == b.report.iterations);
  CHECK(a.report.primal_objective == b.report.primal_objective);
}

TEST_CASE("restart errors never increase") {
  Rng rng(46);
  for (int trial = 0; trial < 5; ++trial) {
    const auto lp = random_mot_lp(rng, 2, 4);
    SolverConfig cfg;
    cfg.eps_abs = cfg.eps_rel = 1e-10;
    const auto sol = solve(lp, cfg);
    for (std::size_t k = 1; k < sol.restarts.size(); ++k) {
      CHECK(sol.restarts[k].kkt <= sol.restarts[k - 1].kkt);
    }
  }
}

TEST_CASE("iteration budget is reported, not thrown") {
  Rng rng(47);
  const auto lp = random_mot_lp(rng, 2, 4);
  SolverConfig cfg;
  cfg.max_kkt_passes = 1;
  const auto sol = solve(lp, cfg);
  CHECK(sol.termination == Termination::IterationLimit);
  CHECK(sol.step_attempts == 1);
  CHECK(sol.x.size() == lp.n_vars);
}

TEST_CASE("restart log lines are key=value") {
  Rng rng(48);
  const auto lp = random_mot_lp(rng, 2, 4);
  std::ostringstream log;
  SolverConfig cfg;
  cfg.log = &log;
  const auto sol = solve(lp, cfg);
  std::istringstream in(log.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    for (const char* key : {"iteration=", "primal_residual=", "dual_residual=", "gap=", "eta=",
                            "omega="}) {
      CHECK(line.find(key) != std::string::npos);
    }
  }
  CHECK(lines == sol.restarts.size());
}

TEST_CASE("presolve removes zero-mass atoms and postsolve recovers the optimum") {
  std::vector<MarginalGrid> g{MarginalGrid::dirac(0.0, {0, 0}),
                              MarginalGrid({-1.0, 0.0, 1.0}, {0.5, 0.0, 0.5}, {1, 0})};
  const auto s = validate_system(MarginalSystem({1.0, 2.0}, 1, std::move(g)));
  const auto lp = build_lp(s, testing::abs_increment_cost(s, Direction::Maximize), MartingaleMode::Exact);
  const Presolve pre(lp);
  CHECK(pre.removed_rows() >= 1);
  CHECK(pre.removed_cols() >= 1);
  const auto sol = solve(lp);
  REQUIRE(sol.termination == Termination::Optimal);
  CHECK(sol.presolve_rows_removed >= 1);
  CHECK(sol.report.primal_objective == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.x[1] == 0.0);
  // the lifted duals keep every reduced cost nonnegative
  for (double r : sol.reduced_costs) CHECK(r >= -1e-7);
}

TEST_CASE("presolve handles zero-mass atoms on random instances") {
  Rng rng(49);
  for (int trial = 0; trial < 10; ++trial) {
    auto base = testing::random_system(rng, 1 + trial % 2, 4);
    // add a zero-weight atom beyond the last support point of each late grid
    std::vector<MarginalGrid> grids(base.grids().begin(), base.grids().end());
    for (std::size_t k = 0; k < base.n_assets(); ++k) {
      auto& g = grids[base.n_assets() + k];
      std::vector<double> s(g.support().begin(), g.support().end());
      std::vector<double> w(g.weights().begin(), g.weights().end());
      s.push_back(s.back() + 0.1);
      w.push_back(0.0);
      g = MarginalGrid(s, w, g.label());
    }
    const auto sys = validate_system(MarginalSystem({1.0, 2.0}, base.n_assets(), grids));
    const auto lp = build_lp(sys, testing::random_cost(rng, sys, Direction::Minimize), MartingaleMode::Exact);
    const auto sol = solve(lp);
    REQUIRE(sol.termination == Termination::Optimal);
    CHECK(sol.presolve_cols_removed > 0);
    CHECK(cross_check(lp, sol, 1e-6).relative_error <= 1e-6);
  }
}

TEST_CASE("presolve keeps columns whose increment is only rounding noise") {
  // mu's lowest atom sits one ulp below nu's: the martingale row of that
  // cell is one-signed in exact arithmetic, but only the identity coupling
  // is feasible within tolerance.
  const std::vector<double> nu_s{0.9213, 1.17578, 1.28281, 1.41662};
  const std::vector<double> w{0.36, 0.363, 0.07, 0.207};
  std::vector<double> mu_s = nu_s;
  mu_s[0] = std::nextafter(mu_s[0], 0.0);
  std::vector<MarginalGrid> g{MarginalGrid(mu_s, w, {0, 0}), MarginalGrid(nu_s, w, {1, 0})};
  const auto s = validate_system(MarginalSystem({1.0, 2.0}, 1, std::move(g)));
  REQUIRE(s.feasible());
  const auto lp = build_lp(s, testing::abs_increment_cost(s, Direction::Maximize), MartingaleMode::Exact);
  const Presolve pre(lp);
  CHECK(simplex_solve(densify(pre.reduced())).status == SimplexStatus::Optimal);
  const auto sol = solve(lp);
  REQUIRE(sol.termination == Termination::Optimal);
  CHECK(std::abs(sol.report.primal_objective) <= 1e-7);
  for (std::size_t i = 0; i < 4; ++i) CHECK(sol.x[i * 4 + i] == doctest::Approx(w[i]).epsilon(1e-7));
}
