#include "mot/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mot/error.hpp"

namespace mot {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-10;
constexpr std::size_t kMaxPivots = 1'000'000;

void check_size(std::size_t rows, std::size_t cols) {
  if (rows != 0 && cols > kSimplexSizeLimit / rows) {
    throw Error(Errc::SizeGuard, "dense simplex refuses " + std::to_string(rows) + " x " +
                                     std::to_string(cols) + " instances");
  }
}

// Tableau with an explicit reduced-cost row. Column `width` holds the rhs.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t width)
      : rows_(rows), width_(width), t_(rows * (width + 1), 0.0), z_(width + 1, 0.0),
        basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t j) { return t_[r * (width_ + 1) + j]; }
  double at(std::size_t r, std::size_t j) const { return t_[r * (width_ + 1) + j]; }
  double& rhs(std::size_t r) { return at(r, width_); }
  double rhs(std::size_t r) const { return at(r, width_); }
  std::vector<std::size_t>& basis() { return basis_; }

  // z_j = cost_j - sum_r cost[basis r] * T[r][j]; z_[width] = -objective
  void price(const std::vector<double>& cost) {
    for (std::size_t j = 0; j <= width_; ++j) {
      double v = j < width_ ? cost[j] : 0.0;
      for (std::size_t r = 0; r < rows_; ++r) v -= cost[basis_[r]] * at(r, j);
      z_[j] = v;
    }
  }
  double reduced(std::size_t j) const { return z_[j]; }
  double objective() const { return -z_[width_]; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = at(pr, pc);
    for (std::size_t j = 0; j <= width_; ++j) at(pr, j) /= p;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= width_; ++j) at(r, j) -= f * at(pr, j);
      at(r, pc) = 0.0;
    }
    const double f = z_[pc];
    if (f != 0.0) {
      for (std::size_t j = 0; j <= width_; ++j) z_[j] -= f * at(pr, j);
      z_[pc] = 0.0;
    }
    basis_[pr] = pc;
  }

  enum class Outcome { Optimal, Unbounded };

  // Bland's rule: lowest-index improving column, ratio ties to the lowest
  // basic index.
  Outcome run(const std::vector<char>& may_enter, std::size_t& pivots) {
    while (true) {
      std::size_t enter = width_;
      for (std::size_t j = 0; j < width_; ++j) {
        if (may_enter[j] && z_[j] < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter == width_) return Outcome::Optimal;
      std::size_t leave = rows_;
      double best = 0.0;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double a = at(r, enter);
        if (a <= kPivotTol) continue;
        const double ratio = rhs(r) / a;
        const bool strictly_better = leave == rows_ || ratio < best - 1e-14;
        const bool tie = !strictly_better && ratio <= best + 1e-14;
        if (strictly_better) best = ratio;
        if (strictly_better || (tie && basis_[r] < basis_[leave])) leave = r;
      }
      if (leave == rows_) return Outcome::Unbounded;
      pivot(leave, enter);
      if (++pivots > kMaxPivots) {
        throw Error(Errc::CycleGuard, "simplex exceeded 10^6 pivots");
      }
    }
  }

 private:
  std::size_t rows_, width_;
  std::vector<double> t_;
  std::vector<double> z_;
  std::vector<std::size_t> basis_;
};

}  // namespace

DenseLP densify(const LinearProgram& lp) {
  check_size(lp.n_rows(), lp.n_vars);
  DenseLP d;
  d.rows = lp.n_rows();
  d.cols = lp.n_vars;
  d.a.assign(d.rows * d.cols, 0.0);
  const auto& m = lp.matrix;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t p = m.offsets[r]; p < m.offsets[r + 1]; ++p) {
      d.a[r * d.cols + m.indices[p]] += m.values[p];
    }
  }
  d.b = lp.rhs;
  d.c = lp.objective;
  d.senses = lp.senses;
  return d;
}

SimplexResult simplex_solve(const DenseLP& lp) {
  check_size(lp.rows, lp.cols);
  const std::size_t m = lp.rows;
  const std::size_t n = lp.cols;

  // rows with negative rhs are negated so the artificial basis is feasible
  std::vector<double> row_sign(m, 1.0);
  std::vector<Sense> sense(lp.senses);
  for (std::size_t i = 0; i < m; ++i) {
    if (lp.b[i] < 0.0) {
      row_sign[i] = -1.0;
      if (sense[i] == Sense::LessEqual) {
        sense[i] = Sense::GreaterEqual;
      } else if (sense[i] == Sense::GreaterEqual) {
        sense[i] = Sense::LessEqual;
      }
    }
  }
  std::size_t n_slack = 0;
  std::vector<std::size_t> slack_of(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    if (sense[i] != Sense::Equal) slack_of[i] = n + n_slack++;
  }
  const std::size_t art0 = n + n_slack;
  const std::size_t width = art0 + m;

  Tableau tab(m, width);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) tab.at(i, j) = row_sign[i] * lp.at(i, j);
    if (sense[i] == Sense::LessEqual) tab.at(i, slack_of[i]) = 1.0;
    if (sense[i] == Sense::GreaterEqual) tab.at(i, slack_of[i]) = -1.0;
    tab.at(i, art0 + i) = 1.0;
    tab.rhs(i) = row_sign[i] * lp.b[i];
    tab.basis()[i] = art0 + i;
  }

  SimplexResult res;
  std::vector<char> may_enter(width, 1);

  // phase 1: minimise the sum of artificials
  std::vector<double> cost1(width, 0.0);
  for (std::size_t i = 0; i < m; ++i) cost1[art0 + i] = 1.0;
  tab.price(cost1);
  tab.run(may_enter, res.pivots);
  double scale = 1.0;
  for (double v : lp.b) scale = std::max(scale, std::abs(v));
  if (tab.objective() > 1e-9 * scale) {
    res.status = SimplexStatus::Infeasible;
    return res;
  }

  // drive zero-level artificials out of the basis where possible
  for (std::size_t r = 0; r < m; ++r) {
    if (tab.basis()[r] < art0) continue;
    for (std::size_t j = 0; j < art0; ++j) {
      if (std::abs(tab.at(r, j)) > 1e-9) {
        tab.pivot(r, j);
        break;
      }
    }
  }

  // phase 2
  for (std::size_t j = art0; j < width; ++j) may_enter[j] = 0;
  std::vector<double> cost2(width, 0.0);
  std::copy(lp.c.begin(), lp.c.end(), cost2.begin());
  tab.price(cost2);
  if (tab.run(may_enter, res.pivots) == Tableau::Outcome::Unbounded) {
    res.status = SimplexStatus::Unbounded;
    return res;
  }

  res.status = SimplexStatus::Optimal;
  res.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (tab.basis()[r] < n) res.x[tab.basis()[r]] = tab.rhs(r);
  }
  res.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) res.value += lp.c[j] * res.x[j];
  // artificial columns carry B^{-1}; their reduced cost is -y (cost 0)
  res.y.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) res.y[i] = -row_sign[i] * tab.reduced(art0 + i);
  return res;
}

CrossCheck cross_check(const LinearProgram& lp, const Solution& pdhg, double tol) {
  const SimplexResult s = simplex_solve(densify(lp));
  CrossCheck out;
  out.status = s.status;
  out.pdhg_value = pdhg.report.primal_objective;
  if (s.status != SimplexStatus::Optimal) return out;
  const double sign = lp.objective_sign();
  out.oracle_value = sign * s.value;
  const double denom = out.oracle_value != 0.0 ? std::abs(out.oracle_value) : 1.0;
  out.relative_error = std::abs(out.pdhg_value - out.oracle_value) / denom;
  out.within_tolerance = out.relative_error <= tol;

  std::vector<double> diff(lp.n_vars, 0.0);
  const auto& a = lp.matrix;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double dy = s.y[r] - pdhg.y[r];
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      diff[a.indices[p]] += a.values[p] * dy;
    }
  }
  for (double v : diff) out.portfolio_max_diff = std::max(out.portfolio_max_diff, std::abs(v));
  return out;
}

}  // namespace mot
