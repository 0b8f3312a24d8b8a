#include <algorithm>
#include <cmath>
#include <limits>

#include "mot/pdhg.hpp"

namespace mot {

namespace {

// Entries below this fraction of the row's largest magnitude count as zero
// when reading sign patterns. Increments between grids that agree up to
// rounding land here; fixing their columns would make the reduced LP
// infeasible although the original is feasible within tolerance.
constexpr double kRelativeZero = 1e-12;

double row_zero(const CsrMatrix& a, std::size_t r) {
  double m = 0.0;
  for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
    m = std::max(m, std::abs(a.values[p]));
  }
  return kRelativeZero * m;
}

// Sign pattern of a row over active columns: +1 all positive, -1 all
// negative, 0 mixed, 2 no active entries.
int active_sign(const CsrMatrix& a, std::size_t r, const std::vector<char>& col_active,
                double zero) {
  int sign = 2;
  for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
    if (!col_active[a.indices[p]] || std::abs(a.values[p]) <= zero) continue;
    const int s = a.values[p] > 0.0 ? 1 : -1;
    if (sign == 2) {
      sign = s;
    } else if (sign != s) {
      return 0;
    }
  }
  return sign;
}

bool empty_row_feasible(Sense sense, double rhs) {
  switch (sense) {
    case Sense::Equal: return rhs == 0.0;
    case Sense::LessEqual: return rhs >= 0.0;
    case Sense::GreaterEqual: return rhs <= 0.0;
  }
  return false;
}

bool forces_zero(Sense sense, double rhs, int sign) {
  if (rhs != 0.0 || (sign != 1 && sign != -1)) return false;
  switch (sense) {
    case Sense::Equal: return true;
    case Sense::LessEqual: return sign == 1;
    case Sense::GreaterEqual: return sign == -1;
  }
  return false;
}

}  // namespace

Presolve::Presolve(const LinearProgram& lp) : original_(&lp) {
  const CsrMatrix& a = lp.matrix;
  std::vector<char> row_active(a.rows, 1), col_active(lp.n_vars, 1);
  col_fixed_by_.assign(lp.n_vars, kNotFixed);

  std::vector<double> zero(a.rows);
  for (std::size_t r = 0; r < a.rows; ++r) zero[r] = row_zero(a, r);

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t r = 0; r < a.rows; ++r) {
      if (!row_active[r]) continue;
      const int sign = active_sign(a, r, col_active, zero[r]);
      if (sign == 2 && empty_row_feasible(lp.senses[r], lp.rhs[r])) {
        row_active[r] = 0;
        removals_.push_back({r, false});
        changed = true;
      } else if (forces_zero(lp.senses[r], lp.rhs[r], sign)) {
        for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
          const auto j = a.indices[p];
          if (col_active[j] && std::abs(a.values[p]) > zero[r]) {
            col_active[j] = 0;
            col_fixed_by_[j] = removals_.size();
          }
        }
        row_active[r] = 0;
        removals_.push_back({r, true});
        changed = true;
      }
    }
  }

  // empty columns with c >= 0 sit at zero
  std::vector<char> has_entry(lp.n_vars, 0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    if (!row_active[r]) continue;
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      if (a.values[p] != 0.0) has_entry[a.indices[p]] = 1;
    }
  }
  for (std::size_t j = 0; j < lp.n_vars; ++j) {
    if (col_active[j] && !has_entry[j] && lp.objective[j] >= 0.0) col_active[j] = 0;
  }

  std::vector<std::size_t> new_col(lp.n_vars, std::numeric_limits<std::size_t>::max());
  for (std::size_t j = 0; j < lp.n_vars; ++j) {
    if (col_active[j]) {
      new_col[j] = kept_cols_.size();
      kept_cols_.push_back(j);
    }
  }
  for (std::size_t r = 0; r < a.rows; ++r) {
    if (row_active[r]) kept_rows_.push_back(r);
  }

  reduced_.n_vars = kept_cols_.size();
  reduced_.direction = lp.direction;
  reduced_.mode = lp.mode;
  reduced_.objective.reserve(kept_cols_.size());
  for (auto j : kept_cols_) reduced_.objective.push_back(lp.objective[j]);
  auto& m = reduced_.matrix;
  m.cols = kept_cols_.size();
  m.rows = kept_rows_.size();
  for (auto r : kept_rows_) {
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      const auto j = new_col[a.indices[p]];
      if (j == std::numeric_limits<std::size_t>::max()) continue;
      m.indices.push_back(static_cast<std::uint32_t>(j));
      m.values.push_back(a.values[p]);
    }
    m.offsets.push_back(m.values.size());
    reduced_.senses.push_back(lp.senses[r]);
    reduced_.rhs.push_back(lp.rhs[r]);
  }
}

void Presolve::postsolve(std::span<const double> x_reduced,
                         std::span<const double> y_reduced, std::vector<double>& x,
                         std::vector<double>& y) const {
  const LinearProgram& lp = *original_;
  x.assign(lp.n_vars, 0.0);
  y.assign(lp.n_rows(), 0.0);
  for (std::size_t j = 0; j < kept_cols_.size(); ++j) x[kept_cols_[j]] = x_reduced[j];
  for (std::size_t i = 0; i < kept_rows_.size(); ++i) y[kept_rows_[i]] = y_reduced[i];
  if (removals_.empty()) return;

  // reduced costs of fixed columns against the duals assigned so far
  std::vector<double> rc(lp.objective);
  const CsrMatrix& a = lp.matrix;
  auto subtract_row = [&](std::size_t r) {
    if (y[r] == 0.0) return;
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      rc[a.indices[p]] -= a.values[p] * y[r];
    }
  };
  for (auto r : kept_rows_) subtract_row(r);

  for (auto it = removals_.rbegin(); it != removals_.rend(); ++it) {
    if (!it->fixing) continue;  // empty rows keep y = 0
    const std::size_t r = it->row;
    const std::size_t which = static_cast<std::size_t>(removals_.rend() - it) - 1;
    // Columns fixed by this row have no entries in rows removed earlier, so
    // their reduced cost is final apart from y_r.
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t p = a.offsets[r]; p < a.offsets[r + 1]; ++p) {
      const double v = a.values[p];
      if (v == 0.0 || col_fixed_by_[a.indices[p]] != which) continue;
      const double ratio = rc[a.indices[p]] / v;
      if (v > 0.0) {
        hi = std::min(hi, ratio);
      } else {
        lo = std::max(lo, ratio);
      }
    }
    double value = 0.0;
    if (std::isfinite(hi)) value = std::min(hi, 0.0);  // positive row
    if (std::isfinite(lo)) value = std::max(lo, 0.0);  // negative row
    if (lp.senses[r] == Sense::Equal) value = std::isfinite(hi) ? hi : lo;
    value = project_dual(lp.senses[r], value);
    y[r] = value;
    subtract_row(r);
  }
}

}  // namespace mot
