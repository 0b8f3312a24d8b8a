#include <algorithm>
#include <cmath>

#include "mot/pdhg.hpp"

namespace mot {

namespace {

// Scales A in place by diag(r) A diag(c) and folds the factors into the
// accumulated scales.
void apply_scaling(CsrMatrix& a, const std::vector<double>& r, const std::vector<double>& c,
                   std::vector<double>& row_scale, std::vector<double>& col_scale) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) {
      a.values[p] *= r[i] * c[a.indices[p]];
    }
    row_scale[i] *= r[i];
  }
  for (std::size_t j = 0; j < a.cols; ++j) col_scale[j] *= c[j];
}

double inverse_sqrt_or_one(double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 1.0; }

}  // namespace

Preconditioned precondition(const LinearProgram& lp, std::size_t ruiz_iters,
                            bool pock_chambolle) {
  Preconditioned out{lp, std::vector<double>(lp.n_rows(), 1.0),
                     std::vector<double>(lp.n_vars, 1.0)};
  CsrMatrix& a = out.lp.matrix;
  std::vector<double> r(a.rows), c(a.cols);

  for (std::size_t sweep = 0; sweep < ruiz_iters; ++sweep) {
    std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
      double m = 0.0;
      for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) {
        const double v = std::abs(a.values[p]);
        m = std::max(m, v);
        c[a.indices[p]] = std::max(c[a.indices[p]], v);
      }
      r[i] = inverse_sqrt_or_one(m);
    }
    for (auto& v : c) v = inverse_sqrt_or_one(v);
    apply_scaling(a, r, c, out.row_scale, out.col_scale);
  }

  if (pock_chambolle) {
    std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
      double s = 0.0;
      for (std::size_t p = a.offsets[i]; p < a.offsets[i + 1]; ++p) {
        const double v = std::abs(a.values[p]);
        s += v;
        c[a.indices[p]] += v;
      }
      r[i] = inverse_sqrt_or_one(s);
    }
    for (auto& v : c) v = inverse_sqrt_or_one(v);
    apply_scaling(a, r, c, out.row_scale, out.col_scale);
  }

  for (std::size_t j = 0; j < lp.n_vars; ++j) out.lp.objective[j] *= out.col_scale[j];
  for (std::size_t i = 0; i < lp.n_rows(); ++i) out.lp.rhs[i] *= out.row_scale[i];
  return out;
}

}  // namespace mot
