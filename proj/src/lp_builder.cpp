#include <algorithm>
#include <string>

#include "mot/error.hpp"
#include "mot/lp.hpp"

namespace mot {

void LinearProgram::validate() const {
  matrix.validate();
  if (matrix.cols != n_vars || objective.size() != n_vars) {
    throw Error(Errc::DimensionMismatch, "objective/matrix column count mismatch");
  }
  if (senses.size() != matrix.rows || rhs.size() != matrix.rows) {
    throw Error(Errc::DimensionMismatch, "senses/rhs row count mismatch");
  }
  if (!row_meta.empty() && row_meta.size() != matrix.rows) {
    throw Error(Errc::DimensionMismatch, "row metadata count mismatch");
  }
}

double DeltaPolicy::delta(const MarginalSystem& s, std::size_t t,
                          std::size_t k) const {
  if (auto it = overrides.find({t, k}); it != overrides.end()) return it->second;
  return s.grid(t + 1, k).max_spacing();
}

std::size_t history_cells(const IndexMap& map, std::size_t n_assets, std::size_t t) {
  return map.prefix_size((t + 1) * n_assets);
}

LinearProgram build_lp(const MarginalSystem& system, const CostTensor& cost,
                       MartingaleMode mode, const DeltaPolicy& deltas) {
  const IndexMap map(system.dims());
  const std::size_t n = map.size();
  if (cost.values.size() != n) {
    throw Error(Errc::DimensionMismatch,
                "cost has " + std::to_string(cost.values.size()) +
                    " entries, grid product is " + std::to_string(n));
  }
  if (n > std::size_t{0xffffffffu}) {
    throw Error(Errc::DimensionMismatch, "too many columns for 32-bit indices");
  }
  const auto cost_dims = cost.index_map.dims();
  if (cost_dims.size() != map.rank() ||
      !std::equal(cost_dims.begin(), cost_dims.end(), map.dims().begin())) {
    throw Error(Errc::DimensionMismatch, "cost tensor dims differ from system");
  }

  const std::size_t N = system.n_times();
  const std::size_t d = system.n_assets();
  const auto dims = map.dims();
  const auto strides = map.strides();

  LinearProgram lp;
  lp.n_vars = n;
  lp.direction = cost.direction;
  lp.mode = mode;
  lp.n_assets = d;
  lp.col_meta = map;
  lp.objective = cost.values;
  if (cost.direction == Direction::Maximize) {
    for (auto& c : lp.objective) c = -c;
  }

  auto& A = lp.matrix;
  A.cols = n;
  auto finish_row = [&](Sense sense, double rhs, RowMeta meta) {
    A.offsets.push_back(A.values.size());
    lp.senses.push_back(sense);
    lp.rhs.push_back(rhs);
    lp.row_meta.push_back(meta);
  };

  std::size_t marginal_nnz = n * N * d;
  std::size_t martingale_nnz = (N - 1) * d * n * (mode == MartingaleMode::Exact ? 1 : 2);
  A.values.reserve(marginal_nnz + martingale_nnz);
  A.indices.reserve(marginal_nnz + martingale_nnz);

  // marginal rows: coordinate r fixed to i
  for (std::size_t r = 0; r < map.rank(); ++r) {
    const std::size_t stride = strides[r];
    const std::size_t block = dims[r] * stride;
    const auto& grid = system.grids()[r];
    for (std::size_t i = 0; i < dims[r]; ++i) {
      for (std::size_t outer = 0; outer < n; outer += block) {
        const std::size_t first = outer + i * stride;
        for (std::size_t j = first; j < first + stride; ++j) {
          A.indices.push_back(static_cast<std::uint32_t>(j));
          A.values.push_back(1.0);
        }
      }
      finish_row(Sense::Equal, grid.weights()[i],
                 {RowKind::Marginal, static_cast<std::uint32_t>(r / d),
                  static_cast<std::uint32_t>(r % d), i});
    }
  }

  if (mode == MartingaleMode::Relaxed) lp.deltas.assign(N * d, 0.0);

  for (std::size_t t = 0; t + 1 < N; ++t) {
    const std::size_t cells = history_cells(map, d, t);
    const std::size_t width = n / cells;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t r_now = t * d + k;
      const std::size_t r_next = (t + 1) * d + k;
      const auto s_now = system.grid(t, k).support();
      const auto s_next = system.grid(t + 1, k).support();
      const double half = mode == MartingaleMode::Relaxed
                              ? 0.5 * deltas.delta(system, t, k)
                              : 0.0;
      if (mode == MartingaleMode::Relaxed) lp.deltas[r_now] = 2.0 * half;
      const std::uint32_t tt = static_cast<std::uint32_t>(t);
      const std::uint32_t kk = static_cast<std::uint32_t>(k);
      for (std::size_t h = 0; h < cells; ++h) {
        const std::size_t begin = h * width;
        // every column in the cell shares the time-t coordinate
        const double x_now = s_now[(begin / strides[r_now]) % dims[r_now]];
        auto emit = [&](double shift) {
          for (std::size_t j = begin; j < begin + width; ++j) {
            const double x_next = s_next[(j / strides[r_next]) % dims[r_next]];
            A.indices.push_back(static_cast<std::uint32_t>(j));
            A.values.push_back(x_next - x_now + shift);
          }
        };
        if (mode == MartingaleMode::Exact) {
          emit(0.0);
          finish_row(Sense::Equal, 0.0, {RowKind::MartingaleEq, tt, kk, h});
        } else {
          emit(-half);
          finish_row(Sense::LessEqual, 0.0, {RowKind::MartingaleUb, tt, kk, h});
          emit(half);
          finish_row(Sense::GreaterEqual, 0.0, {RowKind::MartingaleLb, tt, kk, h});
        }
      }
    }
  }
  A.rows = lp.senses.size();
  return lp;
}

}  // namespace mot
