#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mot/index_map.hpp"
#include "mot/marginals.hpp"
#include "mot/payoff.hpp"
#include "mot/sparse.hpp"

namespace mot {

enum class Sense : std::uint8_t { Equal, LessEqual, GreaterEqual };

enum class RowKind : std::uint8_t {
  Marginal,      // index = grid point
  MartingaleEq,  // index = history cell
  MartingaleUb,
  MartingaleLb,
  Other,
};

struct RowMeta {
  RowKind kind = RowKind::Other;
  std::uint32_t t = 0;
  std::uint32_t k = 0;
  std::size_t index = 0;
};

enum class MartingaleMode { Exact, Relaxed };

/// min c^T x  s.t.  A x (sense) b,  x >= 0.
///
/// For Direction::Maximize the stored objective is the negated cost, so the
/// problem is always solved as a minimisation; `objective_sign()` maps LP
/// objective values back to the user's direction.
struct LinearProgram {
  std::size_t n_vars = 0;
  std::vector<double> objective;
  CsrMatrix matrix;
  std::vector<Sense> senses;
  std::vector<double> rhs;
  std::vector<RowMeta> row_meta;
  IndexMap col_meta;
  Direction direction = Direction::Minimize;
  MartingaleMode mode = MartingaleMode::Exact;
  /// Relaxation half-widths are deltas[t * d + k] / 2; empty in exact mode.
  std::vector<double> deltas;
  std::size_t n_assets = 0;

  std::size_t n_rows() const { return matrix.rows; }
  double objective_sign() const {
    return direction == Direction::Maximize ? -1.0 : 1.0;
  }
  /// Structural checks; throws Errc::DimensionMismatch.
  void validate() const;
};

/// Per-(t,k) relaxation widths. Unset entries default to the largest
/// adjacent spacing of the destination grid mu_{t+1,k}.
struct DeltaPolicy {
  std::map<std::pair<std::size_t, std::size_t>, double> overrides;

  double delta(const MarginalSystem& s, std::size_t t, std::size_t k) const;
};

/// Assembles the discrete multimarginal MOT LP.
///
/// Rows: all marginal rows (t-major, asset-minor, grid index fastest), then
/// martingale rows (t-major, asset, history cell in flatten order). A history
/// cell fixes every coordinate up to time t, so its columns are one
/// contiguous block of the flattened plan. Relaxed mode emits an (Ub, Lb)
/// pair per cell, consecutively.
LinearProgram build_lp(const MarginalSystem& system, const CostTensor& cost,
                       MartingaleMode mode, const DeltaPolicy& deltas = {});

/// Number of history cells of the martingale family at time t.
std::size_t history_cells(const IndexMap& map, std::size_t n_assets, std::size_t t);

// Plain-text triplet format:
//   LP <rows> <cols> <nnz>
//   DIRECTION min|max
//   MODE exact|relaxed <n_assets>
//   DIMS <rank> n_1 ... n_rank
//   DELTAS <count> v_1 ... v_count
//   ROWS
//   <row> E|L|G <rhs> <kind> <t> <k> <index>
//   COLS
//   <col> <objective>
//   ENTRIES
//   <row> <col> <value>
void write_lp_triplets(const std::filesystem::path& path, const LinearProgram& lp);
LinearProgram read_lp_triplets(const std::filesystem::path& path);

}  // namespace mot
