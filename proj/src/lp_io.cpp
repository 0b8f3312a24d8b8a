#include <cstdio>
#include <fstream>
#include <string>

#include "mot/error.hpp"
#include "mot/lp.hpp"

namespace mot {

namespace {

char sense_code(Sense s) {
  switch (s) {
    case Sense::Equal: return 'E';
    case Sense::LessEqual: return 'L';
    case Sense::GreaterEqual: return 'G';
  }
  return '?';
}

Sense parse_sense(const std::string& s) {
  if (s == "E") return Sense::Equal;
  if (s == "L") return Sense::LessEqual;
  if (s == "G") return Sense::GreaterEqual;
  throw Error(Errc::Io, "bad row sense '" + s + "'");
}

const char* kind_name(RowKind k) {
  switch (k) {
    case RowKind::Marginal: return "marginal";
    case RowKind::MartingaleEq: return "martingale_eq";
    case RowKind::MartingaleUb: return "martingale_ub";
    case RowKind::MartingaleLb: return "martingale_lb";
    case RowKind::Other: return "other";
  }
  return "other";
}

RowKind parse_kind(const std::string& s) {
  for (auto k : {RowKind::Marginal, RowKind::MartingaleEq, RowKind::MartingaleUb,
                 RowKind::MartingaleLb, RowKind::Other}) {
    if (s == kind_name(k)) return k;
  }
  throw Error(Errc::Io, "bad row kind '" + s + "'");
}

void expect(std::istream& in, const std::string& token) {
  std::string got;
  if (!(in >> got) || got != token) {
    throw Error(Errc::Io, "expected '" + token + "', got '" + got + "'");
  }
}

}  // namespace

void write_lp_triplets(const std::filesystem::path& path, const LinearProgram& lp) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(Errc::Io, "cannot write " + path.string());
  const auto& A = lp.matrix;
  std::fprintf(f, "LP %zu %zu %zu\n", A.rows, lp.n_vars, A.nnz());
  std::fprintf(f, "DIRECTION %s\n",
               lp.direction == Direction::Maximize ? "max" : "min");
  std::fprintf(f, "MODE %s %zu\n",
               lp.mode == MartingaleMode::Relaxed ? "relaxed" : "exact", lp.n_assets);
  std::fprintf(f, "DIMS %zu", lp.col_meta.rank());
  for (auto n : lp.col_meta.dims()) std::fprintf(f, " %zu", n);
  std::fprintf(f, "\nDELTAS %zu", lp.deltas.size());
  for (double v : lp.deltas) std::fprintf(f, " %.17g", v);
  std::fprintf(f, "\nROWS\n");
  for (std::size_t r = 0; r < A.rows; ++r) {
    const RowMeta meta = lp.row_meta.empty() ? RowMeta{} : lp.row_meta[r];
    std::fprintf(f, "%zu %c %.17g %s %u %u %zu\n", r, sense_code(lp.senses[r]),
                 lp.rhs[r], kind_name(meta.kind), meta.t, meta.k, meta.index);
  }
  std::fprintf(f, "COLS\n");
  for (std::size_t j = 0; j < lp.n_vars; ++j) {
    std::fprintf(f, "%zu %.17g\n", j, lp.objective[j]);
  }
  std::fprintf(f, "ENTRIES\n");
  for (std::size_t r = 0; r < A.rows; ++r) {
    for (std::size_t p = A.offsets[r]; p < A.offsets[r + 1]; ++p) {
      std::fprintf(f, "%zu %u %.17g\n", r, A.indices[p], A.values[p]);
    }
  }
  if (std::fclose(f) != 0) throw Error(Errc::Io, "error writing " + path.string());
}

LinearProgram read_lp_triplets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingArtifact, path.string());
  LinearProgram lp;
  std::size_t rows = 0, cols = 0, nnz = 0;
  expect(in, "LP");
  in >> rows >> cols >> nnz;
  std::string word;
  expect(in, "DIRECTION");
  in >> word;
  lp.direction = word == "max" ? Direction::Maximize : Direction::Minimize;
  expect(in, "MODE");
  in >> word >> lp.n_assets;
  lp.mode = word == "relaxed" ? MartingaleMode::Relaxed : MartingaleMode::Exact;
  expect(in, "DIMS");
  std::size_t rank = 0;
  in >> rank;
  std::vector<std::size_t> dims(rank);
  for (auto& n : dims) in >> n;
  if (rank > 0) lp.col_meta = IndexMap(dims);
  expect(in, "DELTAS");
  std::size_t nd = 0;
  in >> nd;
  lp.deltas.resize(nd);
  for (auto& v : lp.deltas) in >> v;

  expect(in, "ROWS");
  lp.senses.resize(rows);
  lp.rhs.resize(rows);
  lp.row_meta.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t idx = 0;
    std::string sense, kind;
    in >> idx >> sense >> lp.rhs[r] >> kind >> lp.row_meta[r].t >>
        lp.row_meta[r].k >> lp.row_meta[r].index;
    if (!in || idx != r) throw Error(Errc::Io, "malformed ROWS section");
    lp.senses[r] = parse_sense(sense);
    lp.row_meta[r].kind = parse_kind(kind);
  }
  expect(in, "COLS");
  lp.n_vars = cols;
  lp.objective.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    std::size_t idx = 0;
    in >> idx >> lp.objective[j];
    if (!in || idx != j) throw Error(Errc::Io, "malformed COLS section");
  }
  expect(in, "ENTRIES");
  auto& A = lp.matrix;
  A.rows = rows;
  A.cols = cols;
  A.offsets.assign(rows + 1, 0);
  A.indices.reserve(nnz);
  A.values.reserve(nnz);
  std::size_t prev_row = 0;
  for (std::size_t p = 0; p < nnz; ++p) {
    std::size_t r = 0;
    std::uint32_t c = 0;
    double v = 0.0;
    in >> r >> c >> v;
    if (!in || r >= rows || r < prev_row) throw Error(Errc::Io, "malformed ENTRIES");
    prev_row = r;
    ++A.offsets[r + 1];
    A.indices.push_back(c);
    A.values.push_back(v);
  }
  for (std::size_t r = 0; r < rows; ++r) A.offsets[r + 1] += A.offsets[r];
  lp.validate();
  return lp;
}

}  // namespace mot
