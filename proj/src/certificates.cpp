#include "mot/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "json.hpp"
#include "mot/error.hpp"
#include "mot/kernels.hpp"

namespace mot {

using nlohmann::json;

NormTriple NormTriple::of(std::span<const double> v) {
  NormTriple n;
  double sq = 0.0;
  for (double x : v) {
    const double a = std::abs(x);
    n.l1 += a;
    sq += a * a;
    n.linf = std::max(n.linf, a);
  }
  n.l2 = std::sqrt(sq);
  return n;
}

SolveReport report_from_products(const LinearProgram& lp, std::span<const double> x,
                                 std::span<const double> y,
                                 std::span<const double> ax,
                                 std::span<const double> aty, bool keep_vectors) {
  const std::size_t m = lp.n_rows();
  const std::size_t n = lp.n_vars;
  SolveReport rep;
  const double sign = lp.objective_sign();
  const double cx = kernels::serial::dot(lp.objective, x);
  const double by = kernels::serial::dot(lp.rhs, y);
  rep.primal_objective = sign * cx;
  rep.dual_objective = sign * by;
  rep.duality_gap = rep.primal_objective - rep.dual_objective;

  std::vector<double> dp(m), dd(n);
  for (std::size_t r = 0; r < m; ++r) {
    const double v = ax[r] - lp.rhs[r];
    switch (lp.senses[r]) {
      case Sense::Equal: dp[r] = std::abs(v); break;
      case Sense::LessEqual: dp[r] = std::max(v, 0.0); break;
      case Sense::GreaterEqual: dp[r] = std::max(-v, 0.0); break;
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    dd[j] = std::max(-(lp.objective[j] - aty[j]), 0.0);
  }
  rep.primal_norms = NormTriple::of(dp);
  rep.dual_norms = NormTriple::of(dd);
  if (keep_vectors) {
    rep.primal_infeasibility = std::move(dp);
    rep.dual_infeasibility = std::move(dd);
  }
  return rep;
}

SolveReport compute_report(std::span<const double> x, std::span<const double> y,
                           const LinearProgram& lp) {
  if (x.size() != lp.n_vars || y.size() != lp.n_rows()) {
    throw Error(Errc::ShapeMismatch, "compute_report: x/y sizes do not match LP");
  }
  std::vector<double> ax(lp.n_rows()), aty(lp.n_vars);
  kernels::serial::spmv(lp.matrix, x, ax);
  const CsrMatrix at = transpose(lp.matrix);
  kernels::serial::spmv(at, y, aty);
  return report_from_products(lp, x, y, ax, aty, true);
}

double kkt_error(const SolveReport& report, double rhs_norm_inf,
                 double objective_norm_inf) {
  const double p = report.primal_norms.l2 / (1.0 + rhs_norm_inf);
  const double d = report.dual_norms.l2 / (1.0 + objective_norm_inf);
  const double g = std::abs(report.duality_gap) /
                   (1.0 + std::abs(report.primal_objective) +
                    std::abs(report.dual_objective));
  return std::max({p, d, g});
}

double kkt_error(const SolveReport& report, const LinearProgram& lp) {
  return kkt_error(report, kernels::serial::norm_inf(lp.rhs),
                   kernels::serial::norm_inf(lp.objective));
}

bool meets_tolerance(const SolveReport& report, const LinearProgram& lp,
                     double eps_abs, double eps_rel) {
  const double b_inf = kernels::serial::norm_inf(lp.rhs);
  const double c_inf = kernels::serial::norm_inf(lp.objective);
  return report.primal_norms.l2 <= eps_abs + eps_rel * (1.0 + b_inf) &&
         report.dual_norms.l2 <= eps_abs + eps_rel * (1.0 + c_inf) &&
         std::abs(report.duality_gap) <=
             eps_abs + eps_rel * (std::abs(report.primal_objective) +
                                  std::abs(report.dual_objective));
}

namespace {

json norms_json(const NormTriple& n) {
  return json{{"l1", n.l1}, {"l2", n.l2}, {"linf", n.linf}};
}

const char* kind_label(RowKind k) {
  switch (k) {
    case RowKind::Marginal: return "marginal";
    case RowKind::MartingaleEq: return "martingale_eq";
    case RowKind::MartingaleUb: return "martingale_ub";
    case RowKind::MartingaleLb: return "martingale_lb";
    case RowKind::Other: return "other";
  }
  return "other";
}

}  // namespace

void write_report_json(const std::filesystem::path& path, const SolveReport& report,
                       const std::string& termination) {
  json j = {
      {"primal_objective", report.primal_objective},
      {"dual_objective", report.dual_objective},
      {"duality_gap", report.duality_gap},
      {"primal_infeasibility", norms_json(report.primal_norms)},
      {"dual_infeasibility", norms_json(report.dual_norms)},
      {"iterations", report.iterations},
      {"wall_time_s", report.wall_time_s},
      {"termination", termination},
  };
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_infeasibility_csv(const std::filesystem::path& primal_path,
                             const std::filesystem::path& dual_path,
                             const SolveReport& report, const LinearProgram& lp) {
  std::FILE* f = std::fopen(primal_path.c_str(), "w");
  if (!f) throw Error(Errc::Io, "cannot write " + primal_path.string());
  std::fprintf(f, "row,kind,t,k,index,violation\n");
  for (std::size_t r = 0; r < report.primal_infeasibility.size(); ++r) {
    const RowMeta meta = lp.row_meta.empty() ? RowMeta{} : lp.row_meta[r];
    std::fprintf(f, "%zu,%s,%u,%u,%zu,%.17g\n", r, kind_label(meta.kind), meta.t,
                 meta.k, meta.index, report.primal_infeasibility[r]);
  }
  std::fclose(f);
  f = std::fopen(dual_path.c_str(), "w");
  if (!f) throw Error(Errc::Io, "cannot write " + dual_path.string());
  std::fprintf(f, "col,violation\n");
  for (std::size_t j = 0; j < report.dual_infeasibility.size(); ++j) {
    std::fprintf(f, "%zu,%.17g\n", j, report.dual_infeasibility[j]);
  }
  std::fclose(f);
}

double DualCertificate::static_value(const MarginalSystem& system) const {
  double v = 0.0;
  for (std::size_t r = 0; r < phi.size(); ++r) {
    const auto w = system.grids()[r].weights();
    for (std::size_t i = 0; i < phi[r].size(); ++i) v += phi[r][i] * w[i];
  }
  return v;
}

DualCertificate extract_certificate(std::span<const double> y, const LinearProgram& lp) {
  if (lp.row_meta.size() != lp.n_rows() || lp.n_assets == 0 ||
      lp.col_meta.rank() == 0) {
    throw Error(Errc::MetadataMissing, "LP carries no MOT row metadata");
  }
  if (y.size() != lp.n_rows()) {
    throw Error(Errc::ShapeMismatch, "dual vector length differs from row count");
  }
  const auto dims = lp.col_meta.dims();
  const std::size_t d = lp.n_assets;
  const std::size_t N = dims.size() / d;
  DualCertificate cert;
  cert.n_times = N;
  cert.n_assets = d;
  cert.direction = lp.direction == Direction::Maximize ? HedgeDirection::Super
                                                       : HedgeDirection::Sub;
  cert.phi.resize(N * d);
  for (std::size_t r = 0; r < N * d; ++r) cert.phi[r].assign(dims[r], 0.0);
  cert.h.resize(N > 0 ? (N - 1) * d : 0);
  for (std::size_t t = 0; t + 1 < N; ++t) {
    for (std::size_t k = 0; k < d; ++k) {
      cert.h[t * d + k].assign(history_cells(lp.col_meta, d, t), 0.0);
    }
  }
  const double sign = lp.objective_sign();
  for (std::size_t r = 0; r < lp.n_rows(); ++r) {
    const auto& m = lp.row_meta[r];
    const std::size_t slot = m.t * d + m.k;
    switch (m.kind) {
      case RowKind::Marginal: cert.phi[slot][m.index] = sign * y[r]; break;
      case RowKind::MartingaleEq:
      case RowKind::MartingaleUb:
      case RowKind::MartingaleLb: cert.h[slot][m.index] += sign * y[r]; break;
      case RowKind::Other: break;
    }
  }
  return cert;
}

std::vector<double> relaxation_slack(std::span<const double> y, const LinearProgram& lp) {
  std::vector<double> slack(lp.n_vars, 0.0);
  if (lp.mode != MartingaleMode::Relaxed) return slack;
  const auto& A = lp.matrix;
  for (std::size_t r = 0; r < lp.n_rows(); ++r) {
    const auto& m = lp.row_meta[r];
    if (m.kind != RowKind::MartingaleUb && m.kind != RowKind::MartingaleLb) continue;
    const double half = 0.5 * lp.deltas[m.t * lp.n_assets + m.k];
    const double contrib = (m.kind == RowKind::MartingaleLb ? half : -half) * y[r];
    for (std::size_t p = A.offsets[r]; p < A.offsets[r + 1]; ++p) {
      slack[A.indices[p]] += contrib;
    }
  }
  return slack;
}

double portfolio_value(const DualCertificate& cert, std::span<const std::size_t> idx,
                       const MarginalSystem& system) {
  const std::size_t N = cert.n_times;
  const std::size_t d = cert.n_assets;
  if (idx.size() != N * d || system.n_times() != N || system.n_assets() != d) {
    throw Error(Errc::ShapeMismatch, "certificate and path shapes differ");
  }
  const auto grids = system.grids();
  double v = 0.0;
  std::size_t cell = 0;
  for (std::size_t t = 0; t < N; ++t) {
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t r = t * d + k;
      v += cert.phi[r][idx[r]];
      cell = cell * grids[r].size() + idx[r];
    }
    if (t + 1 < N) {
      for (std::size_t k = 0; k < d; ++k) {
        const std::size_t r = t * d + k;
        const double step = grids[r + d].support()[idx[r + d]] - grids[r].support()[idx[r]];
        v += cert.h[r][cell] * step;
      }
    }
  }
  return v;
}

namespace {

void check_shapes(const DualCertificate& cert, const CostTensor& cost,
                  const MarginalSystem& system) {
  if (cost.values.size() != cost.index_map.size() ||
      cost.index_map.rank() != system.n_times() * system.n_assets() ||
      cert.phi.size() != cost.index_map.rank()) {
    throw Error(Errc::ShapeMismatch, "certificate, cost and system disagree");
  }
}

double hedge_sign(const DualCertificate& cert) {
  return cert.direction == HedgeDirection::Sub ? 1.0 : -1.0;
}

}  // namespace

PathCheck verify_subhedge(const DualCertificate& cert, const CostTensor& cost,
                          const MarginalSystem& system, const SubhedgeOptions& options) {
  check_shapes(cert, cost, system);
  const double s = hedge_sign(cert);
  const auto& map = cost.index_map;
  PathCheck out;
  out.worst_path.resize(map.rank());
  if (map.size() <= options.exhaustive_limit) {
    const auto best = kernels::omp::max_over_paths(
        map, [&](std::span<const std::size_t> idx, std::size_t flat) {
          return s * (portfolio_value(cert, idx, system) - cost.values[flat]);
        });
    out.max_violation = best.value;
    out.worst_flat = best.flat;
    out.paths_checked = map.size();
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, map.size() - 1);
    std::vector<std::size_t> idx(map.rank());
    out.max_violation = -INFINITY;
    out.exhaustive = false;
    for (std::size_t n = 0; n < options.sample_count; ++n) {
      const std::size_t flat = pick(rng);
      map.unflatten(flat, idx);
      const double v = s * (portfolio_value(cert, idx, system) - cost.values[flat]);
      if (v > out.max_violation) {
        out.max_violation = v;
        out.worst_flat = flat;
      }
    }
    out.paths_checked = options.sample_count;
  }
  map.unflatten(out.worst_flat, out.worst_path);
  return out;
}

PathCheck verify_subhedge_serial(const DualCertificate& cert, const CostTensor& cost,
                                 const MarginalSystem& system) {
  check_shapes(cert, cost, system);
  const double s = hedge_sign(cert);
  const auto& map = cost.index_map;
  const auto best = kernels::serial::max_over_paths(
      map, [&](std::span<const std::size_t> idx, std::size_t flat) {
        return s * (portfolio_value(cert, idx, system) - cost.values[flat]);
      });
  PathCheck out;
  out.max_violation = best.value;
  out.worst_flat = best.flat;
  out.paths_checked = map.size();
  out.worst_path.resize(map.rank());
  map.unflatten(best.flat, out.worst_path);
  return out;
}

SupportCheck verify_support_equality(std::span<const double> plan,
                                     const DualCertificate& cert,
                                     const CostTensor& cost,
                                     const MarginalSystem& system, double mass_floor) {
  check_shapes(cert, cost, system);
  if (plan.size() != cost.values.size()) {
    throw Error(Errc::ShapeMismatch, "plan length differs from cost tensor");
  }
  const auto& map = cost.index_map;
  SupportCheck out;
  double weighted = 0.0;
  std::vector<std::size_t> idx(map.rank(), 0);
  for (std::size_t flat = 0; flat < map.size(); ++flat, map.next(idx)) {
    if (plan[flat] < mass_floor) continue;
    const double gap = std::abs(cost.values[flat] - portfolio_value(cert, idx, system));
    out.max_gap = std::max(out.max_gap, gap);
    weighted += plan[flat] * gap;
    out.support_mass += plan[flat];
    ++out.support_size;
  }
  if (out.support_mass > 0.0) out.mass_weighted_gap = weighted / out.support_mass;
  return out;
}

void write_certificate_json(const std::filesystem::path& path,
                            const DualCertificate& cert) {
  json j = {
      {"direction", cert.direction == HedgeDirection::Sub ? "sub" : "super"},
      {"n_times", cert.n_times},
      {"n_assets", cert.n_assets},
      {"phi", cert.phi},
      {"h", cert.h},
  };
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << j.dump() << '\n';
}

DualCertificate read_certificate_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingArtifact, path.string());
  DualCertificate cert;
  try {
    const json j = json::parse(in);
    cert.direction = j.at("direction").get<std::string>() == "super"
                         ? HedgeDirection::Super
                         : HedgeDirection::Sub;
    cert.n_times = j.at("n_times").get<std::size_t>();
    cert.n_assets = j.at("n_assets").get<std::size_t>();
    cert.phi = j.at("phi").get<std::vector<std::vector<double>>>();
    cert.h = j.at("h").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw Error(Errc::Io, path.string() + ": " + e.what());
  }
  if (cert.phi.size() != cert.n_times * cert.n_assets) {
    throw Error(Errc::ShapeMismatch, path.string() + ": phi has wrong shape");
  }
  return cert;
}

}  // namespace mot
