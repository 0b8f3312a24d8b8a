#include "mot/run.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "json.hpp"
#include "mot/error.hpp"

namespace mot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

SolverConfig parse_solver(const json& j) {
  SolverConfig s;
  s.eps_abs = get_or(j, "eps_abs", s.eps_abs);
  s.eps_rel = get_or(j, "eps_rel", s.eps_rel);
  s.max_kkt_passes = get_or(j, "max_kkt_passes", s.max_kkt_passes);
  s.ruiz_iters = get_or(j, "ruiz_iters", s.ruiz_iters);
  s.pock_chambolle = get_or(j, "pock_chambolle", s.pock_chambolle);
  s.presolve = get_or(j, "presolve", s.presolve);
  s.restart_sufficient_decay =
      get_or(j, "restart_sufficient_decay", s.restart_sufficient_decay);
  s.restart_necessary_decay = get_or(j, "restart_necessary_decay", s.restart_necessary_decay);
  s.restart_artificial_period =
      get_or(j, "restart_artificial_period", s.restart_artificial_period);
  s.primal_weight_smoothing = get_or(j, "primal_weight_smoothing", s.primal_weight_smoothing);
  s.check_frequency = get_or(j, "check_frequency", s.check_frequency);
  s.linf_guard = get_or(j, "linf_guard", s.linf_guard);
  s.deterministic_reductions =
      get_or(j, "deterministic_reductions", s.deterministic_reductions);
  const auto rule = get_or<std::string>(j, "initial_step_rule", "power_iteration");
  if (rule == "fixed") {
    s.initial_step_rule = InitialStep::Fixed;
    s.initial_step = get_or(j, "initial_step", s.initial_step);
  } else if (rule != "power_iteration") {
    throw Error(Errc::InvalidConfig, "unknown initial_step_rule '" + rule + "'");
  }
  return s;
}

AutocallSpec parse_autocall(const json& j) {
  AutocallSpec a;
  a.n_assets = get_or(j, "d", a.n_assets);
  a.observation_times = j.at("observation_times").get<std::vector<double>>();
  a.inception_time = get_or(j, "inception_time", a.inception_time);
  a.strike = get_or(j, "strike", a.strike);
  a.knock_in = get_or(j, "knock_in", a.knock_in);
  a.knock_out = get_or(j, "knock_out", a.knock_out);
  a.coupon_rate = get_or(j, "coupon_rate", a.coupon_rate);
  a.discount_rate = get_or(j, "discount_rate", a.discount_rate);
  const auto disc = get_or<std::string>(j, "discounting", "continuous");
  if (disc == "simple") {
    a.discounting = Discounting::Simple;
  } else if (disc != "continuous") {
    throw Error(Errc::InvalidConfig, "unknown discounting '" + disc + "'");
  }
  a.validate();
  return a;
}

void parse_marginals(const json& j, const fs::path& base, RunConfig& cfg) {
  if (j.is_object()) {
    const auto gen = get_or<std::string>(j, "generator", "lognormal");
    if (gen != "lognormal") {
      throw Error(Errc::InvalidConfig, "unknown marginal generator '" + gen + "'");
    }
    SyntheticSpec s;
    s.volatilities = j.at("vols").get<std::vector<double>>();
    s.times = get_or(j, "times", std::vector<double>{});
    s.n_points = get_or(j, "n", s.n_points);
    s.width = get_or(j, "width", s.width);
    s.spot = get_or(j, "spot", s.spot);
    const auto place = get_or<std::string>(j, "placement", "uniform");
    if (place == "quantile") {
      s.placement = GridPlacement::Quantile;
    } else if (place != "uniform") {
      throw Error(Errc::InvalidConfig, "unknown placement '" + place + "'");
    }
    cfg.synthetic = s;
    return;
  }
  if (!j.is_array()) throw Error(Errc::InvalidConfig, "marginals must be a list or object");
  for (const auto& e : j) {
    MarginalFile f;
    f.t = e.at("t").get<std::size_t>();
    f.asset = e.at("i").get<std::size_t>();
    if (e.contains("call_file")) {
      f.call_prices = true;
      f.file = resolve(base, e.at("call_file").get<std::string>());
      f.clip_negatives = get_or(e, "clip_negatives", false);
    } else {
      f.file = resolve(base, e.at("file").get<std::string>());
    }
    cfg.marginal_files.push_back(std::move(f));
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    const json j = json::parse(json_text);
    parse_marginals(j.at("marginals"), base_dir, cfg);
    cfg.times = get_or(j, "times", std::vector<double>{});

    const json& p = j.at("payoff");
    if (!p.is_object()) {
      throw Error(Errc::InvalidConfig, "payoff must be an object with its parameters");
    }
    if (p.contains("table")) {
      cfg.payoff = PayoffKind::Table;
      cfg.payoff_table = resolve(base_dir, p.at("table").get<std::string>());
    } else {
      const auto name = get_or<std::string>(p, "builtin", "worst_of_autocall");
      if (name != "worst_of_autocall") {
        throw Error(Errc::InvalidConfig, "unknown payoff builtin '" + name + "'");
      }
      cfg.autocall = parse_autocall(p);
    }

    const auto mode = get_or<std::string>(j, "mode", "exact");
    if (mode == "relaxed") {
      cfg.mode = MartingaleMode::Relaxed;
    } else if (mode != "exact") {
      throw Error(Errc::InvalidConfig, "mode must be exact or relaxed");
    }
    if (j.contains("delta")) {
      for (const auto& d : j.at("delta")) {
        const double v = d.at("value").get<double>();
        if (!(v >= 0.0)) throw Error(Errc::InvalidConfig, "delta must be >= 0");
        cfg.deltas.overrides[{d.at("t").get<std::size_t>(), d.at("k").get<std::size_t>()}] = v;
      }
    }
    if (j.contains("solver")) cfg.solver = parse_solver(j.at("solver"));
    if (j.contains("outputs")) {
      const json& o = j.at("outputs");
      cfg.outdir = resolve(base_dir, o.is_string() ? o.get<std::string>()
                                                   : o.at("directory").get<std::string>());
    }
    if (j.contains("verify")) {
      const json& v = j.at("verify");
      if (v.contains("subhedge")) {
        const json& s = v.at("subhedge");
        if (s.is_string()) {
          if (s.get<std::string>() != "exhaustive") {
            throw Error(Errc::InvalidConfig, "subhedge must be exhaustive or sampled");
          }
        } else {
          const json& sm = s.at("sampled");
          cfg.verify.exhaustive = false;
          cfg.verify.sample_count = get_or(sm, "count", cfg.verify.sample_count);
          cfg.verify.seed = get_or(sm, "seed", cfg.verify.seed);
        }
      }
      if (v.contains("support_equality")) {
        cfg.verify.mass_floor =
            get_or(v.at("support_equality"), "mass_floor", cfg.verify.mass_floor);
      }
      cfg.verify.tolerance = get_or(v, "tolerance", cfg.verify.tolerance);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("config: ") + e.what());
  }
  cfg.solver.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingArtifact, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
}

namespace {

std::vector<double> default_times(const RunConfig& cfg, std::size_t n) {
  if (!cfg.times.empty()) return cfg.times;
  if (cfg.payoff == PayoffKind::WorstOfAutocall &&
      cfg.autocall.observation_times.size() == n) {
    return cfg.autocall.observation_times;
  }
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i + 1);
  return t;
}

}  // namespace

MarginalSystem validated_marginals(const RunConfig& cfg) {
  MarginalSystem system = [&] {
    if (cfg.synthetic) {
      SyntheticSpec s = *cfg.synthetic;
      if (s.times.empty()) s.times = default_times(cfg, cfg.autocall.observation_times.size());
      return lognormal_martingale_system(s);
    }
    std::size_t n_times = 0, d = 0;
    for (const auto& f : cfg.marginal_files) {
      n_times = std::max(n_times, f.t + 1);
      d = std::max(d, f.asset + 1);
    }
    if (n_times * d != cfg.marginal_files.size() || n_times == 0) {
      throw Error(Errc::InvalidConfig, "marginal files must cover every (t, i) exactly once");
    }
    std::vector<std::optional<MarginalGrid>> slots(n_times * d);
    for (const auto& f : cfg.marginal_files) {
      if (!fs::exists(f.file)) throw Error(Errc::MissingArtifact, f.file.string());
      const GridLabel label{f.t, f.asset};
      auto& slot = slots[f.t * d + f.asset];
      if (slot) throw Error(Errc::InvalidConfig, "duplicate marginal entry");
      if (f.call_prices) {
        const CallQuotes q = read_call_prices_csv(f.file);
        slot = breeden_litzenberger(q.strikes, q.prices, f.clip_negatives, label).grid;
      } else {
        slot = read_marginal_csv(f.file, label);
      }
    }
    std::vector<MarginalGrid> grids;
    for (auto& s : slots) grids.push_back(std::move(*s));
    return MarginalSystem(default_times(cfg, n_times), d, std::move(grids));
  }();

  if (cfg.payoff == PayoffKind::WorstOfAutocall &&
      (system.n_assets() != cfg.autocall.n_assets ||
       system.n_times() != cfg.autocall.observation_times.size())) {
    throw Error(Errc::ShapeMismatch, "marginal system shape differs from payoff (d, m)");
  }
  return validate_system(std::move(system));
}

MarginalSystem load_marginals(const RunConfig& cfg) {
  MarginalSystem system = validated_marginals(cfg);
  if (!system.feasible()) {
    std::ostringstream msg;
    msg << "marginals are not in convex order:";
    for (const auto& asset : system.validation()) {
      for (const auto& p : asset) {
        if (!p.in_convex_order) msg << " (asset " << p.asset << ", t " << p.t << ")";
      }
    }
    throw Error(Errc::InfeasibleMarginals, msg.str());
  }
  return system;
}

CostTensor load_cost(const RunConfig& cfg, const MarginalSystem& system,
                     Direction direction) {
  if (cfg.payoff == PayoffKind::Table) {
    if (!fs::exists(cfg.payoff_table)) {
      throw Error(Errc::MissingArtifact, cfg.payoff_table.string());
    }
    CostTensor c;
    c.index_map = IndexMap(system.dims());
    c.values = read_vector_csv(cfg.payoff_table, "index");
    c.direction = direction;
    if (c.values.size() != c.index_map.size()) {
      throw Error(Errc::ShapeMismatch, "payoff table has " +
                                           std::to_string(c.values.size()) +
                                           " entries, expected " +
                                           std::to_string(c.index_map.size()));
    }
    for (double v : c.values) {
      if (!std::isfinite(v)) throw Error(Errc::NonFiniteCost, "payoff table entry");
    }
    return c;
  }
  const AutocallSpec spec = cfg.autocall;
  return build_cost_tensor(
      system, [spec](std::span<const double> path) { return worst_of_autocall(path, spec); },
      direction);
}

void print_validation(std::ostream& out, const MarginalSystem& system) {
  out << "asset  t->t+1  convex_order  mean_mismatch  irreducible  I  J\n";
  for (const auto& asset : system.validation()) {
    for (const auto& p : asset) {
      auto interval = [](const Interval& iv) {
        if (iv.is_empty) return std::string("{}");
        std::ostringstream s;
        s << (iv.lo_closed ? '[' : '(') << iv.lo << ", " << iv.hi
          << (iv.hi_closed ? ']' : ')');
        return s.str();
      };
      out << std::setw(5) << p.asset << "  " << p.t << "->" << p.t + 1 << "    "
          << (p.in_convex_order ? "yes" : "no ") << "           " << std::setw(12)
          << p.mean_mismatch << "  " << (p.irreducible ? "yes" : "no ") << "  "
          << interval(p.domain_I) << "  " << interval(p.domain_J) << '\n';
    }
  }
}

void write_vector_csv(const fs::path& path, const std::string& header,
                      const std::vector<double>& values) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(Errc::Io, "cannot write " + path.string());
  std::fprintf(f, "%s,value\n", header.c_str());
  for (std::size_t i = 0; i < values.size(); ++i) std::fprintf(f, "%zu,%.17g\n", i, values[i]);
  std::fclose(f);
}

std::vector<double> read_vector_csv(const fs::path& path, const std::string& header) {
  if (!fs::exists(path)) throw Error(Errc::MissingArtifact, path.string());
  auto cols = detail::read_numeric_csv(path, {header, "value"});
  for (std::size_t i = 0; i < cols[0].size(); ++i) {
    if (cols[0][i] != static_cast<double>(i)) {
      throw Error(Errc::Io, path.string() + ": indices must run 0, 1, 2, ...");
    }
  }
  return std::move(cols[1]);
}

fs::path direction_dir(const RunConfig& cfg, Direction direction) {
  return cfg.outdir / (direction == Direction::Minimize ? "min" : "max");
}

namespace {

constexpr Direction kDirections[] = {Direction::Minimize, Direction::Maximize};

fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw Error(Errc::MissingArtifact, p.string());
  return p;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json solution_summary(const Solution& s) {
  return json{{"termination", to_string(s.termination)},
              {"iterations", s.report.iterations},
              {"restarts", s.restarts.size()},
              {"primal_objective", s.report.primal_objective},
              {"dual_objective", s.report.dual_objective},
              {"duality_gap", s.report.duality_gap}};
}

void write_solution(const fs::path& dir, const LinearProgram& lp, const Solution& sol) {
  write_report_json(dir / "report.json", sol.report, to_string(sol.termination));
  write_infeasibility_csv(dir / "primal_infeasibility.csv", dir / "dual_infeasibility.csv",
                          sol.report, lp);
  write_vector_csv(dir / "primal.csv", "col", sol.x);
  write_vector_csv(dir / "dual.csv", "row", sol.y);
  write_certificate_json(dir / "certificate.json", extract_certificate(sol.y, lp));
}

Solution solve_logged(const LinearProgram& lp, const SolverConfig& base, Direction dir,
                      std::ostream* log) {
  SolverConfig cfg = base;
  cfg.log = log;
  if (log) *log << "direction=" << (dir == Direction::Minimize ? "min" : "max") << '\n';
  return solve(lp, cfg);
}

struct Verification {
  PathCheck subhedge;
  SupportCheck support;
  double slack_allowance = 0.0;
  bool passed = false;
};

Verification verify_certificate(const RunConfig& cfg, const DualCertificate& cert,
                                const CostTensor& cost, const MarginalSystem& system,
                                std::span<const double> plan, double gap,
                                std::span<const double> slack) {
  Verification v;
  SubhedgeOptions opts;
  opts.exhaustive_limit = cfg.verify.exhaustive ? std::numeric_limits<std::size_t>::max() : 0;
  opts.sample_count = cfg.verify.sample_count;
  opts.seed = cfg.verify.seed;
  v.subhedge = verify_subhedge(cert, cost, system, opts);
  v.support = verify_support_equality(plan, cert, cost, system, cfg.verify.mass_floor);
  // relaxed duals leave a nonnegative slack between payoff and portfolio
  double weighted = 0.0, mass = 0.0;
  for (std::size_t j = 0; j < slack.size(); ++j) {
    if (plan[j] < cfg.verify.mass_floor) continue;
    weighted += plan[j] * std::abs(slack[j]);
    mass += plan[j];
  }
  if (mass > 0.0) v.slack_allowance = weighted / mass;
  v.passed = v.subhedge.max_violation <= cfg.verify.tolerance &&
             v.support.mass_weighted_gap <=
                 cfg.verify.tolerance + std::abs(gap) + v.slack_allowance;
  return v;
}

json verification_json(const Verification& v, const MarginalSystem& system) {
  std::vector<double> prices;
  for (std::size_t r = 0; r < v.subhedge.worst_path.size(); ++r) {
    prices.push_back(system.grids()[r].support()[v.subhedge.worst_path[r]]);
  }
  return json{{"passed", v.passed},
              {"subhedge",
               {{"max_violation", v.subhedge.max_violation},
                {"paths_checked", v.subhedge.paths_checked},
                {"exhaustive", v.subhedge.exhaustive},
                {"worst_path", v.subhedge.worst_path},
                {"worst_prices", prices}}},
              {"support_equality",
               {{"max_gap", v.support.max_gap},
                {"mass_weighted_gap", v.support.mass_weighted_gap},
                {"support_mass", v.support.support_mass},
                {"support_size", v.support.support_size},
                {"relaxation_allowance", v.slack_allowance}}}};
}

void print_verification(std::ostream& out, Direction dir, const Verification& v,
                        const MarginalSystem& system) {
  out << (dir == Direction::Minimize ? "min" : "max") << ": "
      << (v.passed ? "PASS" : "FAIL") << " max_violation=" << v.subhedge.max_violation
      << " support_gap=" << v.support.mass_weighted_gap << " worst_path=";
  for (std::size_t r = 0; r < v.subhedge.worst_path.size(); ++r) {
    out << (r ? "," : "") << system.grids()[r].support()[v.subhedge.worst_path[r]];
  }
  out << '\n';
}

json bounds_json(const RunConfig& cfg, const Solution& lo, const Solution& hi) {
  return json{{"lower", lo.report.primal_objective},
              {"upper", hi.report.primal_objective},
              {"width", hi.report.primal_objective - lo.report.primal_objective},
              {"mode", cfg.mode == MartingaleMode::Exact ? "exact" : "relaxed"},
              {"min", solution_summary(lo)},
              {"max", solution_summary(hi)}};
}

json validation_json(const MarginalSystem& system) {
  json pairs = json::array();
  for (const auto& asset : system.validation()) {
    for (const auto& p : asset) {
      pairs.push_back({{"asset", p.asset},
                       {"t", p.t},
                       {"in_convex_order", p.in_convex_order},
                       {"mean_mismatch", p.mean_mismatch},
                       {"irreducible", p.irreducible}});
    }
  }
  return json{{"feasible", system.feasible()},
              {"theorem_hypotheses", system.theorem_hypotheses()},
              {"pairs", pairs}};
}

}  // namespace

BoundsResult run_bounds(const RunConfig& cfg, std::ostream* log) {
  const MarginalSystem system = load_marginals(cfg);
  fs::create_directories(cfg.outdir);
  write_json(cfg.outdir / "validation.json", validation_json(system));

  BoundsResult result;
  for (Direction dir : kDirections) {
    DirectionOutcome& out = dir == Direction::Minimize ? result.min : result.max;
    const fs::path ddir = direction_dir(cfg, dir);
    fs::create_directories(ddir);
    const CostTensor cost = load_cost(cfg, system, dir);
    out.lp = build_lp(system, cost, cfg.mode, cfg.deltas);
    write_lp_triplets(ddir / "lp.txt", out.lp);
    out.solution = solve_logged(out.lp, cfg.solver, dir, log);
    out.converged = out.solution.termination == Termination::Optimal;
    write_solution(ddir, out.lp, out.solution);

    out.certificate = extract_certificate(out.solution.y, out.lp);
    const auto slack = relaxation_slack(out.solution.y, out.lp);
    const Verification v =
        verify_certificate(cfg, out.certificate, cost, system, out.solution.x,
                           out.solution.report.duality_gap, slack);
    out.subhedge = v.subhedge;
    out.support = v.support;
    out.verified = v.passed;
    write_json(ddir / "verification.json", verification_json(v, system));
  }
  result.lower = result.min.solution.report.primal_objective;
  result.upper = result.max.solution.report.primal_objective;
  write_json(cfg.outdir / "bounds.json", bounds_json(cfg, result.min.solution,
                                                     result.max.solution));
  return result;
}

void stage_build(const RunConfig& cfg) {
  const MarginalSystem system = load_marginals(cfg);
  fs::create_directories(cfg.outdir);
  write_json(cfg.outdir / "validation.json", validation_json(system));
  for (Direction dir : kDirections) {
    const fs::path ddir = direction_dir(cfg, dir);
    fs::create_directories(ddir);
    const CostTensor cost = load_cost(cfg, system, dir);
    write_lp_triplets(ddir / "lp.txt", build_lp(system, cost, cfg.mode, cfg.deltas));
  }
}

bool stage_solve(const RunConfig& cfg, std::ostream* log) {
  std::vector<Solution> sols;
  for (Direction dir : kDirections) {
    const fs::path ddir = direction_dir(cfg, dir);
    const LinearProgram lp = read_lp_triplets(require(ddir / "lp.txt"));
    sols.push_back(solve_logged(lp, cfg.solver, dir, log));
    write_solution(ddir, lp, sols.back());
  }
  write_json(cfg.outdir / "bounds.json", bounds_json(cfg, sols[0], sols[1]));
  return sols[0].termination == Termination::Optimal &&
         sols[1].termination == Termination::Optimal;
}

bool stage_verify(const RunConfig& cfg, std::ostream& out) {
  const MarginalSystem system = load_marginals(cfg);
  bool ok = true;
  for (Direction dir : kDirections) {
    const fs::path ddir = direction_dir(cfg, dir);
    const DualCertificate cert = read_certificate_json(require(ddir / "certificate.json"));
    const std::vector<double> plan = read_vector_csv(ddir / "primal.csv", "col");
    const LinearProgram lp = read_lp_triplets(require(ddir / "lp.txt"));
    const std::vector<double> y = read_vector_csv(ddir / "dual.csv", "row");
    std::ifstream rin(require(ddir / "report.json"));
    const json report = json::parse(rin);
    const CostTensor cost = load_cost(cfg, system, dir);
    if (plan.size() != cost.values.size() || y.size() != lp.n_rows()) {
      throw Error(Errc::ShapeMismatch, ddir.string() + ": stored solution does not fit");
    }
    const Verification v =
        verify_certificate(cfg, cert, cost, system, plan,
                           report.at("duality_gap").get<double>(), relaxation_slack(y, lp));
    write_json(ddir / "verification.json", verification_json(v, system));
    print_verification(out, dir, v, system);
    ok = ok && v.passed;
  }
  return ok;
}

}  // namespace mot
