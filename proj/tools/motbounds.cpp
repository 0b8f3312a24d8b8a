// motbounds: robust price bounds for path-dependent claims from marginal
// grids. Exit codes: 0 ok, 1 error, 2 invalid marginals, 3 solver did not
// converge, 4 certificate verification failed.

#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mot/error.hpp"
#include "mot/run.hpp"

namespace {

enum Exit { kOk = 0, kError = 1, kInvalid = 2, kNoConvergence = 3, kVerifyFailed = 4 };

struct Flags {
  std::string config;
  std::string outdir;
  std::optional<double> tol;
  std::string mode;
  bool deterministic = false;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

mot::RunConfig load(const Flags& f) {
  mot::RunConfig cfg = mot::load_run_config(f.config);
  if (!f.outdir.empty()) cfg.outdir = f.outdir;
  if (f.tol) {
    cfg.solver.eps_abs = *f.tol;
    cfg.solver.eps_rel = *f.tol;
  }
  if (f.mode == "exact") cfg.mode = mot::MartingaleMode::Exact;
  if (f.mode == "relaxed") cfg.mode = mot::MartingaleMode::Relaxed;
  if (f.deterministic) cfg.solver.deterministic_reductions = true;
  if (f.seed) cfg.verify.seed = *f.seed;
  cfg.solver.validate();
  return cfg;
}

bool is_validation_error(mot::Errc c) {
  switch (c) {
    case mot::Errc::InvalidGrid:
    case mot::Errc::NotInConvexOrder:
    case mot::Errc::NonConvexPrices:
    case mot::Errc::DegenerateGrid:
    case mot::Errc::InfeasibleMarginals:
      return true;
    default:
      return false;
  }
}

int cmd_validate(const Flags& f) {
  const mot::RunConfig cfg = load(f);
  const mot::MarginalSystem system = mot::validated_marginals(cfg);
  mot::print_validation(std::cout, system);
  std::cout << "feasible=" << (system.feasible() ? "yes" : "no")
            << " theorem_hypotheses=" << (system.theorem_hypotheses() ? "yes" : "no")
            << '\n';
  return system.feasible() ? kOk : kInvalid;
}

int cmd_build(const Flags& f) {
  mot::stage_build(load(f));
  return kOk;
}

int cmd_solve(const Flags& f) {
  const mot::RunConfig cfg = load(f);
  const bool ok = mot::stage_solve(cfg, f.quiet ? nullptr : &std::cerr);
  if (!ok) std::cerr << "solver stopped before reaching the tolerance\n";
  return ok ? kOk : kNoConvergence;
}

int cmd_verify(const Flags& f) {
  return mot::stage_verify(load(f), std::cout) ? kOk : kVerifyFailed;
}

int cmd_bounds(const Flags& f) {
  const mot::RunConfig cfg = load(f);
  const mot::BoundsResult r = mot::run_bounds(cfg, f.quiet ? nullptr : &std::cerr);
  std::cout << std::setprecision(10) << "lower=" << r.lower << " upper=" << r.upper
            << " width=" << r.upper - r.lower << '\n'
            << "min: " << mot::to_string(r.min.solution.termination)
            << " iterations=" << r.min.solution.report.iterations
            << " gap=" << r.min.solution.report.duality_gap
            << " violation=" << r.min.subhedge.max_violation << '\n'
            << "max: " << mot::to_string(r.max.solution.termination)
            << " iterations=" << r.max.solution.report.iterations
            << " gap=" << r.max.solution.report.duality_gap
            << " violation=" << r.max.subhedge.max_violation << '\n';
  if (!r.converged()) return kNoConvergence;
  return r.verified() ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-independent price bounds via martingale optimal transport"};
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "run configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--outdir", flags.outdir, "output directory (overrides config)");
    sub->add_option("--tol", flags.tol, "eps_abs = eps_rel for termination");
    sub->add_option("--mode", flags.mode, "martingale constraints")
        ->check(CLI::IsMember({"exact", "relaxed"}));
    sub->add_flag("--deterministic", flags.deterministic,
                  "fixed reduction order, reproducible bit for bit");
    sub->add_option("--seed", flags.seed, "seed for sampled verification");
    sub->add_flag("-q,--quiet", flags.quiet, "no restart log on stderr");
  };

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const Flags&);
  };
  const Entry entries[] = {
      {"validate", "check convex order and irreducibility of the marginals", cmd_validate},
      {"build", "assemble both LPs and write <outdir>/{min,max}/lp.txt", cmd_build},
      {"solve", "solve the stored LPs and write reports and certificates", cmd_solve},
      {"verify", "re-check stored certificates pathwise", cmd_verify},
      {"bounds", "validate, build, solve and verify in one run", cmd_bounds},
  };
  int (*chosen)(const Flags&) = nullptr;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub);
    sub->callback([&chosen, fn = e.fn] { chosen = fn; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return chosen(flags);
  } catch (const mot::Error& e) {
    if (e.code() == mot::Errc::MissingArtifact) {
      std::cerr << "missing artifact: " << e.what() << '\n';
      return kError;
    }
    std::cerr << "error [" << mot::to_string(e.code()) << "]: " << e.what() << '\n';
    return is_validation_error(e.code()) ? kInvalid : kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
}
