#pragma once

// End-to-end orchestration behind the motbounds tool: config parsing,
// marginal loading, both LP directions, artifacts and verification.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mot/certificates.hpp"
#include "mot/lp.hpp"
#include "mot/marginals.hpp"
#include "mot/payoff.hpp"
#include "mot/pdhg.hpp"

namespace mot {

struct MarginalFile {
  std::size_t t = 0;
  std::size_t asset = 0;
  std::filesystem::path file;
  bool call_prices = false;  // file holds strike,price quotes
  bool clip_negatives = false;
};

struct VerifyConfig {
  bool exhaustive = true;
  std::size_t sample_count = 1'000'000;
  std::uint64_t seed = 0;
  double mass_floor = 1e-8;
  double tolerance = 1e-6;
};

enum class PayoffKind { WorstOfAutocall, Table };

struct RunConfig {
  std::optional<SyntheticSpec> synthetic;
  std::vector<MarginalFile> marginal_files;
  std::vector<double> times;  // defaults to the payoff observation times

  PayoffKind payoff = PayoffKind::WorstOfAutocall;
  AutocallSpec autocall;
  std::filesystem::path payoff_table;  // flat-order `value` column

  MartingaleMode mode = MartingaleMode::Exact;
  DeltaPolicy deltas;
  SolverConfig solver;
  std::filesystem::path outdir = "out";
  VerifyConfig verify;
};

/// Relative paths inside the config resolve against `base_dir`.
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

/// Builds and validates the marginal system; failures are only recorded.
MarginalSystem validated_marginals(const RunConfig& config);
/// Same, but throws Errc::InfeasibleMarginals when some consecutive pair is
/// not in convex order.
MarginalSystem load_marginals(const RunConfig& config);
CostTensor load_cost(const RunConfig& config, const MarginalSystem& system,
                     Direction direction);

void print_validation(std::ostream& out, const MarginalSystem& system);

struct DirectionOutcome {
  LinearProgram lp;
  Solution solution;
  DualCertificate certificate;
  PathCheck subhedge;
  SupportCheck support;
  bool converged = false;
  bool verified = false;
};

struct BoundsResult {
  double lower = 0.0;
  double upper = 0.0;
  DirectionOutcome min;
  DirectionOutcome max;

  bool converged() const { return min.converged && max.converged; }
  bool verified() const { return min.verified && max.verified; }
};

/// Solves both directions and writes every artifact under config.outdir.
BoundsResult run_bounds(const RunConfig& config, std::ostream* log = nullptr);

// Stages used by the subcommands. Each reads what the previous stage wrote
// and throws Errc::MissingArtifact naming the expected path.
std::filesystem::path direction_dir(const RunConfig& config, Direction direction);
void stage_build(const RunConfig& config);
/// Returns true when both directions converged.
bool stage_solve(const RunConfig& config, std::ostream* log = nullptr);
/// Returns true when both certificates pass; prints worst paths to `out`.
bool stage_verify(const RunConfig& config, std::ostream& out);

void write_vector_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<double>& values);
std::vector<double> read_vector_csv(const std::filesystem::path& path,
                                    const std::string& header);

}  // namespace mot
