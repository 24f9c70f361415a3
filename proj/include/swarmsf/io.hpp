#pragma once

#include "swarmsf/metrics.hpp"
#include "swarmsf/proposals.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace swarmsf::io {

inline constexpr const char* kToolName = "swarmsf";
inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kDiversityDefinition =
    "mean pairwise cosine similarity of mean-centred, position-only flattened trajectories";

/// Problem document plus the optional solver fields it may carry. Keys:
/// n, H, T, a, b, workspace{center, a_w, b_w}, boundary[{start{p,v,a}, goal{p,v,a}}];
/// optional m, rho, max_iters, tol, seed, spread, count.
struct ProblemFile {
  SwarmProblem<double> problem;
  std::optional<int> degree;
  std::optional<double> rho;
  std::optional<int> max_iters;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<double> spread;
  std::optional<int> count;
};

ProblemFile parse_problem(const nlohmann::json& doc);
ProblemFile load_problem(const std::filesystem::path& path);
nlohmann::json problem_to_json(const SwarmProblem<double>& problem);

/// Reproducibility header attached to every output file.
struct RunMetadata {
  std::string command;
  std::uint64_t seed{0};
  double rho{1};
  double tol_residual{1e-3};
  double tol_eq{1e-8};
  double feasibility_tol{kDefaultFeasibilityTol};
  int max_iters{200};
  bool early_stop{true};
  int degree{10};
  int horizon{49};
  int robots{1};
};

nlohmann::json to_json(const RunMetadata& meta);
/// '#'-prefixed comment lines for CSV files.
std::string csv_header(const RunMetadata& meta);

nlohmann::json trajectory_to_json(const Trajectory<double>& traj);
/// Rows: proposal_id, robot, t, x, y, z, vx, vy, vz, ax, ay, az.
void write_trajectories_csv(std::ostream& out, const std::vector<std::pair<std::size_t, Trajectory<double>>>& trajs);

nlohmann::json violation_to_json(const ViolationReport<double>& report, int robots);
std::string violation_csv_columns();
std::string violation_csv_row(std::size_t proposal_id, bool converged, const ViolationReport<double>& report);

nlohmann::json solve_result_to_json(const SolveResult<double>& result, bool include_vectors);
/// Rows: proposal_id, iter, res_inf, res_l2.
void write_residuals_csv(std::ostream& out, const BatchResult<double>& batch);

nlohmann::json batch_report_to_json(const BatchReport& report);

/// Proposal file: {"format", "dim", "count", "n", "m", "H", "provenance", "seed",
/// "data": row-major count x dim array}. `data` may also be an array of rows.
nlohmann::json proposals_to_json(const ProposalBatch<double>& batch, const CoefficientLayout& layout, int horizon);
void save_proposals(const ProposalBatch<double>& batch, const std::filesystem::path& path,
                    const CoefficientLayout& layout, int horizon);
/// Loads and checks against the filter's dimensions; entries whose boundary
/// residual exceeds tolerance are projected and flagged.
ProposalBatch<double> load_proposals(const std::filesystem::path& path, const SafetyFilter<double>& filter);
ProposalBatch<double> parse_proposals(const nlohmann::json& doc, const SafetyFilter<double>& filter);

/// Warm-start file: {"format", "dim", "count", "n", "m", "H", "xi0", "lambda0"},
/// both arrays row-major count x dim (or arrays of rows).
void save_warmstart(const std::vector<WarmStart<double>>& starts, const std::filesystem::path& path,
                    const CoefficientLayout& layout, int horizon);
std::vector<WarmStart<double>> load_warmstart(const std::filesystem::path& path, const CoefficientLayout& layout,
                                              int horizon);
std::vector<WarmStart<double>> parse_warmstart(const nlohmann::json& doc, const CoefficientLayout& layout,
                                               int horizon);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace swarmsf::io
