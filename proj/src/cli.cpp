#include "swarmsf/cli.hpp"

#include "swarmsf/benchmark.hpp"
#include "swarmsf/io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace swarmsf::cli {

namespace {

constexpr int kDefaultDegree = 10;
constexpr int kDefaultCount = 50;
constexpr std::uint64_t kDefaultSeed = 1;
constexpr double kDefaultSpread = 0.03;

struct SolverFlags {
  double rho{1.0};
  int max_iters{200};
  double tol{1e-3};
  bool no_early_stop{false};
  unsigned threads{1};
  CLI::Option* rho_opt{nullptr};
  CLI::Option* iters_opt{nullptr};
  CLI::Option* tol_opt{nullptr};
};

void add_solver_flags(CLI::App& cmd, SolverFlags& f) {
  f.rho_opt = cmd.add_option("--rho", f.rho, "Penalty weight rho (> 0)")->capture_default_str();
  f.iters_opt = cmd.add_option("--max-iters", f.max_iters, "Maximum fixed-point iterations (>= 1)")->capture_default_str();
  f.tol_opt = cmd.add_option("--tol", f.tol, "Convergence threshold on ||r_p||_inf")->capture_default_str();
  cmd.add_flag("--no-early-stop", f.no_early_stop, "Always run exactly --max-iters iterations");
  cmd.add_option("--threads", f.threads, "Worker threads for the batch (results are order-stable)")
      ->capture_default_str()
      ->check(CLI::Range(1u, 1024u));
}

// Flag > problem-file field > built-in default.
template <typename T, typename U>
T pick(const CLI::Option* flag, T flag_value, const std::optional<U>& file_value, T fallback) {
  if (flag && flag->count() > 0) return flag_value;
  if (file_value) return T(*file_value);
  return fallback;
}

struct Setup {
  io::ProblemFile file;
  SolverConfig<double> config;
  int degree{kDefaultDegree};
  std::optional<SafetyFilter<double>> filter;
};

Setup prepare(const std::string& problem_path, const SolverFlags& f, std::ostream& err) {
  Setup s;
  s.file = io::load_problem(problem_path);
  s.degree = s.file.degree.value_or(kDefaultDegree);
  s.config.rho = pick(f.rho_opt, f.rho, s.file.rho, 1.0);
  s.config.max_iters = pick(f.iters_opt, f.max_iters, s.file.max_iters, 200);
  s.config.tol_residual = pick(f.tol_opt, f.tol, s.file.tol, 1e-3);
  s.config.early_stop = !f.no_early_stop;
  s.config.validate();
  validate_problem(s.file.problem);
  auto basis = build_basis<double>(s.degree, s.file.problem.samples(), s.file.problem.duration);
  s.filter.emplace(s.file.problem, std::move(basis), s.config);
  err << "[swarmsf] problem: n=" << s.file.problem.robots << " H=" << s.file.problem.horizon << " m=" << s.degree
      << " rho=" << s.config.rho << " max_iters=" << s.config.max_iters << " tol=" << s.config.tol_residual << "\n";
  return s;
}

io::RunMetadata metadata(const Setup& s, const std::string& command, std::uint64_t seed) {
  io::RunMetadata m;
  m.command = command;
  m.seed = seed;
  m.rho = s.config.rho;
  m.tol_residual = s.config.tol_residual;
  m.tol_eq = s.config.tol_eq;
  m.max_iters = s.config.max_iters;
  m.early_stop = s.config.early_stop;
  m.degree = s.degree;
  m.horizon = s.file.problem.horizon;
  m.robots = s.file.problem.robots;
  return m;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Shared tail of generate and filter: solve, summarise and write artifacts.
int solve_and_write(const Setup& s, const ProposalBatch<double>& batch,
                    const std::vector<std::optional<WarmStart<double>>>& inits, unsigned threads,
                    const std::filesystem::path& out_dir, const io::RunMetadata& meta, std::ostream& err) {
  const auto& filter = *s.filter;
  const auto& problem = filter.problem();
  std::filesystem::create_directories(out_dir);

  err << "[swarmsf] filtering " << batch.size() << " proposals on " << threads << " thread(s)\n";
  const auto result = filter.batch_solve(batch.proposals, inits, threads);
  std::vector<bool> feasible;
  const auto report = summarize_batch(result, problem, filter.basis(), kDefaultFeasibilityTol, &feasible);
  err << "[swarmsf] converged " << report.converged << ", feasible " << report.feasible << " of " << report.batch_size
      << " in " << result.seconds << " s\n";

  const std::string header = io::csv_header(meta);
  std::vector<std::pair<std::size_t, Trajectory<double>>> feasible_trajs;
  auto violations = open_out(out_dir / "violations.csv");
  violations << header << io::violation_csv_columns();
  nlohmann::json results = nlohmann::json::array();
  std::vector<WarmStart<double>> solutions;
  std::vector<double> displacements;
  long total_iterations = 0;
  for (std::size_t i = 0; i < result.items.size(); ++i) {
    const auto& item = result.items[i];
    if (!item.ok()) {
      results.push_back({{"proposal_id", i}, {"error", item.error}});
      solutions.push_back({batch.proposals[i], Vector<double>::Zero(filter.layout().size())});
      continue;
    }
    const auto& r = *item.result;
    total_iterations += r.iterations_run;
    displacements.push_back(r.displacement);
    auto traj = coeffs_to_trajectory(r.xi_final, filter.basis(), problem.robots);
    const auto rep = check_original_constraints(traj, problem);
    violations << io::violation_csv_row(i, r.converged, rep);
    auto entry = io::solve_result_to_json(r, false);
    entry["proposal_id"] = i;
    entry["feasible"] = bool(feasible[i]);
    entry["violation"] = io::violation_to_json(rep, problem.robots);
    results.push_back(std::move(entry));
    solutions.push_back({r.xi_final, r.lambda_final});
    if (feasible[i]) feasible_trajs.emplace_back(i, std::move(traj));
  }

  {
    auto out = open_out(out_dir / "trajectories.csv");
    out << header;
    io::write_trajectories_csv(out, feasible_trajs);
  }
  {
    auto out = open_out(out_dir / "residuals.csv");
    out << header;
    io::write_residuals_csv(out, result);
  }
  nlohmann::json disp = nlohmann::json::object();
  if (!displacements.empty()) {
    double sum = 0;
    for (double d : displacements) sum += d;
    disp = {{"mean", sum / double(displacements.size())},
            {"min", *std::min_element(displacements.begin(), displacements.end())},
            {"max", *std::max_element(displacements.begin(), displacements.end())}};
  }
  nlohmann::json doc = {{"meta", io::to_json(meta)},
                        {"problem", io::problem_to_json(problem)},
                        {"proposals", {{"count", batch.size()}, {"provenance", to_string(batch.provenance)}}},
                        {"report", io::batch_report_to_json(report)},
                        {"displacement", disp},
                        {"total_iterations", total_iterations}};
  io::write_json(out_dir / "report.json", doc);
  io::write_json(out_dir / "results.json", {{"meta", io::to_json(meta)}, {"results", results}});
  io::save_warmstart(solutions, out_dir / "solutions.json", filter.layout(), problem.horizon);

  if (report.feasible == 0) {
    err << "[swarmsf] no feasible solution\n";
    return kNoFeasible;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diverse, feasible swarm trajectories via a batched safety filter", "swarmsf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kVersion));
  app.footer(
      "Exit codes: 0 success, 1 runtime/I-O error, 2 invalid problem, schema, grid or config, "
      "3 no feasible solution.\nSolver settings: flag > problem-file field (rho, max_iters, tol, m, seed, spread, "
      "count) > built-in default.");

  std::string problem_path;
  std::string out_dir = "out";

  auto* gen = app.add_subcommand("generate", "Sample proposals and filter them into feasible trajectories");
  SolverFlags gen_flags;
  int count = kDefaultCount;
  std::uint64_t seed = kDefaultSeed;
  double spread = kDefaultSpread;
  gen->add_option("problem", problem_path, "Problem JSON file")->required();
  auto* count_opt = gen->add_option("--count", count, "Number of sampled proposals")->capture_default_str();
  auto* seed_opt = gen->add_option("--seed", seed, "Sampler seed")->capture_default_str();
  auto* spread_opt = gen->add_option("--spread", spread, "Perturbation scale relative to the workspace")
                         ->capture_default_str();
  add_solver_flags(*gen, gen_flags);
  gen->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  auto* fil = app.add_subcommand("filter", "Filter externally produced proposals");
  SolverFlags fil_flags;
  std::string proposals_path, warmstart_path;
  fil->add_option("problem", problem_path, "Problem JSON file")->required();
  fil->add_option("--proposals", proposals_path, "Proposal JSON file")->required();
  fil->add_option("--warmstart", warmstart_path, "Warm-start JSON file (one entry per proposal)");
  add_solver_flags(*fil, fil_flags);
  fil->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  auto* bench = app.add_subcommand("bench", "Feasibility, diversity, runtime and residual sweeps");
  std::vector<std::string> grid_items;
  std::string bench_warmstart;
  unsigned bench_threads = 1;
  bench->add_option("problem", problem_path, "Problem JSON file")->required();
  bench->add_option("--grid", grid_items,
                    "Sweep items key=value, ';'-separated or repeated: batch=1,10,50 iters=50:400:50 "
                    "init=zero,projected,warmstart timing_batch=10 residual_batch=10 repeats=3 seed=1 spread=0.03");
  bench->add_option("--warmstart", bench_warmstart, "Warm-start file for init=warmstart");
  bench->add_option("--threads", bench_threads, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));
  bench->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (gen->parsed()) {
      Setup s = prepare(problem_path, gen_flags, err);
      const int n = pick(count_opt, count, s.file.count, kDefaultCount);
      const std::uint64_t sd = pick(seed_opt, seed, s.file.seed, kDefaultSeed);
      const double sp = pick(spread_opt, spread, s.file.spread, kDefaultSpread);
      if (n < 0) throw Error(ErrorCode::InvalidConfig, "--count must be >= 0");
      if (n == 0) {
        err << "[swarmsf] --count 0: no proposals to filter, so no feasible solution can be produced\n";
        return kNoFeasible;
      }
      const auto batch = sample_proposals(*s.filter, std::size_t(n), sd, sp);
      std::filesystem::create_directories(out_dir);
      io::save_proposals(batch, std::filesystem::path(out_dir) / "proposals.json", s.filter->layout(),
                         s.file.problem.horizon);
      return solve_and_write(s, batch, {}, gen_flags.threads, out_dir, metadata(s, "generate", sd), err);
    }
    if (fil->parsed()) {
      Setup s = prepare(problem_path, fil_flags, err);
      const auto batch = io::load_proposals(proposals_path, *s.filter);
      std::size_t projected = 0;
      for (bool p : batch.projected) projected += p;
      if (projected) err << "[swarmsf] boundary-projected " << projected << " loaded proposal(s)\n";
      std::vector<std::optional<WarmStart<double>>> inits;
      if (!warmstart_path.empty()) {
        const auto starts = io::load_warmstart(warmstart_path, s.filter->layout(), s.file.problem.horizon);
        if (starts.size() != batch.size()) {
          throw Error(ErrorCode::DimensionMismatch, "warm-start file has " + std::to_string(starts.size()) +
                                                        " entries for " + std::to_string(batch.size()) +
                                                        " proposals");
        }
        inits.assign(starts.begin(), starts.end());
      }
      return solve_and_write(s, batch, inits, fil_flags.threads, out_dir, metadata(s, "filter", batch.seed), err);
    }
    if (bench->parsed()) {
      const BenchGrid grid = parse_grid(grid_items);
      SolverFlags defaults;
      Setup s = prepare(problem_path, defaults, err);
      std::vector<WarmStart<double>> starts;
      if (!bench_warmstart.empty()) {
        starts = io::load_warmstart(bench_warmstart, s.filter->layout(), s.file.problem.horizon);
      }
      const auto tables = run_benchmark(*s.filter, grid, bench_threads, &starts, &err);
      write_bench_tables(tables, out_dir, metadata(s, "bench", grid.seed));
      err << "[swarmsf] wrote fig5a/fig5b/fig6/fig7 tables to " << out_dir << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    err << "[swarmsf] error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "[swarmsf] runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}

}  // namespace swarmsf::cli
