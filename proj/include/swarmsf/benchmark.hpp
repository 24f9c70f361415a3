#pragma once

#include "swarmsf/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace swarmsf {

enum class InitStrategy { Zero, Projected, WarmStartFile };

const char* to_string(InitStrategy s);

/// Sweep definition. Parsed from "key=value" items separated by ';' (or given
/// as several items): batch=1,10,50  iters=50:400:50  init=zero,projected,warmstart
/// timing_batch=10  residual_batch=10  repeats=3  seed=1  spread=0.03
struct BenchGrid {
  std::vector<int> batch_sizes{1, 10, 50};
  std::vector<int> iteration_counts{50, 100, 200, 400};
  std::vector<InitStrategy> strategies{InitStrategy::Zero, InitStrategy::Projected};
  int timing_batch{10};
  int residual_batch{10};
  int repeats{3};
  std::uint64_t seed{1};
  double spread{0.03};
};

/// Throws Error(InvalidConfig) naming the offending item.
BenchGrid parse_grid(const std::vector<std::string>& items, BenchGrid base = {});

struct FeasibilityRow { int robots; int batch; double feasible_fraction; };
struct DiversityRow { int robots; int batch; double mean_pairwise_cosine; bool degenerate; };
struct TimingRow { std::string sweep; int batch; int iters; double seconds; double seconds_per_proposal; };
struct ResidualRow { std::string strategy; int iter; double res_inf; };

struct BenchTables {
  std::vector<FeasibilityRow> fig5a;
  std::vector<DiversityRow> fig5b;
  std::vector<TimingRow> fig6;
  std::vector<ResidualRow> fig7;
};

/// Runs the feasibility/diversity sweep over batch sizes, the timing sweeps
/// (vs batch at the filter's iteration budget, vs iterations at timing_batch;
/// early stopping off for both) and the residual-vs-iteration curves per
/// initialisation strategy (mean res_inf over residual_batch proposals).
BenchTables run_benchmark(const SafetyFilter<double>& filter, const BenchGrid& grid, unsigned threads,
                          const std::vector<WarmStart<double>>* warmstarts = nullptr, std::ostream* progress = nullptr);

/// Writes fig5a.csv, fig5b.csv, fig6.csv, fig7.csv and a gnuplot script per table.
void write_bench_tables(const BenchTables& tables, const std::filesystem::path& dir, const io::RunMetadata& meta);

}  // namespace swarmsf
