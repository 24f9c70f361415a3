#include "swarmsf/benchmark.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace swarmsf {

const char* to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::Zero: return "zero";
    case InitStrategy::Projected: return "projected";
    case InitStrategy::WarmStartFile: return "warmstart";
  }
  return "unknown";
}

namespace {

[[noreturn]] void grid_error(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, "grid: " + msg); }

long parse_long(const std::string& text, const std::string& item) {
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size()) grid_error("bad integer '" + text + "' in '" + item + "'");
    return v;
  } catch (const std::logic_error&) {
    grid_error("bad integer '" + text + "' in '" + item + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// "a,b,c" or "lo:hi:step" (inclusive), all values >= 1.
std::vector<int> parse_int_list(const std::string& value, const std::string& item) {
  std::vector<int> out;
  if (value.find(':') != std::string::npos) {
    const auto parts = split(value, ':');
    if (parts.size() != 3) grid_error("range must be lo:hi:step in '" + item + "'");
    const long lo = parse_long(parts[0], item), hi = parse_long(parts[1], item), step = parse_long(parts[2], item);
    if (step <= 0 || lo > hi) grid_error("empty or ill-formed range in '" + item + "'");
    for (long v = lo; v <= hi; v += step) out.push_back(int(v));
  } else {
    for (const auto& tok : split(value, ',')) out.push_back(int(parse_long(tok, item)));
  }
  if (out.empty()) grid_error("no values in '" + item + "'");
  for (int v : out) {
    if (v < 1) grid_error("values must be >= 1 in '" + item + "'");
  }
  return out;
}

int parse_positive(const std::string& value, const std::string& item) {
  const long v = parse_long(value, item);
  if (v < 1) grid_error("value must be >= 1 in '" + item + "'");
  return int(v);
}

template <typename F>
double median_seconds(int repeats, F&& run) {
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) t.push_back(run());
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

void write_gnuplot(const std::filesystem::path& path, const std::string& csv, const std::string& title,
                   const std::string& xlabel, const std::string& ylabel, const std::string& plot) {
  std::ofstream out(path);
  out << "# gnuplot -p " << path.filename().string() << "\n"
      << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set title '" << title << "'\n"
      << "set xlabel '" << xlabel << "'\n"
      << "set ylabel '" << ylabel << "'\n"
      << "set grid\n"
      << "csv = '" << csv << "'\n"
      << plot << '\n';
}

}  // namespace

BenchGrid parse_grid(const std::vector<std::string>& items, BenchGrid grid) {
  for (const auto& raw : items) {
    for (const auto& item : split(raw, ';')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) grid_error("expected key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      const std::string value = item.substr(eq + 1);
      if (key == "batch") {
        grid.batch_sizes = parse_int_list(value, item);
      } else if (key == "iters") {
        grid.iteration_counts = parse_int_list(value, item);
      } else if (key == "init") {
        grid.strategies.clear();
        for (const auto& tok : split(value, ',')) {
          if (tok == "zero") grid.strategies.push_back(InitStrategy::Zero);
          else if (tok == "projected") grid.strategies.push_back(InitStrategy::Projected);
          else if (tok == "warmstart") grid.strategies.push_back(InitStrategy::WarmStartFile);
          else grid_error("unknown init strategy '" + tok + "'");
        }
        if (grid.strategies.empty()) grid_error("no init strategies in '" + item + "'");
      } else if (key == "timing_batch") {
        grid.timing_batch = parse_positive(value, item);
      } else if (key == "residual_batch") {
        grid.residual_batch = parse_positive(value, item);
      } else if (key == "repeats") {
        grid.repeats = parse_positive(value, item);
      } else if (key == "seed") {
        const long v = parse_long(value, item);
        if (v < 0) grid_error("seed must be >= 0");
        grid.seed = std::uint64_t(v);
      } else if (key == "spread") {
        try {
          std::size_t used = 0;
          grid.spread = std::stod(value, &used);
          if (used != value.size() || !(grid.spread >= 0)) grid_error("bad spread in '" + item + "'");
        } catch (const std::logic_error&) {
          grid_error("bad spread in '" + item + "'");
        }
      } else {
        grid_error("unknown key '" + key + "'");
      }
    }
  }
  return grid;
}

BenchTables run_benchmark(const SafetyFilter<double>& filter, const BenchGrid& grid, unsigned threads,
                          const std::vector<WarmStart<double>>* warmstarts, std::ostream* progress) {
  const auto& problem = filter.problem();
  const auto& basis = filter.basis();
  const double tol = kDefaultFeasibilityTol;
  BenchTables tables;

  // Feasibility and diversity against batch size.
  for (int batch : grid.batch_sizes) {
    const auto proposals = sample_proposals(filter, std::size_t(batch), grid.seed, grid.spread);
    const auto res = filter.batch_solve(proposals.proposals, {}, threads);
    const auto rep = summarize_batch(res, problem, basis, tol);
    tables.fig5a.push_back({problem.robots, batch, rep.feasible_fraction.value_or(0.0)});
    tables.fig5b.push_back({problem.robots, batch, rep.diversity.mean_cosine, rep.diversity.degenerate});
    if (progress) {
      *progress << "[bench] batch " << batch << ": feasible " << rep.feasible << "/" << batch << "\n";
    }
  }

  // Runtime against batch size at the configured iteration budget.
  const int budget = filter.config().max_iters;
  const auto fixed = filter.with_iterations(budget, false);
  for (int batch : grid.batch_sizes) {
    const auto proposals = sample_proposals(filter, std::size_t(batch), grid.seed, grid.spread);
    const double secs =
        median_seconds(grid.repeats, [&] { return fixed.batch_solve(proposals.proposals, {}, threads).seconds; });
    tables.fig6.push_back({"batch", batch, budget, secs, secs / batch});
    if (progress) *progress << "[bench] timing batch " << batch << ": " << secs << " s\n";
  }

  // Runtime against iteration count at a fixed batch.
  const auto timing_set = sample_proposals(filter, std::size_t(grid.timing_batch), grid.seed, grid.spread);
  for (int iters : grid.iteration_counts) {
    const auto run = filter.with_iterations(iters, false);
    const double secs =
        median_seconds(grid.repeats, [&] { return run.batch_solve(timing_set.proposals, {}, threads).seconds; });
    tables.fig6.push_back({"iters", grid.timing_batch, iters, secs, secs / grid.timing_batch});
    if (progress) *progress << "[bench] timing iters " << iters << ": " << secs << " s\n";
  }

  // Residual curves per initialisation strategy.
  const auto residual_set = sample_proposals(filter, std::size_t(grid.residual_batch), grid.seed, grid.spread);
  const auto curve_filter = filter.with_iterations(budget, false);
  const Index dim = filter.layout().size();
  for (auto strategy : grid.strategies) {
    std::vector<std::optional<WarmStart<double>>> inits(residual_set.size());
    if (strategy == InitStrategy::Zero) {
      for (auto& i : inits) i = WarmStart<double>{Vector<double>::Zero(dim), Vector<double>::Zero(dim)};
    } else if (strategy == InitStrategy::WarmStartFile) {
      if (!warmstarts || warmstarts->empty()) {
        throw Error(ErrorCode::InvalidConfig, "grid: init=warmstart requires a warm-start file");
      }
      for (std::size_t k = 0; k < inits.size(); ++k) inits[k] = (*warmstarts)[k % warmstarts->size()];
    }
    const auto res = curve_filter.batch_solve(residual_set.proposals, inits, threads);
    std::vector<double> sum(std::size_t(budget), 0.0);
    std::size_t used = 0;
    for (const auto& item : res.items) {
      if (!item.ok()) continue;
      ++used;
      for (std::size_t k = 0; k < item.result->residual_inf.size(); ++k) sum[k] += item.result->residual_inf[k];
    }
    for (int k = 0; k < budget; ++k) {
      tables.fig7.push_back({to_string(strategy), k + 1,
                             used ? sum[std::size_t(k)] / double(used) : std::numeric_limits<double>::quiet_NaN()});
    }
  }
  return tables;
}

void write_bench_tables(const BenchTables& t, const std::filesystem::path& dir, const io::RunMetadata& meta) {
  std::filesystem::create_directories(dir);
  const std::string header = io::csv_header(meta);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << header << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
  };
  {
    auto out = open("fig5a.csv");
    out << "n,batch,feasible_fraction\n";
    for (const auto& r : t.fig5a) out << r.robots << ',' << r.batch << ',' << r.feasible_fraction << '\n';
  }
  {
    auto out = open("fig5b.csv");
    out << "n,batch,mean_pairwise_cosine,degenerate\n";
    for (const auto& r : t.fig5b) {
      out << r.robots << ',' << r.batch << ',';
      if (!r.degenerate) out << r.mean_pairwise_cosine;
      out << ',' << (r.degenerate ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open("fig6.csv");
    out << "batch,iters,seconds,seconds_per_proposal,sweep\n";
    for (const auto& r : t.fig6) {
      out << r.batch << ',' << r.iters << ',' << r.seconds << ',' << r.seconds_per_proposal << ',' << r.sweep << '\n';
    }
  }
  {
    auto out = open("fig7.csv");
    out << "strategy,iter,res_inf\n";
    for (const auto& r : t.fig7) out << r.strategy << ',' << r.iter << ',' << r.res_inf << '\n';
  }
  write_gnuplot(dir / "fig5a.gp", "fig5a.csv", "Feasible fraction vs batch size", "batch", "feasible fraction",
                "plot csv using 2:3 with linespoints title 'feasible fraction'");
  write_gnuplot(dir / "fig5b.gp", "fig5b.csv", "Mean pairwise cosine vs batch size", "batch", "mean cosine",
                "plot csv using 2:3 with linespoints title 'mean pairwise cosine'");
  write_gnuplot(dir / "fig6.gp", "fig6.csv", "Runtime", "batch / iterations", "seconds",
                "set multiplot layout 1,2\n"
                "plot csv using (strcol(5) eq 'batch' ? $1 : 1/0):3 with linespoints title 'vs batch'\n"
                "plot csv using (strcol(5) eq 'iters' ? $2 : 1/0):3 with linespoints title 'vs iterations'\n"
                "unset multiplot");
  write_gnuplot(dir / "fig7.gp", "fig7.csv", "Primal residual by initialisation", "iteration", "||r_p||_inf",
                "set logscale y\n"
                "plot for [s in 'zero projected warmstart'] csv using ((strcol(1) eq s) ? $2 : 1/0):3 "
                "with lines title s");
}

}  // namespace swarmsf
