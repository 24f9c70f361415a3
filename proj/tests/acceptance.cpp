// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Tolerances are fixed below.

#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

using namespace swarmsf;
using testing::random_vector;

namespace {

constexpr double kBlockCostTol = 1e-6;
constexpr double kBlockSuiteSeconds = 60.0;
constexpr int kBlockStates = 100;

constexpr int kQpInstances = 50;
constexpr double kQpEqRel = 1e-8;
constexpr double kQpOracleTol = 1e-9;

constexpr int kReformInstances = 50;
constexpr double kReformResidual = 1e-6;
constexpr double kReformViolation = 1e-4;

constexpr int kDemoCount = 50;
constexpr int kDemoIters = 200;
constexpr double kDemoMinFraction = 0.6;
constexpr int kDemoMinDistinct = 5;
constexpr double kDemoDistinctCosine = 0.99;
constexpr double kDemoSeconds = 30.0;
constexpr std::uint64_t kDemoSeed = 7;

constexpr int kWarmTrials = 25;
constexpr double kWarmMinShare = 0.8;

constexpr double kTimingMinR2 = 0.95;
constexpr int kTimingBatch = 10;
constexpr int kTimingRepeats = 3;

constexpr double kDeterminismTol = 1e-12;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

SafetyFilter<double> make_filter(const SwarmProblem<double>& p, SolverConfig<double> cfg = {}, int degree = 10) {
  return SafetyFilter<double>(p, build_basis<double>(degree, p.samples(), p.duration), cfg);
}

// 1. Closed-form spherical step against exhaustive search on unit-scaled shapes.
Outcome block_optimality() {
  const auto t0 = Clock::now();
  // Only the operator and the shapes matter here; no boundary conditions.
  SwarmProblem<double> unit;
  unit.robots = 4;
  unit.horizon = 20;
  unit.duration = 5.0;
  unit.shape = {1.0, 1.0};
  unit.workspace = {{0.0, 0.0, 1.0}, 1.0, 1.0};
  const auto basis = build_basis<double>(8, unit.samples(), unit.duration);
  const auto op = build_F(unit, basis);
  std::mt19937_64 rng(2024);
  const double inf = std::numeric_limits<double>::infinity();
  double worst_gap = -inf;
  int checked = 0;
  const Index per_axis = op.rows_per_axis();
  const Index pr = op.pair_rows(), wr = op.workspace_rows();
  std::uniform_int_distribution<Index> pick_pair(0, pr - 1), pick_ws(0, wr - 1);
  for (int s = 0; s < kBlockStates; ++s) {
    // A random solver state: coefficients around the workspace.
    const Vector<double> xi = random_vector(op.cols(), rng, 1.0);
    const Vector<double> Fxi = op.apply(xi);
    const auto vars = spherical_step_from_Fxi(Fxi, op, unit);
    const Index k = pick_pair(rng);
    const Vector3<double> r(Fxi(k), Fxi(per_axis + k), Fxi(2 * per_axis + k));
    const double cost = testing::spherical_cost(r, vars.alpha(k), vars.beta(k), vars.d(k), 1.0, 1.0);
    worst_gap = std::max(worst_gap, cost - testing::grid_search_cost(r, 1.0, 1.0, 1.0, inf));
    const Index w = pick_ws(rng);
    const Vector3<double> q =
        Vector3<double>(Fxi(pr + w), Fxi(per_axis + pr + w), Fxi(2 * per_axis + pr + w)) - unit.workspace.center;
    const double cost_w = testing::spherical_cost(q, vars.alpha_w(w), vars.beta_w(w), vars.d_w(w), 1.0, 1.0);
    worst_gap = std::max(worst_gap, cost_w - testing::grid_search_cost(q, 1.0, 1.0, 0.0, 1.0));
    checked += 2;
  }
  const double secs = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d terms, worst cost - grid cost = %.3e (tol %.0e), %.1f s (limit %.0f s)", checked,
                worst_gap, kBlockCostTol, secs, kBlockSuiteSeconds);
  return {worst_gap <= kBlockCostTol && secs <= kBlockSuiteSeconds, buf};
}

// 2. Boundary projection and xi step against dense KKT solves.
Outcome qp_correctness() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> robots(1, 4), degree(5, 9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_eq = 0, worst_oracle = 0;
  bool eq_ok = true;
  for (int inst = 0; inst < kQpInstances; ++inst) {
    auto p = testing::antipodal_problem(robots(rng), 2.0, 12 + inst % 7);
    for (auto& bc : p.boundary) {
      bc.start.v = random_vector(3, rng, 0.5);
      bc.goal.a = random_vector(3, rng, 0.5);
    }
    const auto basis = build_basis<double>(degree(rng), p.samples(), p.duration);
    const auto eq = build_equality(p, basis);
    const auto op = build_F(p, basis);
    const Index N = op.cols();
    const double eq_tol = kQpEqRel * (1 + eq.b.cwiseAbs().maxCoeff());

    const Vector<double> raw = random_vector(N, rng, 3.0);
    const Vector<double> x = project_to_boundary(raw, eq);
    const auto [x_ref, nu] = testing::dense_kkt_oracle(Matrix<double>::Identity(N, N), eq.A, raw, eq.b);
    const double res_proj = (eq.A * x - eq.b).cwiseAbs().maxCoeff();

    SolverConfig<double> cfg;
    cfg.rho = 0.1 + 3.0 * unit(rng);
    const Vector<double> lambda = random_vector(N, rng), e = random_vector(op.rows(), rng, 2.0);
    const Vector<double> xs = xi_step<double>(raw, e, lambda, eq, op, cfg);
    const Matrix<double> F = testing::dense_F_oracle(p.robots, basis.W);
    const Matrix<double> H = Matrix<double>::Identity(N, N) + cfg.rho * F.transpose() * F;
    const Vector<double> g = cfg.rho * F.transpose() * e + lambda + raw;
    const auto [xs_ref, nus] = testing::dense_kkt_oracle(H, eq.A, g, eq.b);
    const double res_step = (eq.A * xs - eq.b).cwiseAbs().maxCoeff();

    eq_ok = eq_ok && res_proj <= eq_tol && res_step <= eq_tol;
    worst_eq = std::max({worst_eq, res_proj / (1 + eq.b.cwiseAbs().maxCoeff()), res_step / (1 + eq.b.cwiseAbs().maxCoeff())});
    worst_oracle = std::max({worst_oracle, (x - x_ref).cwiseAbs().maxCoeff(), (xs - xs_ref).cwiseAbs().maxCoeff()});
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d instances, worst |A xi - b|/(1+|b|) = %.2e (tol %.0e), worst oracle gap = %.2e (tol %.0e)",
                kQpInstances, worst_eq, kQpEqRel, worst_oracle, kQpOracleTol);
  return {eq_ok && worst_oracle <= kQpOracleTol, buf};
}

// 3. Small primal residual with in-bound d implies the original constraints.
Outcome reformulation() {
  const auto p = testing::demo_problem();
  SolverConfig<double> cfg;
  cfg.tol_residual = kReformResidual;
  cfg.max_iters = 5000;
  const auto filter = make_filter(p, cfg);
  int collected = 0;
  double worst = 0;
  for (std::uint64_t seed = 300; collected < kReformInstances && seed < 310; ++seed) {
    const auto batch = sample_proposals(filter, 25, seed, 0.05);
    for (const auto& xi_bar : batch.proposals) {
      if (collected >= kReformInstances) break;
      const auto r = filter.solve(xi_bar);
      if (r.residual_inf.back() > kReformResidual) continue;
      const auto& v = r.vars_final;
      const bool in_bounds = (v.d.array() >= 1.0).all() && (v.d_w.array() >= 0.0).all() && (v.d_w.array() <= 1.0).all();
      if (!in_bounds) continue;
      const auto rep = check_original_constraints(coeffs_to_trajectory(r.xi_final, filter.basis(), p.robots), p, 0.0);
      worst = std::max(worst, rep.worst_violation());
      ++collected;
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d solved instances at r_p <= %.0e, worst margin violation %.2e (tol %.0e)", collected,
                kReformResidual, worst, kReformViolation);
  return {collected == kReformInstances && worst <= kReformViolation, buf};
}

// 4. Feasibility and diversity on the frozen demo scenario.
Outcome demo_feasibility() {
  const auto t0 = Clock::now();
  const auto p = testing::demo_problem();
  SolverConfig<double> cfg;
  cfg.max_iters = kDemoIters;
  const auto filter = make_filter(p, cfg);
  const auto batch = sample_proposals(filter, kDemoCount, kDemoSeed, testing::kDemoSpread);
  const auto out = filter.batch_solve(batch.proposals, {}, 1);
  std::vector<bool> mask;
  const auto rep = summarize_batch(out, p, filter.basis(), kDefaultFeasibilityTol, &mask);
  const double secs = seconds_since(t0);

  // Greedy count of feasible solutions whose centred flattened positions are
  // pairwise at cosine <= threshold.
  std::vector<Vector<double>> flat;
  for (std::size_t i = 0; i < out.items.size(); ++i) {
    if (mask[i]) flat.push_back(coeffs_to_trajectory(out.items[i].result->xi_final, filter.basis(), p.robots).stacked_positions());
  }
  std::vector<Vector<double>> distinct;
  if (!flat.empty()) {
    Vector<double> mean = Vector<double>::Zero(flat[0].size());
    for (const auto& f : flat) mean += f;
    mean /= double(flat.size());
    for (auto& f : flat) f -= mean;
    for (const auto& f : flat) {
      if (f.norm() == 0) continue;
      const bool fresh = std::all_of(distinct.begin(), distinct.end(), [&](const Vector<double>& d) {
        return f.dot(d) / (f.norm() * d.norm()) <= kDemoDistinctCosine;
      });
      if (fresh) distinct.push_back(f);
    }
  }
  const double frac = rep.feasible_fraction.value_or(0.0);
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "feasible fraction %.2f (min %.1f), %zu distinct feasible (min %d), mean cosine %.4f, %.2f s (limit %.0f s)",
                frac, kDemoMinFraction, distinct.size(), kDemoMinDistinct, rep.diversity.mean_cosine, secs, kDemoSeconds);
  return {frac >= kDemoMinFraction && int(distinct.size()) >= kDemoMinDistinct && secs <= kDemoSeconds, buf};
}

// 5. Warm start from a neighbouring problem's solution versus zero init.
Outcome warm_start() {
  const auto base = testing::demo_problem();
  const auto filter = make_filter(base);
  std::mt19937_64 rng(55);
  const auto proposals = sample_proposals(filter, kWarmTrials, 500, testing::kDemoSpread);
  int wins = 0;
  for (int trial = 0; trial < kWarmTrials; ++trial) {
    const auto solved = filter.solve(proposals.proposals[std::size_t(trial)]);
    // Neighbour: every start and goal nudged by Gaussian noise, 3 cm std.
    auto nb = base;
    for (auto& bc : nb.boundary) {
      bc.start.p += random_vector(3, rng, 0.03);
      bc.goal.p += random_vector(3, rng, 0.03);
    }
    const auto nfilter = make_filter(nb);
    const Vector<double> xi_bar = nfilter.projector().project(proposals.proposals[std::size_t(trial)]);
    const Index N = nfilter.layout().size();
    const auto zero = nfilter.solve(xi_bar, WarmStart<double>{Vector<double>::Zero(N), Vector<double>::Zero(N)});
    const auto warm =
        nfilter.solve(xi_bar, WarmStart<double>{nfilter.projector().project(solved.xi_final), solved.lambda_final});
    if (warm.converged && warm.iterations_run < zero.iterations_run) ++wins;
  }
  const double share = double(wins) / kWarmTrials;
  char buf[200];
  std::snprintf(buf, sizeof buf, "warm start strictly fewer iterations in %d/%d trials (%.0f%%, min %.0f%%)", wins,
                kWarmTrials, 100 * share, 100 * kWarmMinShare);
  return {share >= kWarmMinShare, buf};
}

// 6. Run time grows linearly with the iteration budget.
Outcome timing_linearity() {
  const auto p = testing::demo_problem();
  const auto filter = make_filter(p);
  const auto batch = sample_proposals(filter, kTimingBatch, 1, testing::kDemoSpread);
  std::vector<double> iters, secs;
  for (int it = 50; it <= 400; it += 50) {
    const auto f = filter.with_iterations(it, false);
    std::vector<double> reps;
    for (int r = 0; r < kTimingRepeats; ++r) {
      const auto t0 = Clock::now();
      f.batch_solve(batch.proposals, {}, 1);
      reps.push_back(seconds_since(t0));
    }
    std::nth_element(reps.begin(), reps.begin() + kTimingRepeats / 2, reps.end());
    iters.push_back(it);
    secs.push_back(reps[kTimingRepeats / 2]);
  }
  const auto fit = linear_fit(iters, secs);
  char buf[200];
  std::snprintf(buf, sizeof buf, "batch %d, iterations 50..400: R^2 = %.4f (min %.2f), slope %.3e s/iter", kTimingBatch,
                fit.r2, kTimingMinR2, fit.slope);
  return {fit.r2 >= kTimingMinR2, buf};
}

// 7. Batch results independent of the thread count.
Outcome determinism() {
  const auto p = testing::demo_problem();
  const auto filter = make_filter(p);
  const auto batch = sample_proposals(filter, 24, 99, testing::kDemoSpread);
  std::vector<SolveResult<double>> seq;
  for (const auto& xi : batch.proposals) seq.push_back(filter.solve(xi));
  double worst = 0;
  bool complete = true;
  for (unsigned threads : {1u, 4u, max_threads()}) {
    const auto out = filter.batch_solve(batch.proposals, {}, threads);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (!out.items[i].ok() || out.items[i].result->iterations_run != seq[i].iterations_run) {
        complete = false;
        continue;
      }
      worst = std::max({worst, (out.items[i].result->xi_final - seq[i].xi_final).cwiseAbs().maxCoeff(),
                        (out.items[i].result->lambda_final - seq[i].lambda_final).cwiseAbs().maxCoeff()});
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "threads {1, 4, %u}: max elementwise difference %.2e (tol %.0e)", max_threads(), worst,
                kDeterminismTol);
  return {complete && worst <= kDeterminismTol, buf};
}

// 8. Metric analytic cases.
Outcome metric_sanity() {
  bool ok = true;
  Matrix<double> dup(3, 2);
  dup << 1, 1, 2, 2, 3, 3;
  ok = ok && mean_pairwise_cosine(dup, false).mean_cosine == 1.0;
  ok = ok && mean_pairwise_cosine(dup, true).degenerate;
  Matrix<double> orth = Matrix<double>::Zero(3, 2);
  orth(0, 0) = orth(1, 1) = 1;
  ok = ok && mean_pairwise_cosine(orth, false).mean_cosine == 0.0;
  Matrix<double> diag(2, 2);
  diag << 1, 1 / std::sqrt(2.0), 0, 1 / std::sqrt(2.0);
  ok = ok && std::abs(mean_pairwise_cosine(diag, false).mean_cosine - 1 / std::sqrt(2.0)) <= 1e-15;

  const auto p = testing::demo_problem();
  const auto filter = make_filter(p);
  const auto good = filter.solve(sample_proposals(filter, 1, 3, testing::kDemoSpread).proposals[0]);
  SolveResult<double> bad;
  bad.xi_final = filter.projector().project(straight_line_coefficients(p, 10));
  bad.converged = true;
  ok = ok && good.converged;
  ok = ok && feasible_fraction(std::vector{good, good}, p, filter.basis()) == 1.0;
  ok = ok && !feasible_fraction(std::vector<SolveResult<double>>{}, p, filter.basis()).has_value();
  ok = ok && feasible_fraction(std::vector{good, good, bad, good}, p, filter.basis()) == 0.75;
  return {ok, "cosine duplicate/orthogonal/1/sqrt(2) cases, feasible fraction 1.0/undefined/0.75"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"1 block optimality", block_optimality}, {"2 QP correctness", qp_correctness},
      {"3 reformulation", reformulation},       {"4 demo feasibility/diversity", demo_feasibility},
      {"5 warm start", warm_start},             {"6 runtime linearity", timing_linearity},
      {"7 batch determinism", determinism},     {"8 metric sanity", metric_sanity},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
