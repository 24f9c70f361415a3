#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_support.hpp"

using namespace swarmsf;
using testing::random_vector;

namespace {

constexpr double kPi = std::numbers::pi;

SwarmProblem<double> swap_problem() { return testing::antipodal_problem(2); }

SafetyFilter<double> make_filter(const SwarmProblem<double>& p, int degree = 10, SolverConfig<double> cfg = {}) {
  return SafetyFilter<double>(p, build_basis<double>(degree, p.samples(), p.duration), cfg);
}

/// Straight-line proposals for robots far apart, all inside the workspace.
SwarmProblem<double> parallel_problem() {
  SwarmProblem<double> p;
  p.robots = 2;
  p.horizon = 30;
  p.duration = 3;
  p.shape = {0.6, 0.4};
  p.workspace.a_w = p.workspace.b_w = 5;
  p.boundary.resize(2);
  p.boundary[0].start.p = {-2, -1, 0};
  p.boundary[0].goal.p = {2, -1, 0};
  p.boundary[1].start.p = {-2, 1, 0};
  p.boundary[1].goal.p = {2, 1, 0};
  return p;
}

}  // namespace

TEST_CASE("spherical fit of elementary relative vectors") {
  SUBCASE("(a, 0, 0) lies on the robot spheroid") {
    const auto f = fit_spherical(0.6, 0.0, 0.0, 0.6, 0.4, 1.0, std::numeric_limits<double>::infinity());
    CHECK(f.alpha == 0.0);
    CHECK(f.beta == doctest::Approx(kPi / 2));
    CHECK(f.d == doctest::Approx(1.0));
  }
  SUBCASE("(0, 0, b_w) from the workspace center") {
    const auto f = fit_spherical(0.0, 0.0, 5.0, 5.0, 5.0, 0.0, 1.0);
    CHECK(f.alpha == 0.0);
    CHECK(f.beta == 0.0);
    CHECK(f.d == doctest::Approx(1.0));
  }
  SUBCASE("zero vector falls back to a fixed direction at the lower bound") {
    const auto f = fit_spherical(0.0, 0.0, 0.0, 0.6, 0.4, 1.0, std::numeric_limits<double>::infinity());
    CHECK(f.alpha == 0.0);
    CHECK(f.beta == doctest::Approx(kPi / 2));
    CHECK(f.d == 1.0);
  }
  SUBCASE("bounds clamp d") {
    CHECK(fit_spherical(0.1, 0.0, 0.0, 0.6, 0.4, 1.0, 1e300).d == 1.0);
    CHECK(fit_spherical(7.0, 0.0, 0.0, 5.0, 5.0, 0.0, 1.0).d == 1.0);
  }
}

TEST_CASE("spherical_step reads pair and workspace terms off F xi") {
  auto p = parallel_problem();
  p.workspace.center = {0, 0, 0};
  const auto basis = build_basis<double>(6, p.samples(), p.duration);
  const auto op = build_F(p, basis);
  Vector<double> Fxi = Vector<double>::Zero(op.rows());
  const Index per_axis = op.rows_per_axis();
  Fxi(0) = 0.6;                       // pair (0,1), t = 0: separation (a, 0, 0)
  Fxi(2 * per_axis + op.pair_rows()) = 5.0;  // robot 0, t = 0: (0, 0, b_w)
  const auto vars = spherical_step_from_Fxi(Fxi, op, p);
  CHECK(vars.alpha(0) == 0.0);
  CHECK(vars.beta(0) == doctest::Approx(kPi / 2));
  CHECK(vars.d(0) == doctest::Approx(1.0));
  CHECK(vars.alpha_w(0) == 0.0);
  CHECK(vars.beta_w(0) == 0.0);
  CHECK(vars.d_w(0) == doctest::Approx(1.0));
}

TEST_CASE("closed-form spherical step against grid search, unit-scaled shapes") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  const double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 20; ++trial) {
    const Vector3<double> r(u(rng), u(rng), u(rng));
    for (auto [lo, hi] : {std::pair{1.0, inf}, std::pair{0.0, 1.0}}) {
      const auto f = fit_spherical(r(0), r(1), r(2), 1.0, 1.0, lo, hi);
      const double cost = testing::spherical_cost(r, f.alpha, f.beta, f.d, 1.0, 1.0);
      CHECK(cost <= testing::grid_search_cost(r, 1.0, 1.0, lo, hi) + 1e-6);
    }
  }
}

TEST_CASE("anisotropic shapes: zero cost on the feasible side, exact alpha and d blocks") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const double a = 0.6, b = 0.4, inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 200; ++trial) {
    const Vector3<double> r(u(rng), u(rng), u(rng));
    const auto f = fit_spherical(r(0), r(1), r(2), a, b, 1.0, inf);
    const double cost = testing::spherical_cost(r, f.alpha, f.beta, f.d, a, b);
    if (inter_robot_margin(r, RobotShape<double>{a, b}) >= 0) CHECK(cost <= 1e-20 + 1e-14 * r.squaredNorm());
    // alpha block: no alpha on a fine grid does better.
    for (int k = 0; k < 720; ++k) {
      const double alpha = -kPi + 2 * kPi * k / 720;
      CHECK(cost <= testing::spherical_cost(r, alpha, f.beta, f.d, a, b) + 1e-12);
    }
    // d block: the clamped quadratic in d is minimised.
    for (double dd : {-1e-3, 1e-3}) {
      const double d = std::max(1.0, f.d + dd);
      CHECK(cost <= testing::spherical_cost(r, f.alpha, f.beta, d, a, b) + 1e-12);
    }
  }
}

TEST_CASE("lambda update") {
  const auto p = testing::antipodal_problem(3, 2.0, 12);
  const auto basis = build_basis<double>(6, p.samples(), p.duration);
  const auto op = build_F(p, basis);
  std::mt19937_64 rng(5);
  SolverState<double> state;
  state.xi = random_vector(op.cols(), rng);
  state.lambda = random_vector(op.cols(), rng);
  SolverConfig<double> cfg;
  cfg.rho = 0.7;

  SUBCASE("zero residual leaves lambda unchanged") {
    CHECK(lambda_update(state, op.apply(state.xi), cfg, op) == state.lambda);
  }
  SUBCASE("rho = 0 leaves lambda unchanged") {
    cfg.rho = 0.0;
    CHECK(lambda_update(state, random_vector(op.rows(), rng), cfg, op) == state.lambda);
  }
  SUBCASE("matches the dense formula") {
    const Matrix<double> F = testing::dense_F_oracle(p.robots, basis.W);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector<double> e = random_vector(op.rows(), rng);
      Vector<double> expected = state.lambda;
      const Vector<double> r = F * state.xi - e;
      for (Index c = 0; c < F.cols(); ++c) {
        double acc = 0;
        for (Index k = 0; k < F.rows(); ++k) acc += F(k, c) * r(k);
        expected(c) -= cfg.rho * acc;
      }
      CHECK((lambda_update(state, e, cfg, op) - expected).cwiseAbs().maxCoeff() <= 1e-12 * (1 + expected.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("xi step") {
  const auto p = testing::antipodal_problem(3, 2.0, 15);
  const auto basis = build_basis<double>(7, p.samples(), p.duration);
  const auto op = build_F(p, basis);
  const auto eq = build_equality(p, basis);
  const BoundaryProjector<double> proj(eq);
  std::mt19937_64 rng(6);
  const Index N = op.cols();
  SolverConfig<double> cfg;
  cfg.rho = 1.3;

  SUBCASE("rho = 0 reduces to boundary projection of xi_bar + lambda") {
    cfg.rho = 0.0;
    const Vector<double> xi_bar = random_vector(N, rng), lambda = random_vector(N, rng);
    const Vector<double> e = random_vector(op.rows(), rng);
    CHECK((xi_step(xi_bar, e, lambda, eq, op, cfg) - proj.project(xi_bar + lambda)).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("feasible xi_bar with e = F xi_bar and lambda = 0 is stationary") {
    const Vector<double> xi_bar = proj.project(random_vector(N, rng));
    const Vector<double> out = xi_step<double>(xi_bar, op.apply(xi_bar), Vector<double>::Zero(N), eq, op, cfg);
    CHECK((out - xi_bar).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("KKT residual and dense oracle") {
    const XiStepSolver<double> solver(eq, op, cfg.rho);
    const Matrix<double> F = testing::dense_F_oracle(p.robots, basis.W);
    const Matrix<double> H = Matrix<double>::Identity(N, N) + cfg.rho * F.transpose() * F;
    for (int trial = 0; trial < 10; ++trial) {
      const Vector<double> xi_bar = random_vector(N, rng, 2.0), lambda = random_vector(N, rng);
      const Vector<double> e = random_vector(op.rows(), rng);
      const Vector<double> top = solver.eta_top(xi_bar, e, lambda, op);
      CHECK((top - (cfg.rho * F.transpose() * e + lambda + xi_bar)).cwiseAbs().maxCoeff() <= 1e-11);
      const auto [xi, nu] = solver.solve_kkt(top);
      CHECK((H * xi + eq.A.transpose() * nu - top).cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(proj.residual(xi) <= proj.tolerance());
      const auto [x_ref, nu_ref] = testing::dense_kkt_oracle(H, eq.A, top, eq.b);
      CHECK((xi - x_ref).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }
  SUBCASE("negative rho is rejected") {
    CHECK_THROWS_AS(XiStepSolver<double>(eq, op, -1.0), Error);
  }
}

TEST_CASE("already-feasible proposal is a fixed point") {
  const auto p = parallel_problem();
  const auto filter = make_filter(p, 8);
  const Vector<double> xi_bar = filter.projector().project(straight_line_coefficients(p, 8));
  REQUIRE(check_original_constraints(coeffs_to_trajectory(xi_bar, filter.basis(), 2), p).feasible);
  const auto res = filter.solve(xi_bar);
  CHECK(res.converged);
  CHECK(res.iterations_run == 1);
  CHECK(res.displacement <= 1e-6);
}

// Frozen regression value from the reference run of the assembled solver.
constexpr int kSwapIterations = 102;

TEST_CASE("two-robot antipodal swap from a straight line") {
  const auto p = swap_problem();
  const auto filter = make_filter(p);
  const auto res = filter.solve(straight_line_coefficients(p, 10));
  MESSAGE("swap iterations: " << res.iterations_run << ", final residual " << res.residual_inf.back());
  CHECK(res.converged);
  CHECK(res.iterations_run <= 200);
  CHECK(res.iterations_run == kSwapIterations);
  const auto rep = check_original_constraints(coeffs_to_trajectory(res.xi_final, filter.basis(), 2), p);
  CHECK(rep.feasible);
}

TEST_CASE("iteration budget contract") {
  const auto p = swap_problem();
  SolverConfig<double> cfg;
  cfg.max_iters = 0;
  CHECK_THROWS_AS(make_filter(p, 10, cfg), Error);
  cfg.max_iters = 1;
  const auto res = make_filter(p, 10, cfg).solve(straight_line_coefficients(p, 10));
  CHECK(res.residual_inf.size() == 1);
  CHECK(res.residual_l2.size() == 1);
  CHECK(res.iterations_run == 1);
  SolverConfig<double> bad;
  bad.rho = -1;
  CHECK_THROWS_AS(make_filter(p, 10, bad), Error);
}

TEST_CASE("solver invariants along the run") {
  const auto p = testing::demo_problem();
  const auto filter = make_filter(p);
  const auto batch = sample_proposals(filter, 5, 3, testing::kDemoSpread);
  for (const auto& xi_bar : batch.proposals) {
    const auto res = filter.solve(xi_bar);
    // Boundary conditions hold on the returned iterate.
    CHECK(filter.projector().residual(res.xi_final) <= filter.projector().tolerance());
    // Reported residual is consistent with the returned state.
    const Vector<double> r = filter.op().apply(res.xi_final) - build_e(res.vars_final, p);
    CHECK(std::abs(r.cwiseAbs().maxCoeff() - res.residual_inf.back()) <= 1e-12);
    if (res.converged) {
      const auto rep = check_original_constraints(coeffs_to_trajectory(res.xi_final, filter.basis(), p.robots), p);
      CHECK(rep.worst_violation() <= 10 * filter.config().tol_residual);
    }
  }
}

TEST_CASE("warm start at a solution converges immediately") {
  const auto p = swap_problem();
  const auto filter = make_filter(p);
  const Vector<double> xi_bar = straight_line_coefficients(p, 10);
  const auto first = filter.solve(xi_bar);
  REQUIRE(first.converged);
  const auto again = filter.solve(xi_bar, WarmStart<double>{first.xi_final, first.lambda_final});
  CHECK(again.converged);
  CHECK(again.iterations_run <= 2);
}

TEST_CASE("batch solve") {
  const auto p = testing::demo_problem();
  const auto filter = make_filter(p);
  const auto batch = sample_proposals(filter, 12, 9, testing::kDemoSpread);

  SUBCASE("batch of one equals solve") {
    const auto out = filter.batch_solve({batch.proposals[0]});
    REQUIRE(out.items.size() == 1);
    REQUIRE(out.items[0].ok());
    CHECK(out.items[0].result->xi_final == filter.solve(batch.proposals[0]).xi_final);
  }
  SUBCASE("identical proposals give identical results") {
    const std::vector<Vector<double>> same(4, batch.proposals[1]);
    const auto out = filter.batch_solve(same, {}, 3);
    for (const auto& item : out.items) CHECK(item.result->xi_final == out.items[0].result->xi_final);
  }
  SUBCASE("parallel batch equals the sequential loop") {
    const auto out = filter.batch_solve(batch.proposals, {}, 4);
    REQUIRE(out.items.size() == batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto ref = filter.solve(batch.proposals[i]);
      CHECK(out.items[i].result->xi_final == ref.xi_final);
      CHECK(out.items[i].result->lambda_final == ref.lambda_final);
      CHECK(out.items[i].result->residual_inf == ref.residual_inf);
    }
  }
  SUBCASE("a failing item does not affect the others") {
    std::vector<Vector<double>> mixed = {batch.proposals[0], Vector<double>::Zero(5), batch.proposals[2]};
    const auto out = filter.batch_solve(mixed, {}, 2);
    CHECK(out.items[0].ok());
    CHECK_FALSE(out.items[1].ok());
    CHECK(out.items[1].error_code == ErrorCode::DimensionMismatch);
    CHECK(out.items[2].ok());
    CHECK(out.items[2].result->xi_final == filter.solve(batch.proposals[2]).xi_final);
  }
  SUBCASE("warm-start count must match") {
    CHECK_THROWS_AS(filter.batch_solve(batch.proposals, {std::nullopt}), Error);
  }
}
