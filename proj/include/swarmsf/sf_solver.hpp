#pragma once

#include "swarmsf/projection.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <thread>

namespace swarmsf {

template <typename Scalar = double>
struct SolverConfig {
  Scalar rho{1};
  int max_iters{200};
  Scalar tol_residual{1e-3};  // on ||r_p||_inf
  Scalar tol_eq{1e-8};        // relative boundary residual, scaled by (1 + ||b||_inf)
  bool early_stop{true};

  void validate() const {
    if (!(rho > Scalar(0))) throw Error(ErrorCode::InvalidConfig, "rho must be > 0");
    if (max_iters < 1) throw Error(ErrorCode::InvalidConfig, "max_iters must be >= 1");
    if (!(tol_residual >= Scalar(0)) || !(tol_eq >= Scalar(0))) {
      throw Error(ErrorCode::InvalidConfig, "tolerances must be non-negative");
    }
  }
};

template <typename Scalar = double>
struct SolverState {
  Vector<Scalar> xi;
  Vector<Scalar> lambda;
  SphericalVars<Scalar> vars;
  int k{0};
};

template <typename Scalar = double>
struct WarmStart {
  Vector<Scalar> xi0;
  Vector<Scalar> lambda0;
};

template <typename Scalar = double>
struct SolveResult {
  Vector<Scalar> xi_final;
  Vector<Scalar> lambda_final;
  SphericalVars<Scalar> vars_final;
  std::vector<Scalar> residual_inf;
  std::vector<Scalar> residual_l2;
  int iterations_run{0};
  bool converged{false};
  Scalar displacement{0};  // ||xi* - xi_bar||_2
  double seconds{0};       // wall-clock of this solve
};

/// Closed-form minimiser of ||r - d * (a cos(al) sin(be), a sin(al) sin(be), b cos(be))||^2
/// for one relative vector r. The angles are those of r in coordinates scaled
/// by (a, a, b); d is the unconstrained least-squares distance for those
/// angles, clamped to [d_lo, d_hi].
template <typename Scalar>
struct SphericalFit {
  Scalar alpha, beta, d;
};

template <typename Scalar>
SphericalFit<Scalar> fit_spherical(Scalar x, Scalar y, Scalar z, Scalar a, Scalar b, Scalar d_lo, Scalar d_hi) {
  using std::atan2, std::cos, std::sin, std::sqrt;
  if (x == Scalar(0) && y == Scalar(0) && z == Scalar(0)) {
    return {Scalar(0), Scalar(std::numbers::pi_v<double> / 2), d_lo};
  }
  const Scalar lateral = sqrt(x * x + y * y);
  const Scalar alpha = atan2(y, x);
  const Scalar beta = atan2(lateral / a, z / b);
  const Scalar sb = sin(beta), cb = cos(beta);
  const Scalar d = (a * sb * lateral + b * cb * z) / (a * a * sb * sb + b * b * cb * cb);
  return {alpha, beta, std::clamp(d, d_lo, d_hi)};
}

/// Spherical variables from F xi, already computed.
template <typename Scalar>
SphericalVars<Scalar> spherical_step_from_Fxi(const Vector<Scalar>& Fxi, const PairwiseOperator<Scalar>& op,
                                             const SwarmProblem<Scalar>& problem) {
  require_size(Fxi.size(), op.rows(), "F xi");
  const Index pr = op.pair_rows();
  const Index wr = op.workspace_rows();
  const Index per_axis = op.rows_per_axis();
  auto vars = SphericalVars<Scalar>::zeros(pr, wr);
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  const auto& c = problem.workspace.center;

  for (Index k = 0; k < pr; ++k) {
    const auto f = fit_spherical(Fxi(k), Fxi(per_axis + k), Fxi(2 * per_axis + k), problem.shape.a, problem.shape.b,
                                 Scalar(1), inf);
    vars.alpha(k) = f.alpha;
    vars.beta(k) = f.beta;
    vars.d(k) = f.d;
  }
  for (Index k = 0; k < wr; ++k) {
    const Index r = pr + k;
    const auto f = fit_spherical(Fxi(r) - c(0), Fxi(per_axis + r) - c(1), Fxi(2 * per_axis + r) - c(2),
                                 problem.workspace.a_w, problem.workspace.b_w, Scalar(0), Scalar(1));
    vars.alpha_w(k) = f.alpha;
    vars.beta_w(k) = f.beta;
    vars.d_w(k) = f.d;
  }
  return vars;
}

template <typename Scalar>
SphericalVars<Scalar> spherical_step(const Vector<Scalar>& xi, const PairwiseOperator<Scalar>& op,
                                     const SwarmProblem<Scalar>& problem) {
  return spherical_step_from_Fxi(op.apply(xi), op, problem);
}

/// Multiplier update lambda <- lambda - rho F^T (F xi - e), with xi from the
/// previous iterate and e from the freshly updated spherical variables.
template <typename Scalar>
Vector<Scalar> lambda_update(const SolverState<Scalar>& state, const Vector<Scalar>& e_vec,
                             const SolverConfig<Scalar>& config, const PairwiseOperator<Scalar>& op) {
  require_size(state.lambda.size(), op.cols(), "lambda");
  require_size(e_vec.size(), op.rows(), "e");
  return state.lambda - config.rho * op.apply_transpose(op.apply(state.xi) - e_vec);
}

/// Solves the xi-step KKT system
///   [I + rho F^T F   A^T] [xi]   [rho F^T e + lambda + xi_bar]
///   [A               0  ] [nu] = [b                          ]
/// The system is block diagonal over the x, y and z axes with identical
/// blocks, so one factorisation (Cholesky of the Hessian block and of its
/// Schur complement) serves all three axes and every proposal.
template <typename Scalar = double>
class XiStepSolver {
 public:
  XiStepSolver(const EqualitySystem<Scalar>& eq, const PairwiseOperator<Scalar>& op, Scalar rho)
      : rho_(rho), b_(eq.b) {
    if (!(rho >= Scalar(0))) throw Error(ErrorCode::InvalidConfig, "rho must be >= 0");
    n_ = op.axis_gram().rows();
    m_ = eq.A.rows() / 3;
    require_size(eq.A.cols(), 3 * n_, "equality system columns");
    A_ = eq.A.block(0, 0, m_, n_);
    for (int axis = 1; axis < 3; ++axis) {
      if (eq.A.block(axis * m_, axis * n_, m_, n_) != A_) {
        throw Error(ErrorCode::DimensionMismatch, "equality system is not axis-separable");
      }
    }
    const Matrix<Scalar> Q = Matrix<Scalar>::Identity(n_, n_) + rho * op.axis_gram();
    q_llt_.compute(Q);
    if (q_llt_.info() != Eigen::Success) throw Error(ErrorCode::SingularKKT, "Hessian block not positive definite");
    QinvAt_ = q_llt_.solve(A_.transpose());
    s_llt_.compute(A_ * QinvAt_);
    if (s_llt_.info() != Eigen::Success) throw Error(ErrorCode::SingularKKT, "Schur complement not positive definite");
  }

  Scalar rho() const { return rho_; }

  /// Solves for a right-hand side top block, returning (xi, nu).
  std::pair<Vector<Scalar>, Vector<Scalar>> solve_kkt(const Vector<Scalar>& eta_top) const {
    require_size(eta_top.size(), 3 * n_, "eta");
    const Matrix<Scalar> top = eta_top.reshaped(n_, 3);
    const Matrix<Scalar> rhs_b = b_.reshaped(m_, 3);
    const Matrix<Scalar> y = q_llt_.solve(top);
    const Matrix<Scalar> nu = s_llt_.solve(A_ * y - rhs_b);
    Matrix<Scalar> xi = y - QinvAt_ * nu;
    // Iterative refinement on the equality rows only.
    const Matrix<Scalar> dnu = s_llt_.solve(A_ * xi - rhs_b);
    xi -= QinvAt_ * dnu;
    Matrix<Scalar> nu_total = nu + dnu;
    return {xi.reshaped(), nu_total.reshaped()};
  }

  Vector<Scalar> solve(const Vector<Scalar>& xi_bar, const Vector<Scalar>& e_vec, const Vector<Scalar>& lambda,
                       const PairwiseOperator<Scalar>& op) const {
    require_size(xi_bar.size(), 3 * n_, "xi_bar");
    require_size(lambda.size(), 3 * n_, "lambda");
    return solve_kkt(eta_top(xi_bar, e_vec, lambda, op)).first;
  }

  Vector<Scalar> eta_top(const Vector<Scalar>& xi_bar, const Vector<Scalar>& e_vec, const Vector<Scalar>& lambda,
                         const PairwiseOperator<Scalar>& op) const {
    return rho_ * op.apply_transpose(e_vec) + lambda + xi_bar;
  }

 private:
  Scalar rho_;
  Vector<Scalar> b_;
  Index n_{0};  // coefficients per axis
  Index m_{0};  // equality rows per axis
  Matrix<Scalar> A_;
  Matrix<Scalar> QinvAt_;
  Eigen::LLT<Matrix<Scalar>> q_llt_;
  Eigen::LLT<Matrix<Scalar>> s_llt_;
};

template <typename Scalar>
Vector<Scalar> xi_step(const Vector<Scalar>& xi_bar, const Vector<Scalar>& e_vec, const Vector<Scalar>& lambda,
                       const EqualitySystem<Scalar>& eq, const PairwiseOperator<Scalar>& op,
                       const SolverConfig<Scalar>& config) {
  return XiStepSolver<Scalar>(eq, op, config.rho).solve(xi_bar, e_vec, lambda, op);
}

/// One failed or successful item of a batch.
template <typename Scalar = double>
struct SolveOutcome {
  std::optional<SolveResult<Scalar>> result;
  std::optional<ErrorCode> error_code;
  std::string error;

  bool ok() const { return result.has_value(); }
};

template <typename Scalar = double>
struct BatchResult {
  std::vector<SolveOutcome<Scalar>> items;
  double seconds{0};
};

/// The safety filter for one problem: every operator and factorisation that
/// depends only on (problem, basis, rho) is assembled once here and shared
/// read-only by all solves.
template <typename Scalar = double>
class SafetyFilter {
 public:
  SafetyFilter(SwarmProblem<Scalar> problem, BasisMatrices<Scalar> basis, SolverConfig<Scalar> config)
      : problem_(std::move(validate_problem(problem))),
        basis_(std::move(basis)),
        config_(validated(config)),
        layout_{problem_.robots, basis_.degree},
        op_(build_F(problem_, basis_)),
        projector_(build_equality(problem_, basis_)),
        xi_solver_(projector_.system(), op_, config_.rho) {}

  const SwarmProblem<Scalar>& problem() const { return problem_; }
  const BasisMatrices<Scalar>& basis() const { return basis_; }
  const SolverConfig<Scalar>& config() const { return config_; }
  const CoefficientLayout& layout() const { return layout_; }
  const PairwiseOperator<Scalar>& op() const { return op_; }
  const EqualitySystem<Scalar>& equality() const { return projector_.system(); }
  const BoundaryProjector<Scalar>& projector() const { return projector_; }
  const XiStepSolver<Scalar>& xi_solver() const { return xi_solver_; }

  /// Same filter and factorisations with a different iteration budget.
  SafetyFilter with_iterations(int max_iters, bool early_stop) const {
    SafetyFilter copy = *this;
    copy.config_.max_iters = max_iters;
    copy.config_.early_stop = early_stop;
    copy.config_.validate();
    return copy;
  }

  /// Runs the alternating-minimisation fixed point from `init`, or from
  /// (project_to_boundary(xi_bar), 0) when no warm start is given.
  SolveResult<Scalar> solve(const Vector<Scalar>& xi_bar, const std::optional<WarmStart<Scalar>>& init = {}) const {
    require_size(xi_bar.size(), layout_.size(), "proposal");
    const auto started = std::chrono::steady_clock::now();
    SolverState<Scalar> state;
    if (init) {
      require_size(init->xi0.size(), layout_.size(), "warm-start xi0");
      require_size(init->lambda0.size(), layout_.size(), "warm-start lambda0");
      state.xi = init->xi0;
      state.lambda = init->lambda0;
    } else {
      state.xi = projector_.project(xi_bar);
      state.lambda = Vector<Scalar>::Zero(layout_.size());
    }

    SolveResult<Scalar> res;
    res.residual_inf.reserve(static_cast<std::size_t>(config_.max_iters));
    res.residual_l2.reserve(static_cast<std::size_t>(config_.max_iters));
    Vector<Scalar> Fxi = op_.apply(state.xi);
    const Scalar rho = config_.rho;
    for (state.k = 0; state.k < config_.max_iters;) {
      state.vars = spherical_step_from_Fxi(Fxi, op_, problem_);
      const Vector<Scalar> e = build_e(state.vars, problem_);
      const Vector<Scalar> FTe = op_.apply_transpose(e);
      state.lambda -= rho * (op_.apply_transpose(Fxi) - FTe);
      state.xi = xi_solver_.solve_kkt(rho * FTe + state.lambda + xi_bar).first;
      ++state.k;

      Fxi = op_.apply(state.xi);
      const Vector<Scalar> r = Fxi - e;
      res.residual_inf.push_back(r.cwiseAbs().maxCoeff());
      res.residual_l2.push_back(r.norm());
      if (config_.early_stop && res.residual_inf.back() <= config_.tol_residual) break;
    }

    res.iterations_run = state.k;
    res.converged = !res.residual_inf.empty() && res.residual_inf.back() <= config_.tol_residual;
    res.displacement = (state.xi - xi_bar).norm();
    res.xi_final = std::move(state.xi);
    res.lambda_final = std::move(state.lambda);
    res.vars_final = std::move(state.vars);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
  }

  /// Parallel map of solve() over the batch. Results keep input order and are
  /// bitwise independent of `threads`; an item that throws is reported in its
  /// slot without affecting the others.
  BatchResult<Scalar> batch_solve(const std::vector<Vector<Scalar>>& proposals,
                                  const std::vector<std::optional<WarmStart<Scalar>>>& inits = {},
                                  unsigned threads = 1) const {
    if (!inits.empty() && inits.size() != proposals.size()) {
      throw Error(ErrorCode::DimensionMismatch, "warm-start count " + std::to_string(inits.size()) +
                                                    " differs from proposal count " +
                                                    std::to_string(proposals.size()));
    }
    BatchResult<Scalar> out;
    out.items.resize(proposals.size());
    const auto start = std::chrono::steady_clock::now();

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < proposals.size(); i = next++) {
        auto& slot = out.items[i];
        try {
          slot.result = solve(proposals[i], inits.empty() ? std::nullopt : inits[i]);
        } catch (const Error& err) {
          slot.error_code = err.code();
          slot.error = err.what();
        } catch (const std::exception& err) {
          slot.error = err.what();
        }
      }
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, proposals.size()))));
    if (threads == 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      pool.reserve(threads);
      for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  static SolverConfig<Scalar> validated(const SolverConfig<Scalar>& config) {
    config.validate();
    return config;
  }

  SwarmProblem<Scalar> problem_;
  BasisMatrices<Scalar> basis_;
  SolverConfig<Scalar> config_;
  CoefficientLayout layout_;
  PairwiseOperator<Scalar> op_;
  BoundaryProjector<Scalar> projector_;
  XiStepSolver<Scalar> xi_solver_;
};

template <typename Scalar>
SolveResult<Scalar> solve(const Vector<Scalar>& xi_bar, const std::optional<WarmStart<Scalar>>& init,
                          const SwarmProblem<Scalar>& problem, const BasisMatrices<Scalar>& basis,
                          const SolverConfig<Scalar>& config) {
  return SafetyFilter<Scalar>(problem, basis, config).solve(xi_bar, init);
}

/// Hardware thread count, at least 1.
inline unsigned max_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace swarmsf
