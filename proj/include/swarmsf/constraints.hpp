#pragma once

#include "swarmsf/basis.hpp"
#include "swarmsf/problem.hpp"

#include <Eigen/LU>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>

namespace swarmsf {

/// Boundary equalities A xi = b. Rows are grouped by (axis, robot); each
/// group holds position, velocity and acceleration at t = 0 and then at t = T.
template <typename Scalar = double>
struct EqualitySystem {
  Matrix<Scalar> A;
  Vector<Scalar> b;

  static constexpr int kRowsPerBlock = 6;
};

template <typename Scalar>
EqualitySystem<Scalar> build_equality(const SwarmProblem<Scalar>& problem, const BasisMatrices<Scalar>& basis) {
  require_size(basis.samples(), problem.samples(), "basis time grid");
  const CoefficientLayout layout{problem.robots, basis.degree};
  const Index last = basis.samples() - 1;

  Matrix<Scalar> block(EqualitySystem<Scalar>::kRowsPerBlock, layout.terms());
  block.row(0) = basis.W.row(0);
  block.row(1) = basis.Wd.row(0);
  block.row(2) = basis.Wdd.row(0);
  block.row(3) = basis.W.row(last);
  block.row(4) = basis.Wd.row(last);
  block.row(5) = basis.Wdd.row(last);

  Eigen::FullPivLU<Matrix<Scalar>> lu(block);
  if (lu.rank() < EqualitySystem<Scalar>::kRowsPerBlock) {
    throw Error(ErrorCode::RankDeficient, "boundary rows are rank " + std::to_string(lu.rank()) +
                                              " < 6; basis degree " + std::to_string(basis.degree) +
                                              " is too low");
  }

  EqualitySystem<Scalar> eq;
  const Index rows = Index(EqualitySystem<Scalar>::kRowsPerBlock) * 3 * problem.robots;
  eq.A = Matrix<Scalar>::Zero(rows, layout.size());
  eq.b.resize(rows);
  for (int axis = 0; axis < 3; ++axis) {
    for (int i = 0; i < problem.robots; ++i) {
      const Index r0 = Index(EqualitySystem<Scalar>::kRowsPerBlock) * (Index(axis) * problem.robots + i);
      eq.A.block(r0, layout.offset(axis, i), block.rows(), block.cols()) = block;
      const auto& bc = problem.boundary[static_cast<std::size_t>(i)];
      eq.b.segment(r0, 6) << bc.start.p(axis), bc.start.v(axis), bc.start.a(axis), bc.goal.p(axis),
          bc.goal.v(axis), bc.goal.a(axis);
    }
  }
  return eq;
}

/// The constraint operator F = blkdiag(G, G, G) with G = [F_o; F_w] acting on
/// one axis. F_o maps coefficients to pairwise position differences
/// p_i - p_j (pairs lexicographic, time minor); F_w maps them to each robot's
/// positions. The position sampling matrix is the basis matrix W.
template <typename Scalar = double>
class PairwiseOperator {
 public:
  PairwiseOperator() = default;

  PairwiseOperator(int robots, const Matrix<Scalar>& position_basis)
      : robots_(robots), pairs_(robot_pairs(robots)), P_(position_basis) {
    const Index H1 = P_.rows();
    const Index m1 = P_.cols();
    G_ = Matrix<Scalar>::Zero(rows_per_axis(), Index(robots_) * m1);
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = pairs_[k];
      G_.block(Index(k) * H1, Index(i) * m1, H1, m1) = P_;
      G_.block(Index(k) * H1, Index(j) * m1, H1, m1) = -P_;
    }
    for (int i = 0; i < robots_; ++i) {
      G_.block(pair_rows() + Index(i) * H1, Index(i) * m1, H1, m1) = P_;
    }
    gram_ = G_.transpose() * G_;
  }

  int robots() const { return robots_; }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }
  Index samples() const { return P_.rows(); }
  Index terms() const { return P_.cols(); }
  Index pair_rows() const { return Index(pairs_.size()) * samples(); }
  Index workspace_rows() const { return Index(robots_) * samples(); }
  Index rows_per_axis() const { return pair_rows() + workspace_rows(); }
  Index rows() const { return 3 * rows_per_axis(); }
  Index cols() const { return 3 * Index(robots_) * terms(); }

  /// Per-axis block [F_o; F_w].
  const Matrix<Scalar>& axis_block() const { return G_; }
  /// G^T G; F^T F is this block repeated on the diagonal for x, y and z.
  const Matrix<Scalar>& axis_gram() const { return gram_; }

  /// F xi, using the positions per axis rather than the dense block.
  Vector<Scalar> apply(const Vector<Scalar>& xi) const {
    require_size(xi.size(), cols(), "coefficient vector");
    Vector<Scalar> out(rows());
    const Index H1 = samples();
    const CoefficientLayout layout{robots_, int(terms()) - 1};
    for (int axis = 0; axis < 3; ++axis) {
      const Matrix<Scalar> pos = P_ * axis_coefficients(xi, layout, axis);
      auto seg = out.segment(Index(axis) * rows_per_axis(), rows_per_axis());
      for (std::size_t k = 0; k < pairs_.size(); ++k) {
        seg.segment(Index(k) * H1, H1) = pos.col(pairs_[k].first) - pos.col(pairs_[k].second);
      }
      seg.tail(workspace_rows()) = pos.reshaped();
    }
    return out;
  }

  /// F^T r.
  Vector<Scalar> apply_transpose(const Vector<Scalar>& r) const {
    require_size(r.size(), rows(), "constraint-space vector");
    const Index H1 = samples();
    Vector<Scalar> out(cols());
    for (int axis = 0; axis < 3; ++axis) {
      const auto seg = r.segment(Index(axis) * rows_per_axis(), rows_per_axis());
      Matrix<Scalar> per_robot = seg.tail(workspace_rows()).reshaped(H1, robots_);
      for (std::size_t k = 0; k < pairs_.size(); ++k) {
        const auto rk = seg.segment(Index(k) * H1, H1);
        per_robot.col(pairs_[k].first) += rk;
        per_robot.col(pairs_[k].second) -= rk;
      }
      out.segment(Index(axis) * robots_ * terms(), Index(robots_) * terms()) =
          (P_.transpose() * per_robot).reshaped();
    }
    return out;
  }

  /// The full operator as a sparse matrix.
  Eigen::SparseMatrix<Scalar> assemble() const {
    std::vector<Eigen::Triplet<Scalar>> triplets;
    for (int axis = 0; axis < 3; ++axis) {
      const Index r0 = Index(axis) * rows_per_axis();
      const Index c0 = Index(axis) * G_.cols();
      for (Index c = 0; c < G_.cols(); ++c) {
        for (Index r = 0; r < G_.rows(); ++r) {
          if (G_(r, c) != Scalar(0)) triplets.emplace_back(r0 + r, c0 + c, G_(r, c));
        }
      }
    }
    Eigen::SparseMatrix<Scalar> F(rows(), cols());
    F.setFromTriplets(triplets.begin(), triplets.end());
    return F;
  }

 private:
  int robots_{0};
  std::vector<std::pair<int, int>> pairs_;
  Matrix<Scalar> P_;
  Matrix<Scalar> G_;
  Matrix<Scalar> gram_;
};

template <typename Scalar>
PairwiseOperator<Scalar> build_F(const SwarmProblem<Scalar>& problem, const BasisMatrices<Scalar>& basis) {
  require_size(basis.samples(), problem.samples(), "basis time grid");
  return PairwiseOperator<Scalar>(problem.robots, basis.W);
}

/// Spherical variables of the reformulated constraints. Pair arrays are
/// indexed pair-major, time-minor; workspace arrays robot-major, time-minor.
/// Pair distances satisfy d >= 1, workspace distances 0 <= d_w <= 1.
template <typename Scalar = double>
struct SphericalVars {
  Vector<Scalar> alpha, beta, d;
  Vector<Scalar> alpha_w, beta_w, d_w;

  static SphericalVars zeros(Index pair_terms, Index workspace_terms) {
    SphericalVars v;
    v.alpha = v.beta = v.d = Vector<Scalar>::Zero(pair_terms);
    v.alpha_w = v.beta_w = v.d_w = Vector<Scalar>::Zero(workspace_terms);
    return v;
  }
};

/// e(alpha, beta, d): per axis, the pair block followed by the workspace block.
template <typename Scalar>
Vector<Scalar> build_e(const SphericalVars<Scalar>& vars, const SwarmProblem<Scalar>& problem) {
  const Index pair_terms = Index(problem.pair_count()) * problem.samples();
  const Index ws_terms = Index(problem.robots) * problem.samples();
  require_size(vars.alpha.size(), pair_terms, "alpha");
  require_size(vars.beta.size(), pair_terms, "beta");
  require_size(vars.d.size(), pair_terms, "d");
  require_size(vars.alpha_w.size(), ws_terms, "alpha_w");
  require_size(vars.beta_w.size(), ws_terms, "beta_w");
  require_size(vars.d_w.size(), ws_terms, "d_w");

  const Scalar a = problem.shape.a, b = problem.shape.b;
  const Scalar aw = problem.workspace.a_w, bw = problem.workspace.b_w;
  const auto& c = problem.workspace.center;
  const Index per_axis = pair_terms + ws_terms;

  const auto& al = vars.alpha.array();
  const auto& be = vars.beta.array();
  const auto& alw = vars.alpha_w.array();
  const auto& bew = vars.beta_w.array();

  Vector<Scalar> e(3 * per_axis);
  e.segment(0, pair_terms) = a * vars.d.array() * al.cos() * be.sin();
  e.segment(pair_terms, ws_terms) = c(0) + aw * vars.d_w.array() * alw.cos() * bew.sin();
  e.segment(per_axis, pair_terms) = a * vars.d.array() * al.sin() * be.sin();
  e.segment(per_axis + pair_terms, ws_terms) = c(1) + aw * vars.d_w.array() * alw.sin() * bew.sin();
  e.segment(2 * per_axis, pair_terms) = b * vars.d.array() * be.cos();
  e.segment(2 * per_axis + pair_terms, ws_terms) = c(2) + bw * vars.d_w.array() * bew.cos();
  return e;
}

/// Per-sample signed margins of the original quadratic constraints.
template <typename Scalar = double>
struct ViolationReport {
  Matrix<Scalar> workspace_margin;    // samples x robots; feasible when <= tol
  Matrix<Scalar> inter_robot_margin;  // samples x pairs; feasible when >= -tol
  Scalar boundary_residual{0};        // max |A xi - b| read off the trajectory endpoints
  Scalar tol{0};
  Scalar tol_eq{0};
  bool feasible{false};

  Scalar max_workspace_margin() const {
    return workspace_margin.size() ? workspace_margin.maxCoeff() : -std::numeric_limits<Scalar>::infinity();
  }
  Scalar min_inter_robot_margin() const {
    return inter_robot_margin.size() ? inter_robot_margin.minCoeff() : std::numeric_limits<Scalar>::infinity();
  }
  /// Largest amount by which any inequality is violated (0 when all hold).
  Scalar worst_violation() const {
    return std::max({Scalar(0), max_workspace_margin(), -min_inter_robot_margin()});
  }
};

inline constexpr double kDefaultFeasibilityTol = 1e-3;
inline constexpr double kDefaultBoundaryTol = 1e-8;

template <typename Scalar>
ViolationReport<Scalar> check_original_constraints(const Trajectory<Scalar>& traj, const SwarmProblem<Scalar>& problem,
                                                   Scalar tol = Scalar(kDefaultFeasibilityTol),
                                                   Scalar tol_eq = Scalar(kDefaultBoundaryTol)) {
  require_size(traj.robots(), problem.robots, "trajectory robot count");
  const Index T = traj.samples();
  const auto pairs = robot_pairs(problem.robots);

  ViolationReport<Scalar> rep;
  rep.tol = tol;
  rep.workspace_margin.resize(T, problem.robots);
  rep.inter_robot_margin.resize(T, Index(pairs.size()));
  for (Index t = 0; t < T; ++t) {
    for (int i = 0; i < problem.robots; ++i) {
      rep.workspace_margin(t, i) = workspace_margin(traj.position_at(i, t), problem.workspace);
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const Vector3<Scalar> delta = traj.position_at(pairs[k].first, t) - traj.position_at(pairs[k].second, t);
      rep.inter_robot_margin(t, Index(k)) = inter_robot_margin(delta, problem.shape);
    }
  }

  Scalar b_inf(0);
  Scalar residual(0);
  if (static_cast<int>(problem.boundary.size()) == problem.robots && T > 0) {
    for (int i = 0; i < problem.robots; ++i) {
      const auto& bc = problem.boundary[static_cast<std::size_t>(i)];
      const std::array<Vector3<Scalar>, 6> expected{bc.start.p, bc.start.v, bc.start.a,
                                                    bc.goal.p,  bc.goal.v,  bc.goal.a};
      const std::array<Vector3<Scalar>, 6> actual{traj.position_at(i, 0),     traj.velocity_at(i, 0),
                                                  traj.acceleration_at(i, 0),  traj.position_at(i, T - 1),
                                                  traj.velocity_at(i, T - 1), traj.acceleration_at(i, T - 1)};
      for (std::size_t k = 0; k < 6; ++k) {
        b_inf = std::max(b_inf, expected[k].cwiseAbs().maxCoeff());
        residual = std::max(residual, (actual[k] - expected[k]).cwiseAbs().maxCoeff());
      }
    }
  }
  rep.boundary_residual = residual;
  rep.tol_eq = tol_eq * (Scalar(1) + b_inf);
  rep.feasible = rep.max_workspace_margin() <= tol && rep.min_inter_robot_margin() >= -tol &&
                 rep.boundary_residual <= rep.tol_eq;
  return rep;
}

}  // namespace swarmsf
