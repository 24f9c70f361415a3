#pragma once

#include "swarmsf/types.hpp"

#include <array>
#include <cmath>

namespace swarmsf {

/// Sampled Bernstein basis of degree m over a uniform grid on [0, T].
/// Row k of `W` holds B_{j,m}(t_k / T) for j = 0..m; `Wd` and `Wdd` hold the
/// first and second time derivatives (per second, per second squared).
template <typename Scalar = double>
struct BasisMatrices {
  int degree{0};
  Scalar duration{1};
  Vector<Scalar> time_grid;
  Matrix<Scalar> W;
  Matrix<Scalar> Wd;
  Matrix<Scalar> Wdd;

  Index samples() const { return W.rows(); }
  Index terms() const { return W.cols(); }
};

namespace detail {

template <typename Scalar>
Scalar binomial(int n, int k) {
  if (k < 0 || k > n) return Scalar(0);
  Scalar r(1);
  for (int i = 1; i <= k; ++i) r = r * Scalar(n - k + i) / Scalar(i);
  return r;
}

// B_{j,deg}(s); zero outside 0 <= j <= deg.
template <typename Scalar>
Scalar bernstein(int j, int deg, Scalar s) {
  if (deg < 0 || j < 0 || j > deg) return Scalar(0);
  using std::pow;
  return binomial<Scalar>(deg, j) * pow(s, j) * pow(Scalar(1) - s, deg - j);
}

}  // namespace detail

/// Bernstein basis sampler with no degree floor. Most callers want
/// build_basis, which enforces the degree needed by the boundary system.
template <typename Scalar = double>
BasisMatrices<Scalar> sample_bernstein(int degree, int samples, Scalar duration) {
  if (degree < 0) throw Error(ErrorCode::DegreeTooLow, "basis degree must be >= 0");
  if (samples < 2) throw Error(ErrorCode::InvalidProblem, "at least 2 time samples are required");
  if (!(duration > Scalar(0))) throw Error(ErrorCode::InvalidProblem, "duration must be > 0");

  BasisMatrices<Scalar> basis;
  basis.degree = degree;
  basis.duration = duration;
  basis.time_grid = Vector<Scalar>::LinSpaced(samples, Scalar(0), duration);
  basis.W.resize(samples, degree + 1);
  basis.Wd.resize(samples, degree + 1);
  basis.Wdd.resize(samples, degree + 1);

  const Scalar m = Scalar(degree);
  const Scalar d1 = m / duration;
  const Scalar d2 = m * (m - Scalar(1)) / (duration * duration);
  for (int k = 0; k < samples; ++k) {
    // Endpoints set exactly so that s^0 * 0^0 style terms are never evaluated.
    const Scalar s = (k == samples - 1) ? Scalar(1) : basis.time_grid(k) / duration;
    for (int j = 0; j <= degree; ++j) {
      using detail::bernstein;
      basis.W(k, j) = bernstein(j, degree, s);
      basis.Wd(k, j) = degree >= 1 ? d1 * (bernstein(j - 1, degree - 1, s) - bernstein(j, degree - 1, s))
                                   : Scalar(0);
      basis.Wdd(k, j) = degree >= 2 ? d2 * (bernstein(j - 2, degree - 2, s) -
                                            Scalar(2) * bernstein(j - 1, degree - 2, s) +
                                            bernstein(j, degree - 2, s))
                                    : Scalar(0);
    }
  }
  return basis;
}

/// Minimum degree for which the six boundary rows per axis and robot are
/// linearly independent.
inline constexpr int kMinBasisDegree = 5;

template <typename Scalar = double>
BasisMatrices<Scalar> build_basis(int degree, int samples, Scalar duration) {
  if (degree < kMinBasisDegree) {
    throw Error(ErrorCode::DegreeTooLow,
                "basis degree " + std::to_string(degree) + " < " + std::to_string(kMinBasisDegree));
  }
  return sample_bernstein<Scalar>(degree, samples, duration);
}

/// Coefficient layout: xi = (c_{1,x} .. c_{n,x}, c_{1,y} .. c_{n,y}, c_{1,z} .. c_{n,z}),
/// each block holding the m + 1 Bernstein coefficients of one robot and axis.
struct CoefficientLayout {
  int robots{1};
  int degree{0};

  Index terms() const { return degree + 1; }
  Index axis_size() const { return Index(robots) * terms(); }
  Index size() const { return 3 * axis_size(); }
  Index offset(int axis, int robot) const { return Index(axis) * axis_size() + Index(robot) * terms(); }
};

/// Sampled trajectories of every robot. `position[axis]` is a samples x n
/// matrix with one column per robot; likewise for velocity and acceleration.
template <typename Scalar = double>
struct Trajectory {
  Vector<Scalar> time;
  std::array<Matrix<Scalar>, 3> position;
  std::array<Matrix<Scalar>, 3> velocity;
  std::array<Matrix<Scalar>, 3> acceleration;

  Index samples() const { return time.size(); }
  Index robots() const { return position[0].cols(); }

  Vector3<Scalar> position_at(Index robot, Index t) const {
    return {position[0](t, robot), position[1](t, robot), position[2](t, robot)};
  }
  Vector3<Scalar> velocity_at(Index robot, Index t) const {
    return {velocity[0](t, robot), velocity[1](t, robot), velocity[2](t, robot)};
  }
  Vector3<Scalar> acceleration_at(Index robot, Index t) const {
    return {acceleration[0](t, robot), acceleration[1](t, robot), acceleration[2](t, robot)};
  }

  /// All positions stacked as (axis, robot, t), i.e. the vector F_w applied
  /// per axis would produce.
  Vector<Scalar> stacked_positions() const {
    const Index block = samples() * robots();
    Vector<Scalar> out(3 * block);
    for (int axis = 0; axis < 3; ++axis) {
      out.segment(axis * block, block) = position[axis].reshaped();
    }
    return out;
  }
};

/// Views the coefficients of one axis as an (m + 1) x n matrix, column = robot.
template <typename Derived>
auto axis_coefficients(const Eigen::MatrixBase<Derived>& xi, const CoefficientLayout& layout, int axis) {
  return xi.segment(layout.offset(axis, 0), layout.axis_size()).reshaped(layout.terms(), layout.robots);
}

template <typename Scalar>
Trajectory<Scalar> coeffs_to_trajectory(const Vector<Scalar>& xi, const BasisMatrices<Scalar>& basis, int robots) {
  const CoefficientLayout layout{robots, basis.degree};
  require_size(xi.size(), layout.size(), "coefficient vector");

  Trajectory<Scalar> traj;
  traj.time = basis.time_grid;
  for (int axis = 0; axis < 3; ++axis) {
    const Matrix<Scalar> c = axis_coefficients(xi, layout, axis);
    traj.position[axis] = basis.W * c;
    traj.velocity[axis] = basis.Wd * c;
    traj.acceleration[axis] = basis.Wdd * c;
  }
  return traj;
}

}  // namespace swarmsf
