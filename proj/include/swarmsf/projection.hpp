#pragma once

#include "swarmsf/constraints.hpp"

#include <Eigen/Cholesky>

namespace swarmsf {

/// Closed-form equality-constrained QP
///   argmin 1/2 ||xi - xi_raw||^2  s.t.  A xi = b,
/// i.e. xi = xi_raw - A^T (A A^T)^{-1} (A xi_raw - b). A A^T is factored once
/// and the projector is then reused, read-only, for any number of inputs.
template <typename Scalar = double>
class BoundaryProjector {
 public:
  explicit BoundaryProjector(EqualitySystem<Scalar> eq) : eq_(std::move(eq)) {
    const Matrix<Scalar> gram = eq_.A * eq_.A.transpose();
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success || !well_conditioned(gram)) {
      throw Error(ErrorCode::SingularSystem, "A A^T is numerically singular");
    }
  }

  const EqualitySystem<Scalar>& system() const { return eq_; }

  Vector<Scalar> project(const Vector<Scalar>& xi_raw) const {
    require_size(xi_raw.size(), eq_.A.cols(), "coefficient vector");
    Vector<Scalar> xi = xi_raw - eq_.A.transpose() * llt_.solve(eq_.A * xi_raw - eq_.b);
    // One refinement pass keeps the residual at roundoff level for large b.
    xi -= eq_.A.transpose() * llt_.solve(eq_.A * xi - eq_.b);
    return xi;
  }

  /// max |A xi - b|.
  Scalar residual(const Vector<Scalar>& xi) const { return (eq_.A * xi - eq_.b).cwiseAbs().maxCoeff(); }

  /// The guaranteed bound on residual() after project(): 1e-8 (1 + ||b||_inf).
  Scalar tolerance(Scalar rel = Scalar(1e-8)) const {
    return rel * (Scalar(1) + (eq_.b.size() ? eq_.b.cwiseAbs().maxCoeff() : Scalar(0)));
  }

 private:
  bool well_conditioned(const Matrix<Scalar>& gram) const {
    const Vector<Scalar> diag = llt_.matrixL().toDenseMatrix().diagonal();
    if (diag.size() == 0) return true;
    const Scalar ratio = diag.minCoeff() / diag.maxCoeff();
    return ratio * ratio > Scalar(100) * std::numeric_limits<Scalar>::epsilon() && gram.allFinite();
  }

  EqualitySystem<Scalar> eq_;
  Eigen::LLT<Matrix<Scalar>> llt_;
};

template <typename Scalar>
Vector<Scalar> project_to_boundary(const Vector<Scalar>& xi_raw, const EqualitySystem<Scalar>& eq) {
  return BoundaryProjector<Scalar>(eq).project(xi_raw);
}

}  // namespace swarmsf
