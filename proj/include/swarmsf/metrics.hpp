#pragma once

#include "swarmsf/sf_solver.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace swarmsf {

template <typename Scalar = double>
struct PrimalResidual {
  Vector<Scalar> r;
  Scalar inf_norm{0};
  Scalar l2_norm{0};
};

/// r_p = F xi - e(vars).
template <typename Scalar>
PrimalResidual<Scalar> primal_residual(const Vector<Scalar>& xi, const SphericalVars<Scalar>& vars,
                                       const PairwiseOperator<Scalar>& op, const SwarmProblem<Scalar>& problem) {
  PrimalResidual<Scalar> out;
  out.r = op.apply(xi) - build_e(vars, problem);
  out.inf_norm = out.r.size() ? out.r.cwiseAbs().maxCoeff() : Scalar(0);
  out.l2_norm = out.r.norm();
  return out;
}

/// Fraction of results that converged and whose trajectories satisfy the
/// original constraints at `tol`. Empty input has no defined fraction.
template <typename Scalar>
std::optional<double> feasible_fraction(const std::vector<SolveResult<Scalar>>& results,
                                        const SwarmProblem<Scalar>& problem, const BasisMatrices<Scalar>& basis,
                                        Scalar tol = Scalar(kDefaultFeasibilityTol)) {
  if (results.empty()) return std::nullopt;
  std::size_t ok = 0;
  for (const auto& r : results) {
    if (!r.converged) continue;
    if (check_original_constraints(coeffs_to_trajectory(r.xi_final, basis, problem.robots), problem, tol).feasible) {
      ++ok;
    }
  }
  return double(ok) / double(results.size());
}

template <typename Scalar>
std::optional<double> feasible_fraction(const std::vector<SolveOutcome<Scalar>>& outcomes,
                                        const SwarmProblem<Scalar>& problem, const BasisMatrices<Scalar>& basis,
                                        Scalar tol = Scalar(kDefaultFeasibilityTol)) {
  if (outcomes.empty()) return std::nullopt;
  std::size_t ok = 0;
  for (const auto& o : outcomes) {
    if (!o.ok() || !o.result->converged) continue;
    const auto traj = coeffs_to_trajectory(o.result->xi_final, basis, problem.robots);
    if (check_original_constraints(traj, problem, tol).feasible) ++ok;
  }
  return double(ok) / double(outcomes.size());
}

struct DiversityScore {
  double mean_cosine{std::numeric_limits<double>::quiet_NaN()};
  std::size_t pairs{0};
  bool degenerate{true};
};

/// Mean cosine similarity over unordered pairs of the columns of `vectors`,
/// optionally after subtracting the column mean. Zero-norm columns take part
/// in no pair; if no pair remains the score is degenerate.
template <typename Derived>
DiversityScore mean_pairwise_cosine(const Eigen::MatrixBase<Derived>& vectors, bool center) {
  using Scalar = typename Derived::Scalar;
  if (vectors.cols() < 2) throw Error(ErrorCode::TooFewSamples, "cosine diversity needs at least 2 samples");
  Matrix<Scalar> v = vectors;
  if (center) v.colwise() -= v.rowwise().mean();
  const Vector<Scalar> norms = v.colwise().norm().transpose();
  const Scalar floor = std::numeric_limits<Scalar>::epsilon() * Scalar(16) *
                       std::max(Scalar(1), vectors.cwiseAbs().maxCoeff()) * std::sqrt(Scalar(v.rows()));

  DiversityScore score;
  double sum = 0;
  for (Index i = 0; i < v.cols(); ++i) {
    if (norms(i) <= floor) continue;
    for (Index j = i + 1; j < v.cols(); ++j) {
      if (norms(j) <= floor) continue;
      sum += double(v.col(i).dot(v.col(j)) / (norms(i) * norms(j)));
      ++score.pairs;
    }
  }
  if (score.pairs > 0) {
    score.mean_cosine = sum / double(score.pairs);
    score.degenerate = false;
  }
  return score;
}

/// Diversity of a set of trajectories: positions of all robots and axes are
/// flattened per trajectory, mean-centred across the set, and the mean
/// pairwise cosine similarity is returned. Lower is more diverse.
template <typename Scalar>
DiversityScore diversity_cosine(const std::vector<Trajectory<Scalar>>& trajectories) {
  if (trajectories.size() < 2) throw Error(ErrorCode::TooFewSamples, "cosine diversity needs at least 2 trajectories");
  const Index len = trajectories.front().stacked_positions().size();
  Matrix<Scalar> flat(len, Index(trajectories.size()));
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Vector<Scalar> s = trajectories[k].stacked_positions();
    require_size(s.size(), len, "trajectory");
    flat.col(Index(k)) = s;
  }
  return mean_pairwise_cosine(flat, true);
}

struct LinearFit {
  double slope{0};
  double intercept{0};
  double r2{0};
};

/// Ordinary least-squares line through (x, y) with coefficient of determination.
inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::TooFewSamples, "linear fit needs >= 2 points");
  const auto n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxx > 0 ? sxy / sxx : 0;
  fit.intercept = my - fit.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += e * e;
  }
  fit.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  return fit;
}

/// Summary of one filtered batch.
struct BatchReport {
  std::size_t batch_size{0};
  std::size_t converged{0};
  std::size_t feasible{0};
  std::size_t failed{0};
  std::optional<double> feasible_fraction;
  DiversityScore diversity;
  std::vector<double> final_residual_inf;  // NaN for failed items
  std::vector<double> per_proposal_seconds;
  double total_seconds{0};
  double feasibility_tol{kDefaultFeasibilityTol};
};

/// Aggregates a batch: feasibility per item and cosine diversity over the
/// feasible solutions (degenerate when fewer than two).
template <typename Scalar>
BatchReport summarize_batch(const BatchResult<Scalar>& batch, const SwarmProblem<Scalar>& problem,
                            const BasisMatrices<Scalar>& basis, Scalar tol, std::vector<bool>* feasible_mask = nullptr) {
  BatchReport rep;
  rep.batch_size = batch.items.size();
  rep.total_seconds = batch.seconds;
  rep.feasibility_tol = double(tol);
  std::vector<Trajectory<Scalar>> feasible;
  if (feasible_mask) feasible_mask->assign(batch.items.size(), false);
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    const auto& item = batch.items[i];
    if (!item.ok()) {
      ++rep.failed;
      rep.final_residual_inf.push_back(std::numeric_limits<double>::quiet_NaN());
      rep.per_proposal_seconds.push_back(0.0);
      continue;
    }
    const auto& r = *item.result;
    rep.per_proposal_seconds.push_back(r.seconds);
    rep.final_residual_inf.push_back(r.residual_inf.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                            : double(r.residual_inf.back()));
    if (!r.converged) continue;
    ++rep.converged;
    auto traj = coeffs_to_trajectory(r.xi_final, basis, problem.robots);
    if (check_original_constraints(traj, problem, tol).feasible) {
      ++rep.feasible;
      if (feasible_mask) (*feasible_mask)[i] = true;
      feasible.push_back(std::move(traj));
    }
  }
  if (rep.batch_size > 0) rep.feasible_fraction = double(rep.feasible) / double(rep.batch_size);
  if (feasible.size() >= 2) rep.diversity = diversity_cosine(feasible);
  return rep;
}

}  // namespace swarmsf
