#pragma once

#include "swarmsf/projection.hpp"
#include "swarmsf/sf_solver.hpp"

#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <random>

namespace swarmsf {

enum class Provenance { Sampled, Loaded, LoadedProjected };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Sampled: return "sampled";
    case Provenance::Loaded: return "loaded";
    case Provenance::LoadedProjected: return "loaded+projected";
  }
  return "unknown";
}

/// Boundary-feasible proposals xi_bar. Every entry satisfies
/// ||A xi_bar - b||_inf <= 1e-8 (1 + ||b||_inf).
template <typename Scalar = double>
struct ProposalBatch {
  std::vector<Vector<Scalar>> proposals;
  Provenance provenance{Provenance::Sampled};
  std::uint64_t seed{0};
  Scalar spread{0};
  /// Loaded entries that needed a boundary projection.
  std::vector<bool> projected;

  std::size_t size() const { return proposals.size(); }
};

/// Bernstein coefficients of the straight line from each start to its goal,
/// traversed at constant speed.
template <typename Scalar>
Vector<Scalar> straight_line_coefficients(const SwarmProblem<Scalar>& problem, int degree) {
  const CoefficientLayout layout{problem.robots, degree};
  Vector<Scalar> xi(layout.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (int i = 0; i < problem.robots; ++i) {
      const auto& bc = problem.boundary[static_cast<std::size_t>(i)];
      const Scalar p0 = bc.start.p(axis), p1 = bc.goal.p(axis);
      for (int j = 0; j <= degree; ++j) {
        xi(layout.offset(axis, i) + j) = p0 + (p1 - p0) * Scalar(j) / Scalar(std::max(degree, 1));
      }
    }
  }
  return xi;
}

inline constexpr double kPerturbationVarianceDecay = 0.7;

/// Bernstein coefficients of the perturbation modes 4 s (1 - s) P_{k-1}(2 s - 1),
/// k = 1 .. m - 1 (columns). The modes vanish at both endpoints, so sampled
/// positions keep their start and goal.
template <typename Scalar>
Matrix<Scalar> perturbation_modes(int degree) {
  const int modes = std::max(degree - 1, 0);
  const int nodes = degree + 1;
  Matrix<Scalar> collocation(nodes, nodes);
  Matrix<Scalar> values(nodes, modes);
  for (int r = 0; r < nodes; ++r) {
    const Scalar s = Scalar(r) / Scalar(degree);
    for (int j = 0; j <= degree; ++j) collocation(r, j) = detail::bernstein(j, degree, s);
    // Legendre polynomials P_0 .. P_{modes-1} at u = 2s - 1.
    const Scalar u = Scalar(2) * s - Scalar(1);
    std::vector<Scalar> legendre(static_cast<std::size_t>(std::max(modes, 2)));
    legendre[0] = Scalar(1);
    legendre[1] = u;
    for (int l = 1; l + 1 < modes; ++l) {
      legendre[l + 1] = (Scalar(2 * l + 1) * u * legendre[l] - Scalar(l) * legendre[l - 1]) / Scalar(l + 1);
    }
    for (int k = 0; k < modes; ++k) {
      values(r, k) = Scalar(4) * s * (Scalar(1) - s) * legendre[static_cast<std::size_t>(k)];
    }
  }
  return Eigen::ColPivHouseholderQR<Matrix<Scalar>>(collocation).solve(values);
}

/// Built-in stochastic proposal source: smooth random perturbations of the
/// straight-line fit, boundary-projected. Mode k has standard deviation
/// spread * extent * 0.7^((k - 1) / 2), where extent is a_w laterally and
/// b_w vertically. Deterministic in `seed`.
template <typename Scalar>
ProposalBatch<Scalar> sample_proposals(const SwarmProblem<Scalar>& problem, const BasisMatrices<Scalar>& basis,
                                       const BoundaryProjector<Scalar>& projector, std::size_t count,
                                       std::uint64_t seed, Scalar spread) {
  if (!(spread >= Scalar(0))) throw Error(ErrorCode::InvalidConfig, "spread must be >= 0");
  const CoefficientLayout layout{problem.robots, basis.degree};
  const Vector<Scalar> line = straight_line_coefficients(problem, basis.degree);
  const Matrix<Scalar> modes = perturbation_modes<Scalar>(basis.degree);

  ProposalBatch<Scalar> batch;
  batch.provenance = Provenance::Sampled;
  batch.seed = seed;
  batch.spread = spread;
  batch.proposals.reserve(count);
  batch.projected.assign(count, true);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<Scalar> weights(modes.cols());
  for (std::size_t s = 0; s < count; ++s) {
    Vector<Scalar> raw = line;
    for (int axis = 0; axis < 3; ++axis) {
      const Scalar extent = axis < 2 ? problem.workspace.a_w : problem.workspace.b_w;
      for (int i = 0; i < problem.robots; ++i) {
        for (Index k = 0; k < modes.cols(); ++k) {
          const Scalar sigma = spread * extent * Scalar(std::pow(kPerturbationVarianceDecay, 0.5 * double(k)));
          weights(k) = sigma * Scalar(normal(rng));
        }
        raw.segment(layout.offset(axis, i), layout.terms()) += modes * weights;
      }
    }
    batch.proposals.push_back(projector.project(raw));
  }
  return batch;
}

template <typename Scalar>
ProposalBatch<Scalar> sample_proposals(const SafetyFilter<Scalar>& filter, std::size_t count, std::uint64_t seed,
                                       Scalar spread) {
  return sample_proposals(filter.problem(), filter.basis(), filter.projector(), count, seed, spread);
}

}  // namespace swarmsf
