#pragma once

#include "swarmsf/types.hpp"

#include <optional>
#include <sstream>
#include <utility>

namespace swarmsf {

/// Pairwise collision spheroid. `a` and `b` are the summed semi-axis scales of
/// two robots, used directly as the lateral and vertical radii of the
/// exclusion spheroid around one robot's centre.
template <typename Scalar = double>
struct RobotShape {
  Scalar a{1};
  Scalar b{1};
};

template <typename Scalar = double>
struct WorkspaceSpec {
  Vector3<Scalar> center{Vector3<Scalar>::Zero()};
  Scalar a_w{1};
  Scalar b_w{1};
};

/// Position, velocity and acceleration at one end of a trajectory.
template <typename Scalar = double>
struct EndpointState {
  Vector3<Scalar> p{Vector3<Scalar>::Zero()};
  Vector3<Scalar> v{Vector3<Scalar>::Zero()};
  Vector3<Scalar> a{Vector3<Scalar>::Zero()};
};

template <typename Scalar = double>
struct RobotBoundary {
  EndpointState<Scalar> start;
  EndpointState<Scalar> goal;
};

template <typename Scalar = double>
using BoundaryConditions = std::vector<RobotBoundary<Scalar>>;

/// Immutable scenario description. `horizon` is the last sample index H, so
/// trajectories are sampled at H + 1 uniformly spaced instants over [0, T].
template <typename Scalar = double>
struct SwarmProblem {
  int robots{1};
  int horizon{49};
  Scalar duration{1};
  RobotShape<Scalar> shape;
  WorkspaceSpec<Scalar> workspace;
  BoundaryConditions<Scalar> boundary;

  int samples() const { return horizon + 1; }
  int pair_count() const { return robots * (robots - 1) / 2; }

  bool operator==(const SwarmProblem& other) const {
    if (robots != other.robots || horizon != other.horizon || duration != other.duration ||
        shape.a != other.shape.a || shape.b != other.shape.b ||
        workspace.center != other.workspace.center || workspace.a_w != other.workspace.a_w ||
        workspace.b_w != other.workspace.b_w || boundary.size() != other.boundary.size()) {
      return false;
    }
    for (std::size_t i = 0; i < boundary.size(); ++i) {
      const auto& l = boundary[i];
      const auto& r = other.boundary[i];
      if (l.start.p != r.start.p || l.start.v != r.start.v || l.start.a != r.start.a ||
          l.goal.p != r.goal.p || l.goal.v != r.goal.v || l.goal.a != r.goal.a) {
        return false;
      }
    }
    return true;
  }
};

/// Lexicographic robot pairs (i, j), i < j. This ordering is used for every
/// pairwise quantity in the library.
inline std::vector<std::pair<int, int>> robot_pairs(int robots) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(robots * (robots - 1) / 2));
  for (int i = 0; i < robots; ++i) {
    for (int j = i + 1; j < robots; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

/// ||M_a^{-1} delta||^2 - 1. Non-negative when the pair is collision free.
template <typename Scalar, typename Derived>
Scalar inter_robot_margin(const Eigen::MatrixBase<Derived>& delta, const RobotShape<Scalar>& shape) {
  const Scalar x = delta(0) / shape.a;
  const Scalar y = delta(1) / shape.a;
  const Scalar z = delta(2) / shape.b;
  return x * x + y * y + z * z - Scalar(1);
}

/// ||M_w^{-1} (p - p_w)||^2 - 1. Non-positive inside the workspace.
template <typename Scalar, typename Derived>
Scalar workspace_margin(const Eigen::MatrixBase<Derived>& p, const WorkspaceSpec<Scalar>& ws) {
  const Scalar x = (p(0) - ws.center(0)) / ws.a_w;
  const Scalar y = (p(1) - ws.center(1)) / ws.a_w;
  const Scalar z = (p(2) - ws.center(2)) / ws.b_w;
  return x * x + y * y + z * z - Scalar(1);
}

struct ValidationIssue {
  ErrorCode code;
  int robot{-1};
  int other_robot{-1};
  std::string message;
};

/// Raised by validate_problem; carries every violated invariant, not only the
/// first one found.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(issues.front().code, summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::ostringstream out;
    for (std::size_t k = 0; k < issues.size(); ++k) {
      if (k) out << "; ";
      out << to_string(issues[k].code) << " (" << issues[k].message << ")";
    }
    return out.str();
  }

  std::vector<ValidationIssue> issues_;
};

/// Relative margin for strict workspace membership of endpoints.
inline constexpr double kWorkspaceMembershipMargin = 1e-9;

template <typename Scalar>
std::vector<ValidationIssue> collect_problem_issues(const SwarmProblem<Scalar>& problem) {
  std::vector<ValidationIssue> issues;
  auto add = [&](ErrorCode code, int i, int j, std::string msg) {
    issues.push_back({code, i, j, std::move(msg)});
  };

  if (problem.robots < 1) add(ErrorCode::InvalidProblem, -1, -1, "robot count n must be >= 1");
  if (problem.horizon < 1) add(ErrorCode::InvalidProblem, -1, -1, "horizon H must be >= 1 (at least 2 samples)");
  if (!(problem.duration > Scalar(0))) add(ErrorCode::InvalidProblem, -1, -1, "duration T must be > 0");
  if (!(problem.shape.a > Scalar(0)) || !(problem.shape.b > Scalar(0))) {
    add(ErrorCode::NonPositiveGeometry, -1, -1, "robot shape a and b must be > 0");
  }
  if (!(problem.workspace.a_w > Scalar(0)) || !(problem.workspace.b_w > Scalar(0))) {
    add(ErrorCode::NonPositiveGeometry, -1, -1, "workspace a_w and b_w must be > 0");
  }
  if (static_cast<int>(problem.boundary.size()) != problem.robots) {
    add(ErrorCode::InvalidProblem, -1, -1,
        "boundary has " + std::to_string(problem.boundary.size()) + " entries for " +
            std::to_string(problem.robots) + " robots");
  }
  // Geometry checks are meaningless without positive scales or a complete boundary.
  if (!issues.empty()) return issues;

  const Scalar inside = Scalar(1) - Scalar(kWorkspaceMembershipMargin);
  for (int i = 0; i < problem.robots; ++i) {
    const auto& bc = problem.boundary[static_cast<std::size_t>(i)];
    if (!(workspace_margin(bc.start.p, problem.workspace) + Scalar(1) < inside)) {
      add(ErrorCode::StartOutsideWorkspace, i, -1,
          "robot " + std::to_string(i) + " start lies outside the workspace");
    }
    if (!(workspace_margin(bc.goal.p, problem.workspace) + Scalar(1) < inside)) {
      add(ErrorCode::GoalOutsideWorkspace, i, -1,
          "robot " + std::to_string(i) + " goal lies outside the workspace");
    }
  }
  for (auto [i, j] : robot_pairs(problem.robots)) {
    const auto& bi = problem.boundary[static_cast<std::size_t>(i)];
    const auto& bj = problem.boundary[static_cast<std::size_t>(j)];
    if (inter_robot_margin(Vector3<Scalar>(bi.start.p - bj.start.p), problem.shape) < Scalar(0)) {
      add(ErrorCode::EndpointCollision, i, j,
          "start positions of robots " + std::to_string(i) + " and " + std::to_string(j) + " collide");
    }
    if (inter_robot_margin(Vector3<Scalar>(bi.goal.p - bj.goal.p), problem.shape) < Scalar(0)) {
      add(ErrorCode::EndpointCollision, i, j,
          "goal positions of robots " + std::to_string(i) + " and " + std::to_string(j) + " collide");
    }
  }
  return issues;
}

/// Returns the problem unchanged when every invariant holds, otherwise throws
/// a ValidationError listing all violations.
template <typename Scalar>
const SwarmProblem<Scalar>& validate_problem(const SwarmProblem<Scalar>& problem) {
  auto issues = collect_problem_issues(problem);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return problem;
}

}  // namespace swarmsf
