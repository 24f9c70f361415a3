#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace swarmsf {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Index = Eigen::Index;

enum class ErrorCode {
  StartOutsideWorkspace,
  GoalOutsideWorkspace,
  EndpointCollision,
  NonPositiveGeometry,
  InvalidProblem,
  DegreeTooLow,
  DimensionMismatch,
  RankDeficient,
  SingularSystem,
  SingularKKT,
  InvalidConfig,
  SchemaMismatch,
  TooFewSamples,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::StartOutsideWorkspace: return "StartOutsideWorkspace";
    case ErrorCode::GoalOutsideWorkspace: return "GoalOutsideWorkspace";
    case ErrorCode::EndpointCollision: return "EndpointCollision";
    case ErrorCode::NonPositiveGeometry: return "NonPositiveGeometry";
    case ErrorCode::InvalidProblem: return "InvalidProblem";
    case ErrorCode::DegreeTooLow: return "DegreeTooLow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SingularKKT: return "SingularKKT";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
  }
  return "Unknown";
}

/// Base exception for every failure raised by the library. The code is
/// stable and is what callers (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require_size(Index actual, Index expected, const char* what) {
  if (actual != expected) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has length " +
                                                  std::to_string(actual) + ", expected " +
                                                  std::to_string(expected));
  }
}

}  // namespace swarmsf
