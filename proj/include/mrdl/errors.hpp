#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace mrdl {

/// Base class of every error raised by the library. `kind()` is a short,
/// stable tag that the command-line tool prints as the diagnostic class.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error("invalid-argument", what) {}
};

class CoincidentRobots : public Error {
 public:
  explicit CoincidentRobots(const std::string& what)
      : Error("coincident-robots", what) {}
};

/// Raised when two robots are closer than the safety margin. `depth` is the
/// penetration Ds - ||p_i - p_j|| (positive).
class SafetyViolated : public Error {
 public:
  SafetyViolated(double depth, const std::string& what)
      : Error("safety-violated", what), depth_(depth) {}

  double depth() const noexcept { return depth_; }

 private:
  double depth_;
};

/// The constraint bound is 0/0-free only on the margin when the relative
/// radial velocity vanishes; anything else there is singular.
class BoundarySingularity : public Error {
 public:
  explicit BoundarySingularity(const std::string& what)
      : Error("boundary-singularity", what) {}
};

class QpInfeasible : public Error {
 public:
  explicit QpInfeasible(const std::string& what)
      : Error("qp-infeasible", what) {}
};

class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what)
      : Error("numerical-failure", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io-error", what) {}
};

}  // namespace mrdl
