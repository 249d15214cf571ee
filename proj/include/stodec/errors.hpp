#pragma once

#include <stdexcept>
#include <string>

namespace stodec {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Vector/matrix dimensions of the arguments do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An iterative scheme failed to reach its tolerance within the iteration cap
/// (e.g. alternating projections on a possibly empty intersection).
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A computed quantity became NaN or infinite; the message carries the location.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Least-squares normal equations are numerically singular even after ridge.
class SingularRegressionError : public Error {
 public:
  using Error::Error;
};

/// Explicit time step violates the parabolic stability bound.
class CflViolation : public Error {
 public:
  using Error::Error;
};

/// Inner fixed-point iteration of the semi-implicit scheme did not settle.
class FixedPointDivergence : public Error {
 public:
  using Error::Error;
};

/// A policy extraction mode was requested that the value grid does not carry.
class ModeMismatch : public Error {
 public:
  using Error::Error;
};

/// Too many sampled points had to be rejected and redrawn.
class ResampleBudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// Driver Lipschitz constant times dt is too large for the Picard step.
class ContractionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or violated construction invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Configuration file failed parsing or validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stodec
