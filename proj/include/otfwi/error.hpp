//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace otfwi {

/// Bad input: configuration, geometry, axis mismatch, violated precondition.
/// The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The numbers went wrong at run time (unstable step, divergence,
/// degenerate normalization). The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class AxisMismatchError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class GeometryError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class StabilityError : public NumericalError {
public:
  StabilityError(const std::string &what, double max_dt)
      : NumericalError(what), max_dt_(max_dt) {}

  double max_dt() const noexcept { return max_dt_; }

private:
  double max_dt_;
};

class DivergenceError : public NumericalError {
public:
  DivergenceError(const std::string &what, std::size_t step)
      : NumericalError(what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

/// A normalization had (numerically) no mass to normalize.
class DegenerateError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace otfwi
