#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ecs {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition on integer or real parameters failed.
class ParameterDomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed user input (files, CLI values, schema).
class InputError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public InputError {
 public:
  using InputError::InputError;
};

/// Complex, repeated or nonpositive roots where a real simple positive spectrum
/// was required.
class SpectrumStructureError : public Error {
 public:
  using Error::Error;
};

class UnitRootError : public SpectrumStructureError {
 public:
  using SpectrumStructureError::SpectrumStructureError;
};

/// Target spectrum has all |log lambda| equal, so the traceless part vanishes.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

/// Finite-time escape of a Riccati solution.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double escape_time)
      : Error(what), escape_time_(escape_time) {}
  double escape_time() const noexcept { return escape_time_; }

 private:
  double escape_time_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Newton stagnation during spectral calibration. Carries the residual history
/// (one max-norm value per iteration).
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// The perturbed profile lies outside the Newton basin of the constant seed.
class BasinError : public Error {
 public:
  using Error::Error;
};

class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class IntegratorError : public Error {
 public:
  using Error::Error;
};

class ConservationError : public Error {
 public:
  ConservationError(const std::string& what, double spread)
      : Error(what), spread_(spread) {}
  double spread() const noexcept { return spread_; }

 private:
  double spread_;
};

class GeometryVerificationError : public Error {
 public:
  using Error::Error;
};

class IsometryError : public Error {
 public:
  using Error::Error;
};

class AbelianError : public Error {
 public:
  using Error::Error;
};

/// Objects built over different models were combined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Pipeline failure tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, bool input_error)
      : Error("stage " + stage + ": " + what),
        stage_(std::move(stage)),
        input_error_(input_error) {}
  const std::string& stage() const noexcept { return stage_; }
  bool input_error() const noexcept { return input_error_; }

 private:
  std::string stage_;
  bool input_error_;
};

}  // namespace ecs
