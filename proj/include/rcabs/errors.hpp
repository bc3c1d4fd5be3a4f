#pragma once

#include <stdexcept>
#include <string>

namespace rcabs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition: shape mismatch, invalid parameter, bad argument.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A simulated state left the finite/bounded region.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Power iteration ran out of iterations; carries the last estimate.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : NumericalError(what), last_estimate_(last_estimate) {}
  double last_estimate() const { return last_estimate_; }

 private:
  double last_estimate_;
};

/// Gram-Schmidt hit a (numerically) dependent vector. index is 1-based.
class DegenerateBasisError : public NumericalError {
 public:
  explicit DegenerateBasisError(long index)
      : NumericalError("degenerate basis: vector " + std::to_string(index) +
                       " is linearly dependent on its predecessors"),
        index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

class RankDeficiencyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace rcabs
