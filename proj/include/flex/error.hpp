#pragma once

// Exception hierarchy shared by all modules. The CLI maps these onto its
// exit-code contract (validation 1, parse 2, numerical 3, I/O 4).

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flex {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  explicit ValidationError(const std::string& violation)
      : ValidationError(std::vector<std::string>{violation}) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "validation failed";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

// Unknown bus/branch/actor/controller id.
class ScopeError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, double last_mismatch, int iterations)
      : NumericalError(what), last_mismatch_(last_mismatch), iterations_(iterations) {}
  double last_mismatch() const { return last_mismatch_; }
  int iterations() const { return iterations_; }

 private:
  double last_mismatch_;
  int iterations_;
};

class SensitivityError : public NumericalError {
 public:
  SensitivityError(const std::string& what, std::string input)
      : NumericalError(what), input_(std::move(input)) {}
  const std::string& input() const { return input_; }

 private:
  std::string input_;
};

class QpError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StalenessError : public Error {
 public:
  using Error::Error;
};

class VariantError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace flex
