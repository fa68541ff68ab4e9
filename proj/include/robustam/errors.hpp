#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace robustam {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  infeasible = 2,
  cap_exceeded = 3,
  schema = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::failure)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Malformed configuration, measure file or lattice file.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(what, ExitCode::schema) {}
};

// Bad arguments to a library call (index out of range, bad epsilon, ...).
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what, ExitCode::failure) {}
};

// The model class admits no measure (empty pricing set).
class InfeasibleClassError : public Error {
 public:
  explicit InfeasibleClassError(const std::string& what) : Error(what, ExitCode::infeasible) {}
};

class CapExceededError : public Error {
 public:
  CapExceededError(const std::string& what, std::size_t count)
      : Error(what, ExitCode::cap_exceeded), count_(count) {}
  std::size_t count() const noexcept { return count_; }

 private:
  std::size_t count_;
};

// The Azema supermartingale hits zero before maturity; the caller has to
// epsilon-modify the enlarged measure first.
class EpsilonModificationRequired : public Error {
 public:
  explicit EpsilonModificationRequired(const std::string& what)
      : Error(what, ExitCode::infeasible) {}
};

// A Y-path of the joint lattice cannot reach its pinned terminal value.
class PinInfeasibleError : public Error {
 public:
  PinInfeasibleError(const std::string& what, std::size_t x_path)
      : Error(what, ExitCode::infeasible), x_path_(x_path) {}
  std::size_t x_path() const noexcept { return x_path_; }

 private:
  std::size_t x_path_;
};

// A test process passed where an adapted one is required is anticipative.
class NonAdaptedError : public Error {
 public:
  explicit NonAdaptedError(const std::string& what) : Error(what, ExitCode::failure) {}
};

// Linear solver could not certify its answer.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, ExitCode::failure) {}
};

}  // namespace robustam
