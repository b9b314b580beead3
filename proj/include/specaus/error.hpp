#pragma once

#include <stdexcept>
#include <string>

namespace specaus {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int { kOk = 0, kValidation = 1, kNumerical = 2, kIo = 3 };

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Malformed input: bad graph, lag map, config or query.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ExitCode::kValidation, what) {}
};

/// A numerical precondition failed (instability, singular matrix, pole).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::kNumerical, what) {}
};

/// Frequency at which 1 - phi_vv(z) vanishes.
class PoleError : public NumericalError {
 public:
  explicit PoleError(const std::string& what) : NumericalError(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::kIo, what) {}
};

}  // namespace specaus
