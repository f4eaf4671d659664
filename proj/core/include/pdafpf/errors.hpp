#pragma once

#include <stdexcept>
#include <string>

namespace pdafpf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario configuration or violated precondition on an input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A computation left its numerical domain (non-finite state, lost PSD,
/// degenerate belief, stiff update that could not be resolved).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Process exit codes of the command line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kFailure = 1,
  kConfig = 2,
  kNumerical = 3,
  kIo = 4,
};

}  // namespace pdafpf
