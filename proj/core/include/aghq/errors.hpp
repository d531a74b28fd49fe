#pragma once

#include <stdexcept>
#include <string>

namespace aghq {

// Base class for every failure raised by the library. The subclasses map
// one-to-one onto CLI exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Outer optimization did not converge, or an evaluation budget ran out.
class OptimizerError : public Error {
 public:
  using Error::Error;
};

// A curvature matrix (inner or outer) is not positive definite.
class CurvatureError : public Error {
 public:
  using Error::Error;
};

// Invalid user input: bad levels, bad model configuration, bad flags.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A required file is missing or unreadable.
class ArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace aghq
