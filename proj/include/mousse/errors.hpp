#pragma once

#include <stdexcept>
#include <string>

namespace mousse {

// Base class for every error raised by the library. Recoverable conditions
// (a sample that cannot be projected, a declined split) are separate types so
// callers can catch them without swallowing genuine failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// |Omega| < d, or the restricted Gram matrix is numerically singular.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class DepthLimit : public Error {
 public:
  using Error::Error;
};

class SiblingNotLeaf : public Error {
 public:
  using Error::Error;
};

class NotCalibrated : public Error {
 public:
  using Error::Error;
};

class DegenerateBaseline : public Error {
 public:
  using Error::Error;
};

class NoBracket : public Error {
 public:
  using Error::Error;
};

// Malformed configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace mousse
