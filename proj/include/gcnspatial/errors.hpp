#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcnspatial {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or configuration (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented schema or invariant (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written (exit code 1).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss (exit code 4).
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Two points share coordinates so a nearest-neighbour scale collapses to 0.
class DegenerateScaleError : public DataError {
 public:
  DegenerateScaleError(std::size_t node, const std::string& what)
      : DataError(what), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

/// A power-law weight was requested at zero distance.
class DegenerateDistanceError : public DataError {
 public:
  DegenerateDistanceError(std::size_t i, std::size_t j, const std::string& what)
      : DataError(what), i_(i), j_(j) {}
  std::size_t first() const noexcept { return i_; }
  std::size_t second() const noexcept { return j_; }

 private:
  std::size_t i_;
  std::size_t j_;
};

/// Vector or matrix sizes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace gcnspatial
