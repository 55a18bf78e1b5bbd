#pragma once

#include <stdexcept>
#include <string>

namespace emgtl {

// Exception hierarchy. The CLI maps each family onto a process exit code.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, invalid configuration, violated preconditions.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (files, sidecars, shapes).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in a computation.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

/// A statistic is undefined for the given sample (zero variance, all-zero differences).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

}  // namespace emgtl
