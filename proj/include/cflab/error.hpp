#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cflab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed caller input (bad option, impossible parameter).
class UsageError : public Error {
public:
  using Error::Error;
};

/// Inconsistent or malformed data: duplicate votes, out-of-scale values,
/// parse failures, exhausted training sets.
class DataError : public Error {
public:
  using Error::Error;
};

/// A statistic was requested on a sample that does not define it.
class UndefinedStatistic : public DataError {
public:
  using DataError::DataError;
};

/// An iterative procedure stopped without meeting its tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::vector<double> achieved)
      : Error(what), achieved_(std::move(achieved)) {}

  const std::vector<double>& achieved() const noexcept { return achieved_; }

private:
  std::vector<double> achieved_;
};

}  // namespace cflab
