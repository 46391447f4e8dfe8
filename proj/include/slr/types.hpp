#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace slr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Sorted (ascending) set of 0-based indices, e.g. a per-frame outlier support.
using IndexSet = std::vector<Index>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class RankDeficientError : public Error {
 public:
  using Error::Error;
};

class InvalidRotationError : public Error {
 public:
  using Error::Error;
};

class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

class IllConditionedSupportError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class IterationLimitError : public Error {
 public:
  IterationLimitError(const std::string& msg, int iterations, double residual)
      : Error(msg), iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
};

/// Thrown by matrix-completion least squares when a row or column has too few
/// observed entries to determine its factor.
class UnderdeterminedRowError : public Error {
 public:
  UnderdeterminedRowError(const std::string& msg, Index index, bool is_row)
      : Error(msg), index(index), is_row(is_row) {}
  Index index;
  bool is_row;
};

}  // namespace slr
