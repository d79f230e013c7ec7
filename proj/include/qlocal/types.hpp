#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qlocal {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor, std::ptrdiff_t>;
using Index = Eigen::Index;

inline constexpr cplx kI{0.0, 1.0};

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operator support is not contained in the region it is used on.
class SupportError : public Error {
 public:
  using Error::Error;
};

/// The sector gap fell below tolerance at path parameter `s`.
class GapClosed : public Error {
 public:
  GapClosed(double s, double gap)
      : Error("gap closed at s=" + std::to_string(s) + " (gap " + std::to_string(gap) + ")"),
        s_(s),
        gap_(gap) {}
  double s() const { return s_; }
  double gap() const { return gap_; }

 private:
  double s_;
  double gap_;
};

/// Consecutive sector bases are too far apart for the step construction.
class StepTooLarge : public Error {
 public:
  using Error::Error;
};

/// An iterative routine stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double achieved)
      : Error(what + " (achieved " + std::to_string(achieved) + ")"), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A probe or request lies outside the regime where a check is defined.
class NotApplicable : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qlocal
