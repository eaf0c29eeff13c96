#include "enkfcal/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enkfcal/errors.hpp"

namespace enkfcal {

SpdFactor::SpdFactor(const Eigen::MatrixXd& a, std::string_view what) {
  if (a.rows() != a.cols()) {
    throw ValidationError(std::string(what) + ": matrix is not square");
  }
  if (!a.allFinite()) {
    throw NumericalError(std::string(what) + ": matrix has non-finite entries");
  }
  llt_.compute(a);
  if (llt_.info() == Eigen::Success) return;

  const auto n = static_cast<double>(std::max<Eigen::Index>(a.rows(), 1));
  jitter_ = 1e-10 * std::abs(a.trace()) / n;
  Eigen::MatrixXd shifted = a;
  shifted.diagonal().array() += jitter_;
  llt_.compute(shifted);
  if (llt_.info() != Eigen::Success) {
    throw NumericalError(std::string(what) +
                         ": matrix is not positive definite after jitter retry");
  }
}

double SpdFactor::log_det() const {
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

bool is_symmetric(const Eigen::MatrixXd& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool is_psd(const Eigen::MatrixXd& a, double rel_tol) {
  if (a.size() == 0) return true;
  return min_eigenvalue(a) >= -rel_tol * std::max(a.trace(), 0.0);
}

}  // namespace enkfcal
