#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace enkfcal {

// Cholesky factor of a symmetric positive-definite matrix. If the first
// attempt fails, 1e-10 * trace / n is added to the diagonal and the
// factorization retried once; a second failure throws NumericalError naming
// `what`.
class SpdFactor {
 public:
  SpdFactor(const Eigen::MatrixXd& a, std::string_view what);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return llt_.solve(b); }
  double log_det() const;
  // Diagonal shift applied by the retry; zero when none was needed.
  double jitter() const { return jitter_; }
  Eigen::MatrixXd lower() const { return llt_.matrixL(); }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double jitter_ = 0.0;
};

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a);

// max |a - a'| <= rel_tol * max(1, max |a|)
bool is_symmetric(const Eigen::MatrixXd& a, double rel_tol = 1e-12);

double min_eigenvalue(const Eigen::MatrixXd& a);

// Smallest eigenvalue >= -rel_tol * max(trace, 0).
bool is_psd(const Eigen::MatrixXd& a, double rel_tol = 1e-10);

}  // namespace enkfcal
