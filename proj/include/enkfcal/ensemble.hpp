#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace enkfcal {

using Index = Eigen::Index;

/// m members of joint (theta, eta) vectors, one per row, theta block first.
class JointEnsemble {
 public:
  JointEnsemble(Eigen::MatrixXd members, Index d_theta);
  // Concatenates per-member parameter and output rows.
  JointEnsemble(const Eigen::MatrixXd& thetas, const Eigen::MatrixXd& etas);

  Index size() const { return members_.rows(); }
  Index dim() const { return members_.cols(); }
  Index d_theta() const { return d_theta_; }
  Index d_eta() const { return members_.cols() - d_theta_; }

  const Eigen::MatrixXd& members() const { return members_; }
  auto thetas() const { return members_.leftCols(d_theta_); }
  auto etas() const { return members_.rightCols(d_eta()); }

 private:
  Eigen::MatrixXd members_;
  Index d_theta_;
};

/// Sample mean and covariance of a joint ensemble with (theta, eta) blocks.
class MomentEstimate {
 public:
  // Checks shapes, finiteness and symmetry (1e-12 relative). Positive
  // semidefiniteness is not re-verified here; see is_psd().
  MomentEstimate(Eigen::VectorXd mu, Eigen::MatrixXd sigma, Index d_theta);

  Index dim() const { return mu_.size(); }
  Index d_theta() const { return d_theta_; }
  Index d_eta() const { return mu_.size() - d_theta_; }

  const Eigen::VectorXd& mu() const { return mu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }

  auto mu_theta() const { return mu_.head(d_theta_); }
  auto mu_eta() const { return mu_.tail(d_eta()); }
  auto sigma_tt() const { return sigma_.topLeftCorner(d_theta_, d_theta_); }
  auto sigma_te() const { return sigma_.topRightCorner(d_theta_, d_eta()); }
  auto sigma_et() const { return sigma_.bottomLeftCorner(d_eta(), d_theta_); }
  auto sigma_ee() const { return sigma_.bottomRightCorner(d_eta(), d_eta()); }

  // Copy with the eta-eta block replaced, e.g. by a tapered estimate.
  MomentEstimate with_sigma_ee(const Eigen::MatrixXd& sigma_ee) const;

 private:
  Eigen::VectorXd mu_;
  Eigen::MatrixXd sigma_;
  Index d_theta_;
};

// Non-owning views of the partitioned moments. Valid while the source lives.
struct MomentBlocks {
  Eigen::Ref<const Eigen::VectorXd> mu_theta;
  Eigen::Ref<const Eigen::VectorXd> mu_eta;
  Eigen::Ref<const Eigen::MatrixXd> sigma_tt;
  Eigen::Ref<const Eigen::MatrixXd> sigma_te;
  Eigen::Ref<const Eigen::MatrixXd> sigma_et;
  Eigen::Ref<const Eigen::MatrixXd> sigma_ee;
};

MomentBlocks partition(const MomentEstimate& moments);

// Column means and the m-1 divisor sample covariance, symmetrized.
// Throws InsufficientEnsembleError when m < 2.
MomentEstimate compute_moments(const JointEnsemble& ensemble);

enum class ObservationMode { incidence, general };

/// Linear Gaussian observation y = H x + e, e ~ N(0, sigma_y).
class ObservationModel {
 public:
  // General mode: any real n x p operator.
  ObservationModel(Eigen::MatrixXd h, Eigen::VectorXd y, Eigen::MatrixXd sigma_y);

  // Incidence mode: row i selects output eta_indices[i].
  static ObservationModel incidence(const std::vector<Index>& eta_indices, Index d_theta,
                                    Index d_eta, Eigen::VectorXd y,
                                    Eigen::MatrixXd sigma_y);

  const Eigen::MatrixXd& h() const { return h_; }
  const Eigen::VectorXd& y() const { return y_; }
  const Eigen::MatrixXd& sigma_y() const { return sigma_y_; }
  ObservationMode mode() const { return mode_; }
  // Selected eta indices; empty in general mode.
  const std::vector<Index>& eta_indices() const { return eta_indices_; }

  Index size() const { return y_.size(); }
  Index state_dim() const { return h_.cols(); }

  // Same operator and data with sigma_y multiplied by `factor`.
  ObservationModel with_scaled_noise(double factor) const;

 private:
  ObservationModel() = default;
  void validate() const;

  Eigen::MatrixXd h_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd sigma_y_;
  ObservationMode mode_ = ObservationMode::general;
  std::vector<Index> eta_indices_;
};

// n x (d_theta + d_eta) selector with row i one-hot at d_theta + indices[i].
// Throws ValidationError on duplicate or out-of-range indices.
Eigen::MatrixXd build_incidence(const std::vector<Index>& eta_indices, Index d_theta,
                                Index d_eta);

}  // namespace enkfcal
