#include "enkfcal/ensemble.hpp"

#include <string>
#include <unordered_set>

#include "enkfcal/errors.hpp"
#include "enkfcal/linalg.hpp"

namespace enkfcal {

JointEnsemble::JointEnsemble(Eigen::MatrixXd members, Index d_theta)
    : members_(std::move(members)), d_theta_(d_theta) {
  if (members_.rows() < 2) {
    throw InsufficientEnsembleError("ensemble needs at least 2 members, got " +
                                    std::to_string(members_.rows()));
  }
  if (d_theta_ < 1 || d_theta_ >= members_.cols()) {
    throw ValidationError("ensemble needs d_theta >= 1 and d_eta >= 1 (p = " +
                          std::to_string(members_.cols()) +
                          ", d_theta = " + std::to_string(d_theta_) + ")");
  }
  if (!members_.allFinite()) {
    throw ValidationError("ensemble contains non-finite entries");
  }
}

JointEnsemble::JointEnsemble(const Eigen::MatrixXd& thetas, const Eigen::MatrixXd& etas)
    : JointEnsemble(
          [&] {
            if (thetas.rows() != etas.rows()) {
              throw ValidationError("parameter and output row counts differ");
            }
            Eigen::MatrixXd joint(thetas.rows(), thetas.cols() + etas.cols());
            joint << thetas, etas;
            return joint;
          }(),
          thetas.cols()) {}

MomentEstimate::MomentEstimate(Eigen::VectorXd mu, Eigen::MatrixXd sigma, Index d_theta)
    : mu_(std::move(mu)), sigma_(std::move(sigma)), d_theta_(d_theta) {
  if (sigma_.rows() != mu_.size() || sigma_.cols() != mu_.size()) {
    throw ValidationError("moment covariance must be p x p with p = mean length");
  }
  if (d_theta_ < 0 || d_theta_ > mu_.size()) {
    throw ValidationError("d_theta out of range for moment estimate");
  }
  if (!mu_.allFinite() || !sigma_.allFinite()) {
    throw ValidationError("moment estimate has non-finite entries");
  }
  if (!is_symmetric(sigma_, 1e-12)) {
    throw ValidationError("moment covariance is not symmetric");
  }
}

MomentEstimate MomentEstimate::with_sigma_ee(const Eigen::MatrixXd& sigma_ee) const {
  if (sigma_ee.rows() != d_eta() || sigma_ee.cols() != d_eta()) {
    throw ValidationError("replacement eta block has the wrong shape");
  }
  Eigen::MatrixXd sigma = sigma_;
  sigma.bottomRightCorner(d_eta(), d_eta()) = sigma_ee;
  return {mu_, std::move(sigma), d_theta_};
}

MomentBlocks partition(const MomentEstimate& moments) {
  return {moments.mu_theta(), moments.mu_eta(),  moments.sigma_tt(),
          moments.sigma_te(), moments.sigma_et(), moments.sigma_ee()};
}

MomentEstimate compute_moments(const JointEnsemble& ensemble) {
  const Index m = ensemble.size();
  if (m < 2) {
    throw InsufficientEnsembleError("compute_moments needs at least 2 members");
  }
  const Eigen::MatrixXd& x = ensemble.members();
  Eigen::VectorXd mu = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  Eigen::MatrixXd sigma = (centered.transpose() * centered) / static_cast<double>(m - 1);
  return {std::move(mu), symmetrize(sigma), ensemble.d_theta()};
}

Eigen::MatrixXd build_incidence(const std::vector<Index>& eta_indices, Index d_theta,
                                Index d_eta) {
  if (d_theta < 0 || d_eta < 1) {
    throw ValidationError("build_incidence: invalid block dimensions");
  }
  std::unordered_set<Index> seen;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Index>(eta_indices.size()),
                                            d_theta + d_eta);
  for (std::size_t i = 0; i < eta_indices.size(); ++i) {
    const Index j = eta_indices[i];
    if (j < 0 || j >= d_eta) {
      throw ValidationError("build_incidence: index " + std::to_string(j) +
                            " outside [0, " + std::to_string(d_eta) + ")");
    }
    if (!seen.insert(j).second) {
      throw ValidationError("build_incidence: duplicate index " + std::to_string(j));
    }
    h(static_cast<Index>(i), d_theta + j) = 1.0;
  }
  return h;
}

ObservationModel::ObservationModel(Eigen::MatrixXd h, Eigen::VectorXd y,
                                   Eigen::MatrixXd sigma_y)
    : h_(std::move(h)), y_(std::move(y)), sigma_y_(std::move(sigma_y)) {
  validate();
}

ObservationModel ObservationModel::incidence(const std::vector<Index>& eta_indices,
                                             Index d_theta, Index d_eta,
                                             Eigen::VectorXd y, Eigen::MatrixXd sigma_y) {
  ObservationModel obs;
  obs.h_ = build_incidence(eta_indices, d_theta, d_eta);
  obs.y_ = std::move(y);
  obs.sigma_y_ = std::move(sigma_y);
  obs.mode_ = ObservationMode::incidence;
  obs.eta_indices_ = eta_indices;
  obs.validate();
  return obs;
}

ObservationModel ObservationModel::with_scaled_noise(double factor) const {
  if (!(factor > 0.0)) {
    throw ValidationError("observation noise scale must be positive");
  }
  ObservationModel scaled = *this;
  scaled.sigma_y_ *= factor;
  return scaled;
}

void ObservationModel::validate() const {
  const Index n = y_.size();
  if (n < 1) throw ValidationError("observation vector is empty");
  if (h_.rows() != n) {
    throw ValidationError("observation operator has " + std::to_string(h_.rows()) +
                          " rows but y has length " + std::to_string(n));
  }
  if (sigma_y_.rows() != n || sigma_y_.cols() != n) {
    throw ValidationError("sigma_y must be n x n with n = length of y");
  }
  if (!h_.allFinite() || !y_.allFinite() || !sigma_y_.allFinite()) {
    throw ValidationError("observation model has non-finite entries");
  }
  if (!is_symmetric(sigma_y_, 1e-12)) {
    throw ValidationError("sigma_y is not symmetric");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(sigma_y_).info() != Eigen::Success) {
    throw ValidationError("sigma_y is not positive definite");
  }
  if (mode_ == ObservationMode::incidence) {
    for (Index i = 0; i < n; ++i) {
      const auto row = h_.row(i);
      if ((row.array() == 1.0).count() != 1 || (row.array() != 0.0).count() != 1) {
        throw ValidationError("incidence row " + std::to_string(i) +
                              " is not one-hot");
      }
    }
  }
}

}  // namespace enkfcal
