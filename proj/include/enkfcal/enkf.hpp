#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "enkfcal/ensemble.hpp"
#include "enkfcal/forward_models.hpp"

namespace enkfcal {

/// Normal approximation to the joint (theta, eta) posterior.
struct GaussianPosterior {
  Eigen::VectorXd mu_post;
  Eigen::MatrixXd sigma_post;
  Eigen::MatrixXd kalman_gain;  // p x n
  Index d_theta = 0;

  auto mu_theta() const { return mu_post.head(d_theta); }
  auto sigma_theta() const { return sigma_post.topLeftCorner(d_theta, d_theta); }
};

// Sigma H' (H Sigma H' + Sigma_y)^{-1}.
Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& sigma_pr, const ObservationModel& obs);

// Kalman-form update: works for singular Sigma_pr (m - 1 < p).
GaussianPosterior gaussian_update(const MomentEstimate& moments,
                                  const ObservationModel& obs);

// Precision-form update, Sigma_post^{-1} = Sigma_pr^{-1} + H' Sigma_y^{-1} H.
// Requires an invertible Sigma_pr; kept as an independent cross-check.
GaussianPosterior precision_form_update(const MomentEstimate& moments,
                                        const ObservationModel& obs);

/// Perturbed-observation update of every member with the shared gain.
struct UpdatedEnsemble {
  JointEnsemble members;
  Eigen::MatrixXd perturbed_data;  // m x n, row k is y_k
  std::uint64_t seed;
};

// Member k draws y_k ~ N(y, Sigma_y) from substream (seed, k) and moves by
// K (y_k - H x_k), where K comes from compute_moments(ensemble).
UpdatedEnsemble ensemble_update(const JointEnsemble& ensemble, const ObservationModel& obs,
                                std::uint64_t seed);

/// Information fractions for splitting the likelihood; stage s sees
/// Sigma_y / w_s.
class StageSchedule {
 public:
  explicit StageSchedule(std::vector<double> weights);
  static StageSchedule even(std::size_t stages);

  std::size_t stages() const { return weights_.size(); }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

// Seed used by stage s of a multistage run. Stage 0 uses `seed` itself so a
// one-stage schedule reproduces ensemble_update exactly.
std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage);

// Runs ensemble_update once per stage. Between stages the eta block is
// recomputed by running `forward` on every updated theta.
UpdatedEnsemble multistage_update(const JointEnsemble& initial, const ObservationModel& obs,
                                  const StageSchedule& schedule,
                                  const ForwardModel& forward, std::uint64_t seed);

// As multistage_update, but the last stage returns the Gaussian
// representation of the re-run ensemble instead of perturbing it.
GaussianPosterior multistage_update_gaussian(const JointEnsemble& initial,
                                             const ObservationModel& obs,
                                             const StageSchedule& schedule,
                                             const ForwardModel& forward,
                                             std::uint64_t seed);

// Maps the theta marginal of a stage posterior to the next stage's joint prior
// moments (for example LinearForward::joint_moments).
using MomentPropagator =
    std::function<MomentEstimate(const Eigen::VectorXd&, const Eigen::MatrixXd&)>;

// Moment-only multistage: Gaussian updates with exact propagation between
// stages instead of ensemble re-runs.
GaussianPosterior multistage_moment_update(const MomentEstimate& prior,
                                           const ObservationModel& obs,
                                           const StageSchedule& schedule,
                                           const MomentPropagator& propagate);

}  // namespace enkfcal
