#include "enkfcal/enkf.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "enkfcal/errors.hpp"
#include "enkfcal/linalg.hpp"
#include "enkfcal/parallel.hpp"
#include "enkfcal/random.hpp"

namespace enkfcal {
namespace {

void check_dims(Index state_dim, const ObservationModel& obs) {
  if (obs.state_dim() != state_dim) {
    throw ValidationError("observation operator has " + std::to_string(obs.state_dim()) +
                          " columns but the joint state has length " +
                          std::to_string(state_dim));
  }
}

}  // namespace

Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& sigma_pr, const ObservationModel& obs) {
  check_dims(sigma_pr.rows(), obs);
  const Eigen::MatrixXd h_sigma = obs.h() * sigma_pr;  // n x p
  const Eigen::MatrixXd innovation =
      symmetrize(h_sigma * obs.h().transpose() + obs.sigma_y());
  const SpdFactor factor(innovation, "innovation covariance H Sigma H' + Sigma_y");
  return factor.solve(h_sigma).transpose();
}

GaussianPosterior gaussian_update(const MomentEstimate& moments,
                                  const ObservationModel& obs) {
  check_dims(moments.dim(), obs);
  const Eigen::MatrixXd& sigma = moments.sigma();
  Eigen::MatrixXd gain = kalman_gain(sigma, obs);
  GaussianPosterior post;
  post.mu_post = moments.mu() + gain * (obs.y() - obs.h() * moments.mu());
  post.sigma_post = symmetrize(sigma - gain * (obs.h() * sigma));
  post.kalman_gain = std::move(gain);
  post.d_theta = moments.d_theta();
  return post;
}

GaussianPosterior precision_form_update(const MomentEstimate& moments,
                                        const ObservationModel& obs) {
  check_dims(moments.dim(), obs);
  const Eigen::LLT<Eigen::MatrixXd> prior(moments.sigma());
  if (prior.info() != Eigen::Success) {
    throw NumericalError("precision form needs an invertible prior covariance");
  }
  const Eigen::LLT<Eigen::MatrixXd> noise(obs.sigma_y());
  const Eigen::MatrixXd& h = obs.h();
  const Index p = moments.dim();
  const Eigen::MatrixXd prior_precision = prior.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p)));
  const Eigen::MatrixXd post_precision =
      symmetrize(prior_precision + h.transpose() * noise.solve(h));
  const Eigen::LLT<Eigen::MatrixXd> post(post_precision);
  if (post.info() != Eigen::Success) {
    throw NumericalError("posterior precision is not positive definite");
  }
  GaussianPosterior out;
  out.sigma_post = symmetrize(post.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p))));
  out.mu_post = post.solve(prior.solve(moments.mu()) +
                           h.transpose() * noise.solve(obs.y()));
  out.kalman_gain = out.sigma_post * h.transpose() *
                    noise.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(obs.size(), obs.size())));
  out.d_theta = moments.d_theta();
  return out;
}

UpdatedEnsemble ensemble_update(const JointEnsemble& ensemble, const ObservationModel& obs,
                                std::uint64_t seed) {
  check_dims(ensemble.dim(), obs);
  const MomentEstimate moments = compute_moments(ensemble);
  const Eigen::MatrixXd gain = kalman_gain(moments.sigma(), obs);
  const Eigen::MatrixXd noise_factor = SpdFactor(obs.sigma_y(), "Sigma_y").lower();

  const Index m = ensemble.size();
  const Index n = obs.size();
  Eigen::MatrixXd perturbed(m, n);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t k) {
    RandomStream rng(seed, k);
    perturbed.row(static_cast<Index>(k)) =
        (obs.y() + noise_factor * rng.normal_vector(n)).transpose();
  });

  const Eigen::MatrixXd& x = ensemble.members();
  const Eigen::MatrixXd innovations = perturbed - x * obs.h().transpose();  // m x n
  Eigen::MatrixXd updated = x + innovations * gain.transpose();
  return {JointEnsemble(std::move(updated), ensemble.d_theta()), std::move(perturbed),
          seed};
}

StageSchedule::StageSchedule(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw ValidationError("stage schedule needs at least one stage");
  for (double w : weights_) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ValidationError("stage weights must be positive and finite");
    }
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) {
    throw ValidationError("stage weights must sum to 1 (got " + std::to_string(total) + ")");
  }
}

StageSchedule StageSchedule::even(std::size_t stages) {
  if (stages == 0) throw ValidationError("stage schedule needs at least one stage");
  std::vector<double> w(stages, 1.0 / static_cast<double>(stages));
  // Put the rounding residue on the last stage so the sum is exactly 1.
  w.back() = 1.0 - std::accumulate(w.begin(), w.end() - 1, 0.0);
  return StageSchedule(std::move(w));
}

std::uint64_t stage_seed(std::uint64_t seed, std::size_t stage) {
  return stage == 0 ? seed : derive_seed(seed, 0x5747'0000ULL + stage);
}

namespace {

void check_forward(const JointEnsemble& ensemble, const ForwardModel& forward) {
  if (forward.d_theta() != ensemble.d_theta() || forward.d_eta() != ensemble.d_eta()) {
    throw ValidationError("forward model dimensions do not match the ensemble layout");
  }
}

JointEnsemble rerun(const JointEnsemble& ensemble, const ForwardModel& forward) {
  const Eigen::MatrixXd thetas = ensemble.thetas();
  return build_ensemble(forward, thetas);
}

// Runs every stage except the last; returns the re-run ensemble the last
// stage starts from.
JointEnsemble leading_stages(const JointEnsemble& initial, const ObservationModel& obs,
                             const StageSchedule& schedule, const ForwardModel& forward,
                             std::uint64_t seed) {
  check_forward(initial, forward);
  JointEnsemble current = initial;
  for (std::size_t s = 0; s + 1 < schedule.stages(); ++s) {
    const ObservationModel stage_obs = obs.with_scaled_noise(1.0 / schedule.weights()[s]);
    UpdatedEnsemble updated = ensemble_update(current, stage_obs, stage_seed(seed, s));
    current = rerun(updated.members, forward);
  }
  return current;
}

}  // namespace

UpdatedEnsemble multistage_update(const JointEnsemble& initial, const ObservationModel& obs,
                                  const StageSchedule& schedule,
                                  const ForwardModel& forward, std::uint64_t seed) {
  const JointEnsemble last = leading_stages(initial, obs, schedule, forward, seed);
  const std::size_t s = schedule.stages() - 1;
  UpdatedEnsemble out = ensemble_update(
      last, obs.with_scaled_noise(1.0 / schedule.weights()[s]), stage_seed(seed, s));
  out.seed = seed;
  return out;
}

GaussianPosterior multistage_update_gaussian(const JointEnsemble& initial,
                                             const ObservationModel& obs,
                                             const StageSchedule& schedule,
                                             const ForwardModel& forward,
                                             std::uint64_t seed) {
  const JointEnsemble last = leading_stages(initial, obs, schedule, forward, seed);
  const std::size_t s = schedule.stages() - 1;
  return gaussian_update(compute_moments(last),
                         obs.with_scaled_noise(1.0 / schedule.weights()[s]));
}

GaussianPosterior multistage_moment_update(const MomentEstimate& prior,
                                           const ObservationModel& obs,
                                           const StageSchedule& schedule,
                                           const MomentPropagator& propagate) {
  MomentEstimate current = prior;
  GaussianPosterior post;
  for (std::size_t s = 0; s < schedule.stages(); ++s) {
    post = gaussian_update(current, obs.with_scaled_noise(1.0 / schedule.weights()[s]));
    if (s + 1 < schedule.stages()) {
      current = propagate(post.mu_theta(), post.sigma_theta());
      if (current.dim() != prior.dim() || current.d_theta() != prior.d_theta()) {
        throw ValidationError("moment propagator changed the joint layout");
      }
    }
  }
  return post;
}

}  // namespace enkfcal
