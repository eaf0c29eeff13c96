#include <doctest.h>

#include "enkfcal/emulator.hpp"
#include "enkfcal/enkf.hpp"
#include "enkfcal/errors.hpp"
#include "enkfcal/forward_models.hpp"
#include "enkfcal/linalg.hpp"
#include "enkfcal/parallel.hpp"
#include "enkfcal/random.hpp"
#include "support.hpp"

using namespace enkfcal;

namespace {

ObservationModel scalar_obs(double y, double var, Index d_theta = 1, Index d_eta = 1) {
  return ObservationModel::incidence({0}, d_theta, d_eta, Eigen::VectorXd::Constant(1, y),
                                     Eigen::MatrixXd::Constant(1, 1, var));
}

MomentEstimate moments2(double c) {
  Eigen::MatrixXd s(2, 2);
  s << 1, c, c, 1;
  return MomentEstimate(Eigen::VectorXd::Zero(2), s, 1);
}

// Closed-form 2x2 update for scalar observation of the second coordinate.
void hand_update(const Eigen::Matrix2d& s, double y, double r, Eigen::Vector2d& mu,
                 Eigen::Matrix2d& post) {
  const double denom = s(1, 1) + r;
  const Eigen::Vector2d k(s(0, 1) / denom, s(1, 1) / denom);
  mu = k * y;
  post = s - k * s.row(1);
}

}  // namespace

TEST_CASE("linear toy conjugate posterior") {
  const GaussianPosterior post = gaussian_update(moments2(1.0), scalar_obs(0.8, 0.01));
  CHECK(post.mu_theta()(0) == doctest::Approx(80.0 / 101.0).epsilon(1e-12));
  CHECK(post.sigma_theta()(0, 0) == doctest::Approx(1.0 / 101.0).epsilon(1e-10));
  CHECK(post.kalman_gain.rows() == 2);
  CHECK(post.kalman_gain.cols() == 1);
}

TEST_CASE("zero observation operator leaves the prior unchanged") {
  const MomentEstimate prior = moments2(0.4);
  const ObservationModel obs(Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Constant(1, 3.0),
                             Eigen::MatrixXd::Identity(1, 1));
  const GaussianPosterior post = gaussian_update(prior, obs);
  CHECK(post.mu_post == prior.mu());
  CHECK(post.sigma_post == prior.sigma());
}

TEST_CASE("correlated 2x2 example against hand arithmetic") {
  const GaussianPosterior post = gaussian_update(moments2(0.9), scalar_obs(0.8, 0.01));
  Eigen::Matrix2d s;
  s << 1, 0.9, 0.9, 1;
  Eigen::Vector2d mu;
  Eigen::Matrix2d cov;
  hand_update(s, 0.8, 0.01, mu, cov);
  CHECK(testing::max_abs_diff(post.mu_post, mu) < 1e-14);
  CHECK(testing::max_abs_diff(post.sigma_post, cov) < 1e-14);
  CHECK(post.mu_post(0) == doctest::Approx(0.71287).epsilon(1e-5));
  CHECK(post.mu_post(1) == doctest::Approx(0.79208).epsilon(1e-5));
  CHECK(post.sigma_post(0, 0) == doctest::Approx(0.19802).epsilon(1e-4));
  CHECK(post.sigma_post(0, 1) == doctest::Approx(0.00891).epsilon(1e-3));
  CHECK(post.sigma_post(1, 1) == doctest::Approx(0.00990).epsilon(1e-3));
}

TEST_CASE("non-SPD innovation covariance is a numerical failure") {
  Eigen::MatrixXd s(2, 2);
  s << 1, 0, 0, -5;
  const MomentEstimate prior(Eigen::VectorXd::Zero(2), s, 1);
  CHECK_THROWS_AS(gaussian_update(prior, scalar_obs(0.0, 1.0)), NumericalError);
}

TEST_CASE("Kalman and precision forms agree") {
  for (unsigned seed = 0; seed < 8; ++seed) {
    const Eigen::MatrixXd x = testing::gaussian_rows(
        40, Eigen::VectorXd::Zero(6), Eigen::MatrixXd::Identity(6, 6), seed);
    const MomentEstimate prior = compute_moments(JointEnsemble(x, 2));
    Eigen::MatrixXd sy(3, 3);
    sy << 0.5, 0.1, 0, 0.1, 0.4, 0.05, 0, 0.05, 0.3;
    const ObservationModel obs = ObservationModel::incidence(
        {0, 2, 3}, 2, 4, Eigen::VectorXd::LinSpaced(3, -1, 1), sy);
    const GaussianPosterior a = gaussian_update(prior, obs);
    const GaussianPosterior b = precision_form_update(prior, obs);
    const double scale = prior.sigma().cwiseAbs().maxCoeff();
    CHECK(testing::max_abs_diff(a.mu_post, b.mu_post) < 1e-8 * scale);
    CHECK(testing::max_abs_diff(a.sigma_post, b.sigma_post) < 1e-8 * scale);
    // Observing never adds variance.
    CHECK(min_eigenvalue(prior.sigma() - a.sigma_post) >= -1e-10 * prior.sigma().trace());
    CHECK(is_psd(a.sigma_post));
  }
}

TEST_CASE("huge observation noise leaves members in place") {
  const Eigen::MatrixXd x = testing::gaussian_rows(
      50, Eigen::VectorXd::Zero(2), moments2(0.8).sigma(), 1);
  const JointEnsemble ens(x, 1);
  const UpdatedEnsemble up = ensemble_update(ens, scalar_obs(0.8, 0.01 * 1e9), 3);
  const double rel = (up.members.members() - x).cwiseAbs().maxCoeff() / x.cwiseAbs().maxCoeff();
  CHECK(rel < 1e-3);
}

TEST_CASE("ensemble update matches Gaussian moments at large m") {
  Eigen::MatrixXd cov = moments2(1.0).sigma();
  cov.diagonal().array() += 1e-6;
  const GaussianSampler prior(Eigen::VectorXd::Zero(2), cov);
  const JointEnsemble ens(prior.draw_rows(100000, 21), 1);
  const ObservationModel obs = scalar_obs(0.8, 0.01);
  const UpdatedEnsemble up = ensemble_update(ens, obs, 22);
  const GaussianPosterior g = gaussian_update(compute_moments(ens), obs);
  Eigen::VectorXd m;
  Eigen::MatrixXd s;
  testing::naive_moments(up.members.members(), m, s);
  CHECK(std::abs(m(0) / g.mu_post(0) - 1.0) < 0.02);
  CHECK(std::abs(s(0, 0) / g.sigma_post(0, 0) - 1.0) < 0.02);
  CHECK(std::abs(m(0) / (80.0 / 101.0) - 1.0) < 0.02);
  CHECK(std::abs(s(0, 0) / (1.0 / 101.0) - 1.0) < 0.02);
  CHECK(up.members.size() == 100000);
  CHECK(up.perturbed_data.rows() == 100000);
}

TEST_CASE("averaging small-ensemble updates over seeds recovers the Gaussian mean") {
  const GaussianSampler prior(Eigen::VectorXd::Zero(2), moments2(0.7).sigma());
  const ObservationModel obs = scalar_obs(0.8, 0.05);
  const JointEnsemble ens(prior.draw_rows(100, 5), 1);
  const GaussianPosterior g = gaussian_update(compute_moments(ens), obs);
  double sum = 0.0;
  const int runs = 1000;
  for (int s = 0; s < runs; ++s) sum += ensemble_update(ens, obs, 1000 + s).members.members().col(0).mean();
  CHECK(std::abs(sum / runs / g.mu_post(0) - 1.0) < 0.02);
}

TEST_CASE("ensemble update is deterministic and thread independent") {
  const Eigen::MatrixXd x = testing::gaussian_rows(
      3, Eigen::VectorXd::Zero(2), moments2(0.5).sigma(), 9);
  const JointEnsemble ens(x, 1);
  const ObservationModel obs = scalar_obs(0.8, 0.01);
  const UpdatedEnsemble a = ensemble_update(ens, obs, 77);
  const UpdatedEnsemble b = ensemble_update(ens, obs, 77);
  CHECK(a.members.members() == b.members.members());
  CHECK(a.perturbed_data == b.perturbed_data);
  const Eigen::MatrixXd big = testing::gaussian_rows(
      500, Eigen::VectorXd::Zero(2), moments2(0.5).sigma(), 9);
  const UpdatedEnsemble seq = ensemble_update(JointEnsemble(big, 1), obs, 5);
  const std::size_t saved = max_threads();
  set_max_threads(4);
  const UpdatedEnsemble par = ensemble_update(JointEnsemble(big, 1), obs, 5);
  set_max_threads(saved);
  CHECK(seq.members.members() == par.members.members());
}

TEST_CASE("stage schedules") {
  CHECK(StageSchedule::even(2).weights() == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(StageSchedule({0.5, 0.4}), ValidationError);
  CHECK_THROWS_AS(StageSchedule({1.5, -0.5}), ValidationError);
  CHECK_THROWS_AS(StageSchedule({}), ValidationError);
  CHECK_NOTHROW(StageSchedule({0.25, 0.75}));
  CHECK(stage_seed(9, 0) == 9);
  CHECK(stage_seed(9, 1) != 9);
}

TEST_CASE("one-stage schedule reproduces ensemble_update") {
  const Eigen::MatrixXd thetas = testing::gaussian_rows(
      50, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1), 2);
  const JointEnsemble ens = build_ensemble(toy_model(), thetas);
  const ObservationModel obs = scalar_obs(0.8, 0.01);
  const UpdatedEnsemble a = multistage_update(ens, obs, StageSchedule({1.0}), toy_model(), 4);
  const UpdatedEnsemble b = ensemble_update(ens, obs, 4);
  CHECK(a.members.members() == b.members.members());
}

TEST_CASE("exact-moment two-stage composition equals one full update") {
  const LinearForward f(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  const MomentEstimate prior =
      f.joint_moments(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  const ObservationModel obs = scalar_obs(0.8, 0.01);
  const GaussianPosterior two = multistage_moment_update(
      prior, obs, StageSchedule::even(2),
      [&](const Eigen::VectorXd& m, const Eigen::MatrixXd& s) { return f.joint_moments(m, s); });
  const GaussianPosterior one = gaussian_update(prior, obs);
  CHECK(testing::max_abs_diff(two.mu_post, one.mu_post) < 1e-10);
  CHECK(testing::max_abs_diff(two.sigma_post, one.sigma_post) < 1e-10);
}

TEST_CASE("two-stage toy ensemble lands near the exact posterior mean") {
  const DensityTable exact =
      quadrature_posterior(toy_forward, 0.8, 0.1, 0.0, 1.0, default_quadrature_grid());
  const GaussianSampler prior(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  const JointEnsemble ens = build_ensemble(toy_model(), prior.draw_rows(200, 12346));
  const UpdatedEnsemble up = multistage_update(ens, scalar_obs(0.8, 0.01),
                                               StageSchedule::even(2), toy_model(), 12345);
  const double se = std::sqrt(exact.variance() / 200.0);
  const double mean = up.members.members().col(0).mean();
  CHECK(std::abs(mean - exact.mean()) < 3.0 * se);
  const GaussianPosterior g = multistage_update_gaussian(
      ens, scalar_obs(0.8, 0.01), StageSchedule::even(2), toy_model(), 12345);
  CHECK(g.mu_post.allFinite());
}

TEST_CASE("forward failure during a stage reports the member") {
  const ForwardModel fragile(
      [](const Eigen::VectorXd& t) -> Eigen::VectorXd {
        if (t(0) > 0.3) throw std::runtime_error("blow-up");
        return Eigen::VectorXd::Constant(1, toy_forward(t(0)));
      },
      1, 1);
  Eigen::MatrixXd thetas(4, 1);
  thetas << -2, -1.5, -1, -0.5;
  const JointEnsemble ens = build_ensemble(fragile, thetas);
  CHECK_THROWS_AS(multistage_update(ens, scalar_obs(0.9, 1e-4), StageSchedule::even(2),
                                    fragile, 1),
                  ForwardModelError);
}
