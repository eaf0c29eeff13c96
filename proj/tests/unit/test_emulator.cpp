#include <doctest.h>

#include <limits>

#include "enkfcal/emulator.hpp"
#include "enkfcal/enkf.hpp"
#include "enkfcal/errors.hpp"
#include "enkfcal/forward_models.hpp"
#include "enkfcal/random.hpp"
#include "support.hpp"

using namespace enkfcal;

namespace {

DesignRuns toy_runs(const std::vector<double>& thetas) {
  DesignRuns runs;
  for (double t : thetas) {
    runs.theta_design.push_back(t);
    runs.eta_design.push_back(toy_forward(t));
  }
  return runs;
}

// Plain 1-d trapezoid mean/variance oracle.
void trapezoid_moments(const std::vector<double>& x, const std::vector<double>& f, double& mean,
                       double& var) {
  double z = 0, s1 = 0, s2 = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = x[i] - x[i - 1];
    z += 0.5 * h * (f[i] + f[i - 1]);
    s1 += 0.5 * h * (x[i] * f[i] + x[i - 1] * f[i - 1]);
    s2 += 0.5 * h * (x[i] * x[i] * f[i] + x[i - 1] * x[i - 1] * f[i - 1]);
  }
  mean = s1 / z;
  var = s2 / z - mean * mean;
}

}  // namespace

TEST_CASE("GP interpolates its design at zero nugget") {
  const GpConfig cfg{0.5, 0.1, 1.0, 0.0};
  const DesignRuns runs = toy_runs({-2.0, -2.0 / 3, 2.0 / 3, 2.0});
  for (std::size_t j = 0; j < runs.theta_design.size(); ++j) {
    const GpPrediction p = gp_condition(cfg, runs, runs.theta_design[j]);
    CHECK(std::abs(p.mean - runs.eta_design[j]) < 1e-8);
    CHECK(std::abs(p.variance) < 1e-8);
  }
}

TEST_CASE("one-run GP by hand") {
  const GpConfig cfg{0.0, 1.0, 1.3, 0.0};
  DesignRuns runs{{0.0}, {1.0}};
  const GpPrediction p = gp_condition(cfg, runs, 1.3);
  CHECK(p.mean == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(p.variance == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("GP config and design validation") {
  CHECK_THROWS_AS(GpEmulator(GpConfig{0, -1, 1, 0}, toy_runs({0})), ValidationError);
  CHECK_THROWS_AS(GpEmulator(GpConfig{0, 1, 0, 0}, toy_runs({0})), ValidationError);
  CHECK_THROWS_AS(GpEmulator(GpConfig{0, 1, 1, 0}, toy_runs({0, 0})), ValidationError);
  CHECK_NOTHROW(GpEmulator(GpConfig{0, 1, 1, 1e-3}, toy_runs({0, 0})));
  DesignRuns uneven{{0.0, 1.0}, {0.5}};
  CHECK_THROWS_AS(GpEmulator(GpConfig{}, uneven), ValidationError);
}

TEST_CASE("GP variance does not grow when a run is added") {
  RandomStream rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pts;
    for (int i = 0; i < 5; ++i) pts.push_back(-3.0 + 6.0 * rng.uniform());
    const GpConfig cfg{0.0, 1.0, 0.8, 1e-10};
    const GpEmulator small(cfg, toy_runs(pts));
    pts.push_back(-3.0 + 6.0 * rng.uniform());
    const GpEmulator big(cfg, toy_runs(pts));
    for (double t = -4.0; t <= 4.0; t += 0.1) {
      CHECK(big.predict(t).variance <= small.predict(t).variance + 1e-8);
      CHECK(big.predict(t).variance >= -1e-10);
    }
  }
}

TEST_CASE("four-run GP posterior concentrates where the emulator matches y") {
  const GpConfig cfg{0.5, 0.1, 1.0, 0.0};
  const DesignRuns runs = toy_runs({-2.0, -2.0 / 3, 2.0 / 3, 2.0});
  const auto grid = default_quadrature_grid();
  const DensityTable post = gp_posterior_density(0.8, 0.1, cfg, runs, 1.0, grid);
  CHECK(std::abs(post.integral() - 1.0) < 1e-6);
  const GpEmulator gp(cfg, runs);
  // Band where |mu - y| is within two predictive sds.
  double band_mass = 0.0;
  const auto& g = post.grid();
  const auto& d = post.density();
  for (std::size_t i = 1; i < g.size(); ++i) {
    const auto p = gp.predict(0.5 * (g[i] + g[i - 1]));
    if (std::abs(p.mean - 0.8) <= 2.0 * std::sqrt(p.variance + 0.01)) {
      band_mass += 0.5 * (g[i] - g[i - 1]) * (d[i] + d[i - 1]);
    }
  }
  CHECK(band_mass > 0.9);
}

TEST_CASE("flat likelihood recovers the prior") {
  const auto grid = linspace(-6, 6, 20001);
  const double inf = std::numeric_limits<double>::infinity();
  const DensityTable gp =
      gp_posterior_density(0.8, inf, GpConfig{0.5, 0.1, 1, 0}, toy_runs({-1, 1}), 1.0, grid);
  const DensityTable q = quadrature_posterior(toy_forward, 0.8, inf, 0.0, 1.0, grid);
  double sup_gp = 0.0, sup_q = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double prior = std::exp(-0.5 * grid[i] * grid[i]) / std::sqrt(2 * M_PI);
    sup_gp = std::max(sup_gp, std::abs(gp.density()[i] - prior));
    sup_q = std::max(sup_q, std::abs(q.density()[i] - prior));
  }
  CHECK(sup_gp < 1e-6);
  CHECK(sup_q < 1e-6);
}

TEST_CASE("dense GP design approaches the exact posterior") {
  const auto grid = default_quadrature_grid();
  const DensityTable exact = quadrature_posterior(toy_forward, 0.8, 0.1, 0.0, 1.0, grid);
  const DensityTable gp = gp_posterior_density(
      0.8, 0.1, GpConfig{0.5, 0.1, 1.0, 1e-10}, toy_runs(linspace(-3, 3, 50)), 1.0, grid);
  CHECK(total_variation(exact, gp) < 0.02);
}

TEST_CASE("quadrature posterior with a linear model is conjugate") {
  const auto grid = default_quadrature_grid();
  const DensityTable q =
      quadrature_posterior([](double t) { return t; }, 0.8, 0.1, 0.0, 1.0, grid);
  CHECK(std::abs(q.mean() - 80.0 / 101.0) < 1e-4);
  CHECK(std::abs(q.variance() - 1.0 / 101.0) < 1e-4);
  CHECK(std::abs(q.integral() - 1.0) < 1e-6);
}

TEST_CASE("toy quadrature posterior shape") {
  const auto grid = default_quadrature_grid();
  const DensityTable q = quadrature_posterior(toy_forward, 0.8, 0.1, 0.0, 1.0, grid);
  CHECK(q.skewness() > 0.0);
  CHECK(q.mode() > 0.70);
  CHECK(q.mode() < 0.85);
  // Values recorded from this oracle.
  CHECK(q.mean() == doctest::Approx(0.88515).epsilon(1e-4));
  CHECK(q.variance() == doctest::Approx(0.15979).epsilon(1e-3));
  // Unimodal: density rises to the mode and falls after it.
  const auto& d = q.density();
  const auto top = std::max_element(d.begin(), d.end()) - d.begin();
  for (long i = 1; i <= top; ++i) REQUIRE(d[i] >= d[i - 1]);
  for (std::size_t i = top + 1; i < d.size(); ++i) REQUIRE(d[i] <= d[i - 1]);
  // Independent trapezoid moments over the raw table.
  double mean = 0, var = 0;
  trapezoid_moments(q.grid(), q.density(), mean, var);
  CHECK(mean == doctest::Approx(q.mean()).epsilon(1e-10));
  CHECK(var == doctest::Approx(q.variance()).epsilon(1e-9));
}

TEST_CASE("quadrature preconditions and failures") {
  CHECK_THROWS_AS(quadrature_posterior(toy_forward, 0.8, 0.1, 0, 1, linspace(-6, 6, 500)),
                  ValidationError);
  auto bad = [](double t) -> double {
    if (t > 5.0) throw std::runtime_error("no");
    return t;
  };
  CHECK_THROWS_AS(quadrature_posterior(bad, 0.8, 0.1, 0, 1, default_quadrature_grid()),
                  ForwardModelError);
}

TEST_CASE("linear emulator limits") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  s(0, 0) = 2;
  s.bottomRightCorner(2, 2) << 1, 0.3, 0.3, 0.5;
  Eigen::VectorXd mu(3);
  mu << 1, 2, 3;
  const LinearEmulator e = linear_emulator(MomentEstimate(mu, s, 1));
  CHECK(e.slope.cwiseAbs().maxCoeff() == 0.0);
  CHECK(e.intercept == mu.tail(2));
  CHECK(testing::max_abs_diff(e.residual_cov, s.bottomRightCorner(2, 2)) < 1e-15);

  Eigen::MatrixXd thetas = testing::gaussian_rows(30, Eigen::VectorXd::Zero(2),
                                                  Eigen::MatrixXd::Identity(2, 2), 4);
  Eigen::VectorXd a(3);
  a << 1, -1, 0.5;
  Eigen::MatrixXd b(3, 2);
  b << 1, 2, 0, -1, 3, 0.5;
  const JointEnsemble ens = build_ensemble(LinearForward(a, b).model(), thetas);
  const LinearEmulator lin = linear_emulator(compute_moments(ens));
  CHECK(testing::max_abs_diff(lin.slope, b) < 1e-10);
  CHECK(testing::max_abs_diff(lin.intercept, a) < 1e-10);
  CHECK(lin.residual_cov.cwiseAbs().maxCoeff() < 1e-10);

  Eigen::MatrixXd sing = Eigen::MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(linear_emulator(MomentEstimate(mu, sing, 2)), NumericalError);
}

TEST_CASE("linear emulator plugged into quadrature reproduces the Gaussian update") {
  const GaussianSampler prior(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
  const JointEnsemble ens = build_ensemble(toy_model(), prior.draw_rows(500, 8));
  const MomentEstimate mom = compute_moments(ens);
  const ObservationModel obs = ObservationModel::incidence(
      {0}, 1, 1, Eigen::VectorXd::Constant(1, 0.8), Eigen::MatrixXd::Constant(1, 1, 0.01));
  const GaussianPosterior g = gaussian_update(mom, obs);
  const LinearEmulator lin = linear_emulator(mom);

  const double mt = mom.mu_theta()(0);
  const double st = std::sqrt(mom.sigma_tt()(0, 0));
  const double sd = std::sqrt(lin.residual_cov(0, 0) + 0.01);
  const auto grid = linspace(mt - 8 * st, mt + 8 * st, 100001);
  const DensityTable q = quadrature_posterior(
      [&](double t) { return lin.intercept(0) + lin.slope(0, 0) * t; }, 0.8, sd, mt, st, grid);
  CHECK(std::abs(q.mean() / g.mu_theta()(0) - 1.0) < 0.01);
  CHECK(std::abs(q.variance() / g.sigma_theta()(0, 0) - 1.0) < 0.01);

  const ThetaPosterior tp = emulator_theta_posterior(lin, mom.mu_theta(), mom.sigma_tt(), obs);
  CHECK(std::abs(tp.mean(0) / g.mu_theta()(0) - 1.0) < 1e-8);
  CHECK(std::abs(tp.cov(0, 0) / g.sigma_theta()(0, 0) - 1.0) < 1e-8);
}

TEST_CASE("embedding equivalence on multivariate fixtures") {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd x = testing::gaussian_rows(
        60, Eigen::VectorXd::Zero(7), Eigen::MatrixXd::Identity(7, 7), seed);
    const MomentEstimate mom = compute_moments(JointEnsemble(x, 3));
    const ObservationModel obs = ObservationModel::incidence(
        {0, 3}, 3, 4, Eigen::VectorXd::Constant(2, 0.4), Eigen::MatrixXd::Identity(2, 2) * 0.2);
    const GaussianPosterior g = gaussian_update(mom, obs);
    const ThetaPosterior tp =
        emulator_theta_posterior(linear_emulator(mom), mom.mu_theta(), mom.sigma_tt(), obs);
    CHECK(testing::max_abs_diff(tp.mean, g.mu_theta()) < 1e-8);
    CHECK(testing::max_abs_diff(tp.cov, g.sigma_theta()) < 1e-8);
  }
}

TEST_CASE("density table bookkeeping") {
  const DensityTable t({0.0, 1.0, 2.0}, {1.0, 1.0, 1.0});
  CHECK(t.integral() == doctest::Approx(1.0));
  CHECK(t.mean() == doctest::Approx(1.0));
  CHECK(t.mass(0.0, 1.0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(DensityTable({0.0, 0.0}, {1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(DensityTable({0.0, 1.0}, {-1.0, 1.0}), ValidationError);
}
