#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "enkfcal/ensemble.hpp"
#include "enkfcal/linalg.hpp"

namespace enkfcal {

/// Fixed-hyperparameter GP prior for a scalar simulator output:
/// constant mean and squared-exponential covariance
///   C(a, b) = signal_var * exp(-(a - b)^2 / (2 * lengthscale^2)).
struct GpConfig {
  double mean_const = 0.0;
  double signal_var = 1.0;
  double lengthscale = 1.0;
  double nugget = 0.0;  // added to the design-point diagonal only

  void validate() const;
  double covariance(double a, double b) const;
};

/// Simulator runs eta_design[i] = eta(theta_design[i]).
struct DesignRuns {
  std::vector<double> theta_design;
  std::vector<double> eta_design;
};

struct GpPrediction {
  double mean;
  double variance;
};

/// GP conditioned on a set of runs; factors the design covariance once.
class GpEmulator {
 public:
  GpEmulator(GpConfig config, DesignRuns runs);

  GpPrediction predict(double theta) const;
  const GpConfig& config() const { return config_; }
  const DesignRuns& runs() const { return runs_; }

 private:
  GpConfig config_;
  DesignRuns runs_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  Eigen::VectorXd weights_;  // C(design, design)^{-1} (eta - m)
};

GpPrediction gp_condition(const GpConfig& config, const DesignRuns& runs, double theta);

/// A normalized density tabulated on a strictly increasing grid.
class DensityTable {
 public:
  // Normalizes `density` by its trapezoid integral.
  DensityTable(std::vector<double> grid, std::vector<double> density);
  // Exponentiates after subtracting the maximum, then normalizes.
  static DensityTable from_log_density(std::vector<double> grid,
                                       const std::vector<double>& log_density);

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& density() const { return density_; }

  double integral() const;
  double mean() const;
  double variance() const;
  double skewness() const;
  double mode() const;
  // Probability mass in [lo, hi) by trapezoid integration of the linear
  // interpolant.
  double mass(double lo, double hi) const;

 private:
  double moment(int order, double center) const;

  std::vector<double> grid_;
  std::vector<double> density_;
};

// n equally spaced points from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Default quadrature grid: [-6, 6] with 10^5 points.
std::vector<double> default_quadrature_grid();

// 0.5 * integral |p - q|; both tables must share the grid.
double total_variation(const DensityTable& p, const DensityTable& q);

// Total variation between the histogram of `samples` over `bins` equal-width
// bins spanning the table's grid and the table's mass in the same bins.
double histogram_total_variation(const std::vector<double>& samples,
                                 const DensityTable& table, std::size_t bins);

// GP-emulator posterior for theta with N(0, prior_sd^2) prior:
//   pi(theta | y) ~ exp(-(y - mu_theta)^2 / (2 (v_theta + sigma_y^2))) * prior.
// The grid must cover [-3 prior_sd, 3 prior_sd].
DensityTable gp_posterior_density(double y, double sigma_y, const GpConfig& config,
                                  const DesignRuns& runs, double prior_sd,
                                  const std::vector<double>& grid);

using ScalarForward = std::function<double(double)>;

// Exact posterior by direct evaluation of the forward model on the grid:
//   pi(theta | y) ~ exp(-(y - eta(theta))^2 / (2 sigma_y^2)) * N(prior_mean, prior_sd^2).
// Grid spacing must not exceed prior_sd / 100. sigma_y may be +infinity.
DensityTable quadrature_posterior(const ScalarForward& forward, double y, double sigma_y,
                                  double prior_mean, double prior_sd,
                                  const std::vector<double>& grid);

/// Conditional eta | theta implied by joint Gaussian moments:
/// eta | theta ~ N(intercept + slope theta, residual_cov).
struct LinearEmulator {
  Eigen::VectorXd intercept;
  Eigen::MatrixXd slope;  // d_eta x d_theta
  Eigen::MatrixXd residual_cov;
};

// Throws NumericalError when Sigma_theta_theta is singular.
LinearEmulator linear_emulator(const MomentEstimate& moments);

struct ThetaPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Conjugate normal posterior for theta ~ N(mu_theta, sigma_tt) under
// y = H_theta theta + H_eta eta + e with eta | theta from the emulator.
ThetaPosterior emulator_theta_posterior(const LinearEmulator& emulator,
                                        const Eigen::VectorXd& mu_theta,
                                        const Eigen::MatrixXd& sigma_tt,
                                        const ObservationModel& obs);

}  // namespace enkfcal
