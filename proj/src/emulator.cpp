#include "enkfcal/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "enkfcal/errors.hpp"
#include "enkfcal/parallel.hpp"

namespace enkfcal {

void GpConfig::validate() const {
  if (!(signal_var > 0.0) || !std::isfinite(signal_var)) {
    throw ValidationError("GP signal variance must be positive");
  }
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw ValidationError("GP lengthscale must be positive");
  }
  if (!(nugget >= 0.0) || !std::isfinite(nugget)) {
    throw ValidationError("GP nugget must be non-negative");
  }
  if (!std::isfinite(mean_const)) throw ValidationError("GP mean must be finite");
}

double GpConfig::covariance(double a, double b) const {
  const double d = (a - b) / lengthscale;
  return signal_var * std::exp(-0.5 * d * d);
}

GpEmulator::GpEmulator(GpConfig config, DesignRuns runs)
    : config_(config), runs_(std::move(runs)) {
  config_.validate();
  const auto& theta = runs_.theta_design;
  const auto& eta = runs_.eta_design;
  if (theta.empty() || theta.size() != eta.size()) {
    throw ValidationError("GP design needs equal, non-zero numbers of inputs and outputs");
  }
  if (config_.nugget == 0.0 && std::set<double>(theta.begin(), theta.end()).size() !=
                                   theta.size()) {
    throw ValidationError("GP design inputs must be distinct when the nugget is zero");
  }
  const auto n = static_cast<Index>(theta.size());
  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd resid(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      k(i, j) = config_.covariance(theta[static_cast<std::size_t>(i)],
                                   theta[static_cast<std::size_t>(j)]);
    }
    k(i, i) += config_.nugget;
    resid(i) = eta[static_cast<std::size_t>(i)] - config_.mean_const;
  }
  factor_.compute(k);
  if (factor_.info() != Eigen::Success) {
    throw NumericalError("GP design covariance is singular");
  }
  weights_ = factor_.solve(resid);
}

GpPrediction GpEmulator::predict(double theta) const {
  const auto n = static_cast<Index>(runs_.theta_design.size());
  Eigen::VectorXd cross(n);
  for (Index i = 0; i < n; ++i) {
    cross(i) = config_.covariance(theta, runs_.theta_design[static_cast<std::size_t>(i)]);
  }
  const double mean = config_.mean_const + cross.dot(weights_);
  const Eigen::VectorXd half = factor_.matrixL().solve(cross);
  const double variance = config_.covariance(theta, theta) - half.squaredNorm();
  return {mean, std::max(variance, 0.0)};
}

GpPrediction gp_condition(const GpConfig& config, const DesignRuns& runs, double theta) {
  return GpEmulator(config, runs).predict(theta);
}

DensityTable::DensityTable(std::vector<double> grid, std::vector<double> density)
    : grid_(std::move(grid)), density_(std::move(density)) {
  if (grid_.size() < 2 || grid_.size() != density_.size()) {
    throw ValidationError("density table needs at least two grid points and matching values");
  }
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) {
      throw ValidationError("density grid must be strictly increasing");
    }
  }
  for (double v : density_) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("density values must be finite and non-negative");
    }
  }
  const double total = integral();
  if (!(total > 0.0)) throw NumericalError("density integrates to zero on the grid");
  for (double& v : density_) v /= total;
}

DensityTable DensityTable::from_log_density(std::vector<double> grid,
                                            const std::vector<double>& log_density) {
  if (log_density.empty()) throw ValidationError("empty log density");
  const double top = *std::max_element(log_density.begin(), log_density.end());
  if (!std::isfinite(top)) throw NumericalError("log density has no finite maximum");
  std::vector<double> density(log_density.size());
  std::transform(log_density.begin(), log_density.end(), density.begin(),
                 [top](double v) { return std::exp(v - top); });
  return {std::move(grid), std::move(density)};
}

double DensityTable::integral() const {
  double total = 0.0;
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    total += 0.5 * (grid_[i] - grid_[i - 1]) * (density_[i] + density_[i - 1]);
  }
  return total;
}

double DensityTable::moment(int order, double center) const {
  double total = 0.0;
  auto f = [&](std::size_t i) { return std::pow(grid_[i] - center, order) * density_[i]; };
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    total += 0.5 * (grid_[i] - grid_[i - 1]) * (f(i) + f(i - 1));
  }
  return total;
}

double DensityTable::mean() const { return moment(1, 0.0); }

double DensityTable::variance() const { return moment(2, mean()); }

double DensityTable::skewness() const {
  const double mu = mean();
  return moment(3, mu) / std::pow(moment(2, mu), 1.5);
}

double DensityTable::mode() const {
  const auto it = std::max_element(density_.begin(), density_.end());
  return grid_[static_cast<std::size_t>(it - density_.begin())];
}

double DensityTable::mass(double lo, double hi) const {
  double total = 0.0;
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    const double a = std::max(lo, grid_[i - 1]);
    const double b = std::min(hi, grid_[i]);
    if (b <= a) continue;
    const double width = grid_[i] - grid_[i - 1];
    const double slope = (density_[i] - density_[i - 1]) / width;
    const double pa = density_[i - 1] + slope * (a - grid_[i - 1]);
    const double pb = density_[i - 1] + slope * (b - grid_[i - 1]);
    total += 0.5 * (b - a) * (pa + pb);
  }
  return total;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw ValidationError("linspace needs at least two points");
  std::vector<double> out(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

std::vector<double> default_quadrature_grid() { return linspace(-6.0, 6.0, 100000); }

double total_variation(const DensityTable& p, const DensityTable& q) {
  if (p.grid() != q.grid()) {
    throw ValidationError("total variation needs tables on the same grid");
  }
  const auto& g = p.grid();
  double total = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double a = std::abs(p.density()[i - 1] - q.density()[i - 1]);
    const double b = std::abs(p.density()[i] - q.density()[i]);
    total += 0.5 * (g[i] - g[i - 1]) * (a + b);
  }
  return 0.5 * total;
}

double histogram_total_variation(const std::vector<double>& samples,
                                 const DensityTable& table, std::size_t bins) {
  if (samples.empty() || bins == 0) {
    throw ValidationError("histogram comparison needs samples and at least one bin");
  }
  const double lo = table.grid().front();
  const double hi = table.grid().back();
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> counts(bins, 0.0);
  double outside = 0.0;
  for (double s : samples) {
    if (s < lo || s >= hi) {
      outside += 1.0;
      continue;
    }
    const auto b = std::min(bins - 1, static_cast<std::size_t>((s - lo) / width));
    counts[b] += 1.0;
  }
  const auto n = static_cast<double>(samples.size());
  double total = outside / n;
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + width * static_cast<double>(b);
    total += std::abs(counts[b] / n - table.mass(a, a + width));
  }
  return 0.5 * total;
}

namespace {

void check_grid_spacing(const std::vector<double>& grid, double max_step) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] - grid[i - 1] > max_step * (1.0 + 1e-9)) {
      throw ValidationError("quadrature grid spacing exceeds prior_sd / 100");
    }
  }
}

}  // namespace

DensityTable gp_posterior_density(double y, double sigma_y, const GpConfig& config,
                                  const DesignRuns& runs, double prior_sd,
                                  const std::vector<double>& grid) {
  if (!(prior_sd > 0.0)) throw ValidationError("prior_sd must be positive");
  if (!(sigma_y > 0.0)) throw ValidationError("sigma_y must be positive");
  if (grid.size() < 2 || grid.front() > -3.0 * prior_sd || grid.back() < 3.0 * prior_sd) {
    throw ValidationError("grid must cover [-3 prior_sd, 3 prior_sd]");
  }
  const GpEmulator gp(config, runs);
  std::vector<double> log_density(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const GpPrediction pred = gp.predict(grid[i]);
    const double resid = y - pred.mean;
    const double var = pred.variance + sigma_y * sigma_y;
    const double z = grid[i] / prior_sd;
    log_density[i] = std::isinf(var) ? -0.5 * z * z : -0.5 * resid * resid / var - 0.5 * z * z;
  });
  return DensityTable::from_log_density(grid, log_density);
}

DensityTable quadrature_posterior(const ScalarForward& forward, double y, double sigma_y,
                                  double prior_mean, double prior_sd,
                                  const std::vector<double>& grid) {
  if (!(prior_sd > 0.0)) throw ValidationError("prior_sd must be positive");
  if (!(sigma_y > 0.0)) throw ValidationError("sigma_y must be positive");
  if (grid.size() < 2) throw ValidationError("quadrature grid needs at least two points");
  check_grid_spacing(grid, prior_sd / 100.0);
  const double precision = std::isinf(sigma_y) ? 0.0 : 1.0 / (sigma_y * sigma_y);
  std::vector<double> log_density(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    double eta = std::numeric_limits<double>::quiet_NaN();
    try {
      eta = forward(grid[i]);
    } catch (const std::exception& e) {
      throw ForwardModelError(std::string("forward model failed on grid point ") +
                                  std::to_string(i) + ": " + e.what(),
                              i);
    }
    if (!std::isfinite(eta)) {
      throw ForwardModelError("forward model returned non-finite output on grid point " +
                                  std::to_string(i),
                              i);
    }
    const double resid = y - eta;
    const double z = (grid[i] - prior_mean) / prior_sd;
    log_density[i] = -0.5 * precision * resid * resid - 0.5 * z * z;
  });
  return DensityTable::from_log_density(grid, log_density);
}

LinearEmulator linear_emulator(const MomentEstimate& moments) {
  const Eigen::MatrixXd sigma_tt = moments.sigma_tt();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma_tt, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * top) {
    throw NumericalError("linear emulator needs an invertible Sigma_theta_theta");
  }
  const Eigen::LLT<Eigen::MatrixXd> factor(sigma_tt);
  LinearEmulator em;
  em.slope = factor.solve(Eigen::MatrixXd(moments.sigma_te())).transpose();
  em.intercept = moments.mu_eta() - em.slope * moments.mu_theta();
  em.residual_cov = symmetrize(Eigen::MatrixXd(moments.sigma_ee()) -
                               em.slope * Eigen::MatrixXd(moments.sigma_te()));
  return em;
}

ThetaPosterior emulator_theta_posterior(const LinearEmulator& emulator,
                                        const Eigen::VectorXd& mu_theta,
                                        const Eigen::MatrixXd& sigma_tt,
                                        const ObservationModel& obs) {
  const Index dt = mu_theta.size();
  const Index de = emulator.intercept.size();
  if (obs.state_dim() != dt + de || emulator.slope.rows() != de ||
      emulator.slope.cols() != dt) {
    throw ValidationError("emulator, prior and observation dimensions disagree");
  }
  const Eigen::MatrixXd h_theta = obs.h().leftCols(dt);
  const Eigen::MatrixXd h_eta = obs.h().rightCols(de);
  const Eigen::MatrixXd design = h_theta + h_eta * emulator.slope;
  const Eigen::VectorXd offset = h_eta * emulator.intercept;
  const Eigen::MatrixXd noise =
      symmetrize(h_eta * emulator.residual_cov * h_eta.transpose() + obs.sigma_y());
  const SpdFactor noise_factor(noise, "emulator observation covariance");
  const SpdFactor prior(sigma_tt, "prior Sigma_theta_theta");

  const Eigen::MatrixXd precision =
      symmetrize(prior.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(dt, dt))) +
                 design.transpose() * noise_factor.solve(design));
  const SpdFactor post(precision, "emulator posterior precision");
  ThetaPosterior out;
  out.cov = symmetrize(post.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(dt, dt))));
  out.mean = post.solve(Eigen::VectorXd(prior.solve(mu_theta) +
                                        design.transpose() *
                                            noise_factor.solve(Eigen::VectorXd(obs.y() - offset))));
  return out;
}

}  // namespace enkfcal
