#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "enkfcal/ensemble.hpp"

namespace enkfcal {

/// Deterministic simulator theta -> eta(theta) with declared dimensions.
class ForwardModel {
 public:
  using Function = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  ForwardModel(Function function, Index d_theta, Index d_eta, std::string name = {});

  Index d_theta() const { return d_theta_; }
  Index d_eta() const { return d_eta_; }
  const std::string& name() const { return name_; }

  // Throws ValidationError on a wrong-length input, ForwardModelError (member
  // 0) when the function throws or returns a wrong-length or non-finite output.
  Eigen::VectorXd evaluate(const Eigen::VectorXd& theta) const;

  // Evaluates each row. Failures throw ForwardModelError carrying the row.
  Eigen::MatrixXd evaluate_rows(const Eigen::MatrixXd& thetas) const;

 private:
  Function function_;
  Index d_theta_;
  Index d_eta_;
  std::string name_;
};

// Joint ensemble (theta_k, eta(theta_k)) for the given parameter rows.
JointEnsemble build_ensemble(const ForwardModel& model, const Eigen::MatrixXd& thetas);

// The 1-d toy simulator: the standard normal CDF.
double toy_forward(double theta);
ForwardModel toy_model();

/// Affine simulator eta = a + B theta.
class LinearForward {
 public:
  LinearForward(Eigen::VectorXd intercept, Eigen::MatrixXd slope);

  Eigen::VectorXd operator()(const Eigen::VectorXd& theta) const;
  ForwardModel model() const;

  // Exact joint moments of (theta, a + B theta) for theta ~ N(mu, sigma).
  MomentEstimate joint_moments(const Eigen::VectorXd& mu_theta,
                               const Eigen::MatrixXd& sigma_tt) const;

  const Eigen::VectorXd& intercept() const { return intercept_; }
  const Eigen::MatrixXd& slope() const { return slope_; }

 private:
  Eigen::VectorXd intercept_;
  Eigen::MatrixXd slope_;
};

// Stand-in for the ice sheet simulator: log thickness on an nx-by-ny lattice,
// site index = row * nx + col, with
//   log T(s) = 1 + b(s) * (1 + 0.5 * (theta2 - theta1))
// and b a smooth bump that vanishes toward the open edge (col 0), scaled to
// max 1. Thickness falls with theta1 and rises with theta2 at every site.
// Both parameters must lie in [0, 1].
Eigen::VectorXd synthetic_ice_thickness(double theta1, double theta2, Index nx = 36,
                                        Index ny = 30);
ForwardModel ice_model(Index nx = 36, Index ny = 30);

/// Axis-aligned parameter box.
struct ParameterBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  ParameterBox(Eigen::VectorXd lower, Eigen::VectorXd upper);

  Index dim() const { return lower.size(); }
  bool contains(const Eigen::VectorXd& theta) const;

  static ParameterBox unit(Index dim);
  // Spectral index n, Hubble h, sigma_8, Omega_CDM, Omega_B.
  static ParameterBox cosmology();
};

// One point per stratum in every coordinate, strata permuted independently.
Eigen::MatrixXd latin_hypercube(Index m, const ParameterBox& box, std::uint64_t seed);

// Best of `tries` Latin hypercubes by minimum pairwise distance (in unit
// coordinates).
Eigen::MatrixXd maximin_latin_hypercube(Index m, const ParameterBox& box,
                                        std::uint64_t seed, int tries = 100);

}  // namespace enkfcal
