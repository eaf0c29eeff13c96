#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "enkfcal/ensemble.hpp"
#include "enkfcal/taper.hpp"

namespace enkfcal {

// What the taper multiplies when building Sigma_eta_eta(r) from an ensemble.
//   residual: the part of S not explained by the linear regression on theta,
//             Sigma_et Sigma_tt^{-1} Sigma_te + (S - Sigma_et Sigma_tt^{-1} Sigma_te) o R.
//             The joint prior stays positive semidefinite for every r.
//   sample:   the whole sample block, S o R. Next to the untapered cross
//             covariance this is often indefinite, which the constructor rejects.
enum class TaperTarget { residual, sample };

/// Bayesian D-optimal placement of n measurement sites. Sigma_pr is treated as
/// known with the eta-eta block replaced by a tapered estimate, and the
/// measurement errors are independent with variance obs_noise_var.
struct DesignProblem {
  MomentEstimate moments;
  Eigen::MatrixXd tapered_cov;  // d_eta x d_eta
  double obs_noise_var;
  SpatialGrid grid;
  Index n;

  // Throws ValidationError unless the joint prior with tapered_cov in the
  // eta-eta block is positive semidefinite (otherwise the theta posterior
  // covariance can have negative eigenvalues).
  DesignProblem(MomentEstimate moments, Eigen::MatrixXd tapered_cov, double obs_noise_var,
                SpatialGrid grid, Index n);

  // Moments from the ensemble with Sigma_eta_eta tapered by R(taper_range).
  static DesignProblem from_ensemble(const JointEnsemble& ensemble, SpatialGrid grid,
                                     double taper_range, double obs_noise_var, Index n,
                                     TaperTarget target = TaperTarget::residual);

  Index candidates() const { return tapered_cov.rows(); }
};

struct Design {
  std::vector<Index> site_indices;  // sorted, distinct
  double criterion;                 // log det of the theta posterior covariance
};

// Sigma_tt - Sigma_te[:, S] (Sigma_ee(r)[S, S] + sigma^2 I)^{-1} Sigma_et[S, :].
// An empty site list returns Sigma_tt.
Eigen::MatrixXd posterior_param_cov(const DesignProblem& problem,
                                    const std::vector<Index>& sites);

// log det posterior_param_cov; lower is better.
double d_criterion(const DesignProblem& problem, const std::vector<Index>& sites);

// Number of n-subsets of p candidates, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t p, std::uint64_t n);

// Global minimizer over every n-subset, ties to the lexicographically
// smallest index set. Refuses instances with more than 10^6 subsets.
Design exhaustive_design(const DesignProblem& problem);

struct ExchangeReport {
  Design best;
  std::vector<double> initial_criteria;  // per restart
  std::vector<Design> restart_results;   // local optimum per restart
};

// Fedorov exchange from `restarts` random starts. Each restart repeatedly
// applies the best single (selected, unselected) swap that lowers the
// criterion by more than 1e-12 until a full scan finds none. Restart t draws
// its start from substream (seed, t), so restarts may run in parallel.
ExchangeReport fedorov_exchange_report(const DesignProblem& problem, int restarts,
                                       std::uint64_t seed);

Design fedorov_exchange(const DesignProblem& problem, int restarts, std::uint64_t seed);

}  // namespace enkfcal
