#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

namespace enkfcal {

using LogTarget = std::function<double(const Eigen::VectorXd&)>;

struct McmcChain {
  Eigen::MatrixXd samples;  // post burn-in states, one per row
  double acceptance_rate;   // over all steps, burn-in included
  Eigen::Index burn_in;
};

// Random-walk Metropolis with isotropic N(0, proposal_sd^2 I) steps. The
// first half of the chain is discarded as burn-in. Deterministic given seed.
// Throws ValidationError when log_target(init) is not finite.
McmcChain mcmc_sampler(const LogTarget& log_target, const Eigen::VectorXd& init,
                       Eigen::Index steps, double proposal_sd, std::uint64_t seed);

}  // namespace enkfcal
