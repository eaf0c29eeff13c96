#include "enkfcal/mcmc.hpp"

#include <cmath>
#include <limits>

#include "enkfcal/errors.hpp"
#include "enkfcal/random.hpp"

namespace enkfcal {

McmcChain mcmc_sampler(const LogTarget& log_target, const Eigen::VectorXd& init,
                       Eigen::Index steps, double proposal_sd, std::uint64_t seed) {
  if (steps < 2) throw ValidationError("MCMC needs at least two steps");
  if (!(proposal_sd >= 0.0) || !std::isfinite(proposal_sd)) {
    throw ValidationError("proposal_sd must be finite and non-negative");
  }
  double current_log = log_target(init);
  if (!std::isfinite(current_log)) {
    throw ValidationError("MCMC log target is not finite at the initial state");
  }

  RandomStream rng(seed);
  const Eigen::Index burn_in = steps / 2;
  McmcChain chain{Eigen::MatrixXd(steps - burn_in, init.size()), 0.0, burn_in};
  Eigen::VectorXd current = init;
  Eigen::Index accepted = 0;
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Eigen::VectorXd proposal = current + proposal_sd * rng.normal_vector(init.size());
    const double proposal_log = log_target(proposal);
    const double log_u = std::log(rng.uniform());
    // NaN proposals are rejected by the comparison.
    if (log_u < proposal_log - current_log) {
      current = proposal;
      current_log = proposal_log;
      ++accepted;
    }
    if (t >= burn_in) chain.samples.row(t - burn_in) = current.transpose();
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(steps);
  return chain;
}

}  // namespace enkfcal
