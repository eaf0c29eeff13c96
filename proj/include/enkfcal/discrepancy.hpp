#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "enkfcal/ensemble.hpp"

namespace enkfcal {

/// Orthonormal EOF vectors for one (output, season) field block.
struct EofBlock {
  Eigen::MatrixXd vectors;  // field_size x k, orthonormal columns
  // Weight j of a field f is scale(j) * <f, vectors.col(j)>; chosen so the
  // pilot snapshots' weights have unit sample variance.
  Eigen::VectorXd scale;
};

/// EOF bases for an n_outputs x n_seasons grid of field blocks. Fields and
/// weights are laid out output-major, then season, then EOF component.
struct EofBasis {
  Index n_outputs = 1;
  Index n_seasons = 1;
  Index k = 0;
  std::vector<EofBlock> blocks;  // index = output * n_seasons + season

  Index weight_size() const { return n_outputs * n_seasons * k; }
  Index field_size() const;
};

// Top-k left singular vectors of the column-centred snapshots (one snapshot
// per row) as a single-block basis. Throws ValidationError unless
// T > k >= 1 and the centred snapshots have rank >= k.
EofBasis compute_eof(const Eigen::MatrixXd& pilot_fields, Index k);

// One basis per block; `pilot_blocks[o * n_seasons + s]` holds that block's
// pilot snapshots.
EofBasis compute_eof_blocks(const std::vector<Eigen::MatrixXd>& pilot_blocks,
                            Index n_outputs, Index n_seasons, Index k);

// Splits concatenated snapshot rows into n_outputs * n_seasons equal blocks.
std::vector<Eigen::MatrixXd> split_field_blocks(const Eigen::MatrixXd& fields,
                                                Index n_blocks);

Eigen::VectorXd project_field(const Eigen::VectorXd& field, const EofBasis& basis);
Eigen::VectorXd reconstruct_field(const Eigen::VectorXd& weights, const EofBasis& basis);

/// Gamma(shape a, rate b) priors on per-output discrepancy precisions.
struct DiscrepancyPrior {
  double a = 1.0;
  double b = 0.001;
};

// I + diag(1 / lambda) kron I_block, block = n_seasons * k.
Eigen::MatrixXd sigma_y_from_lambda(const Eigen::VectorXd& lambda, Index n_seasons,
                                    Index k);

// log pi(lambda | y) up to a constant with V = Sigma_ee + I + Sigma_delta.
// The weight vector splits into lambda.size() equal output blocks.
double lambda_log_posterior(const Eigen::VectorXd& lambda, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& mu_eta, const Eigen::MatrixXd& sigma_ee,
                            const DiscrepancyPrior& prior = {});

struct DiscrepancyPrecisions {
  Eigen::VectorXd lambda;  // posterior mean
  DiscrepancyPrior prior;
  double acceptance_rate;
  Index kept_samples;
};

// Posterior mean of lambda by random-walk Metropolis on log lambda.
DiscrepancyPrecisions estimate_lambda(const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& mu_eta,
                                      const Eigen::MatrixXd& sigma_ee, Index n_outputs,
                                      Index steps, std::uint64_t seed,
                                      const DiscrepancyPrior& prior = {},
                                      double proposal_sd = 1.0);

}  // namespace enkfcal
