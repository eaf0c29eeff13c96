#include "enkfcal/discrepancy.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "enkfcal/errors.hpp"
#include "enkfcal/linalg.hpp"
#include "enkfcal/mcmc.hpp"

namespace enkfcal {

Index EofBasis::field_size() const {
  Index total = 0;
  for (const auto& b : blocks) total += b.vectors.rows();
  return total;
}

namespace {

EofBlock eof_block(const Eigen::MatrixXd& pilot, Index k) {
  const Index t = pilot.rows();
  if (k < 1 || t <= k) {
    throw ValidationError("EOF basis needs T > k >= 1 (T = " + std::to_string(t) +
                          ", k = " + std::to_string(k) + ")");
  }
  if (pilot.cols() < k) throw ValidationError("EOF field is shorter than k");
  if (!pilot.allFinite()) throw ValidationError("pilot fields contain non-finite values");
  const Eigen::MatrixXd centered = pilot.rowwise() - pilot.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(k - 1) <= 1e-12 * sv(0)) {
    throw ValidationError("pilot fields have rank below k = " + std::to_string(k));
  }
  EofBlock block;
  block.vectors = svd.matrixV().leftCols(k);
  for (Index j = 0; j < k; ++j) {
    Index arg = 0;
    block.vectors.col(j).cwiseAbs().maxCoeff(&arg);
    if (block.vectors(arg, j) < 0.0) block.vectors.col(j) *= -1.0;
  }
  block.scale = (std::sqrt(static_cast<double>(t - 1)) / sv.head(k).array()).matrix();
  return block;
}

}  // namespace

EofBasis compute_eof(const Eigen::MatrixXd& pilot_fields, Index k) {
  return compute_eof_blocks({pilot_fields}, 1, 1, k);
}

EofBasis compute_eof_blocks(const std::vector<Eigen::MatrixXd>& pilot_blocks,
                            Index n_outputs, Index n_seasons, Index k) {
  if (n_outputs < 1 || n_seasons < 1) {
    throw ValidationError("EOF layout needs at least one output and one season");
  }
  if (static_cast<Index>(pilot_blocks.size()) != n_outputs * n_seasons) {
    throw ValidationError("expected " + std::to_string(n_outputs * n_seasons) +
                          " pilot blocks, got " + std::to_string(pilot_blocks.size()));
  }
  EofBasis basis;
  basis.n_outputs = n_outputs;
  basis.n_seasons = n_seasons;
  basis.k = k;
  basis.blocks.reserve(pilot_blocks.size());
  for (const auto& pilot : pilot_blocks) basis.blocks.push_back(eof_block(pilot, k));
  return basis;
}

std::vector<Eigen::MatrixXd> split_field_blocks(const Eigen::MatrixXd& fields,
                                                Index n_blocks) {
  if (n_blocks < 1 || fields.cols() % n_blocks != 0) {
    throw ValidationError("field width " + std::to_string(fields.cols()) +
                          " does not split into " + std::to_string(n_blocks) + " blocks");
  }
  const Index width = fields.cols() / n_blocks;
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(n_blocks));
  for (Index b = 0; b < n_blocks; ++b) out.emplace_back(fields.middleCols(b * width, width));
  return out;
}

Eigen::VectorXd project_field(const Eigen::VectorXd& field, const EofBasis& basis) {
  if (field.size() != basis.field_size()) {
    throw ValidationError("field length " + std::to_string(field.size()) +
                          " does not match basis field size " +
                          std::to_string(basis.field_size()));
  }
  Eigen::VectorXd weights(basis.weight_size());
  Index offset = 0;
  Index w = 0;
  for (const auto& block : basis.blocks) {
    const Index size = block.vectors.rows();
    weights.segment(w, basis.k) =
        block.scale.cwiseProduct(block.vectors.transpose() * field.segment(offset, size));
    offset += size;
    w += basis.k;
  }
  return weights;
}

Eigen::VectorXd reconstruct_field(const Eigen::VectorXd& weights, const EofBasis& basis) {
  if (weights.size() != basis.weight_size()) {
    throw ValidationError("weight vector length does not match the basis layout");
  }
  Eigen::VectorXd field(basis.field_size());
  Index offset = 0;
  Index w = 0;
  for (const auto& block : basis.blocks) {
    const Index size = block.vectors.rows();
    field.segment(offset, size) =
        block.vectors * weights.segment(w, basis.k).cwiseQuotient(block.scale);
    offset += size;
    w += basis.k;
  }
  return field;
}

Eigen::MatrixXd sigma_y_from_lambda(const Eigen::VectorXd& lambda, Index n_seasons,
                                    Index k) {
  if (lambda.size() < 1) throw ValidationError("lambda must be non-empty");
  if (!(lambda.array() > 0.0).all()) {
    throw ValidationError("discrepancy precisions must be positive");
  }
  if (n_seasons < 1 || k < 1) throw ValidationError("block layout must be positive");
  const Index block = n_seasons * k;
  Eigen::VectorXd diag(lambda.size() * block);
  for (Index i = 0; i < lambda.size(); ++i) {
    diag.segment(i * block, block).setConstant(1.0 + 1.0 / lambda(i));
  }
  return diag.asDiagonal();
}

namespace {

void check_prior(const DiscrepancyPrior& prior) {
  if (!(prior.a > 0.0) || !(prior.b >= 0.0)) {
    throw ValidationError("Gamma prior needs a > 0 and b >= 0");
  }
}

}  // namespace

double lambda_log_posterior(const Eigen::VectorXd& lambda, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& mu_eta, const Eigen::MatrixXd& sigma_ee,
                            const DiscrepancyPrior& prior) {
  check_prior(prior);
  const Index n = y.size();
  if (mu_eta.size() != n || sigma_ee.rows() != n || sigma_ee.cols() != n) {
    throw ValidationError("y, mu_eta and Sigma_eta_eta dimensions disagree");
  }
  if (lambda.size() < 1 || n % lambda.size() != 0) {
    throw ValidationError("weight vector does not split into one block per lambda");
  }
  const Index block = n / lambda.size();
  const Eigen::MatrixXd v = sigma_ee + sigma_y_from_lambda(lambda, block, 1);
  const SpdFactor factor(symmetrize(v), "V(lambda)");
  const Eigen::VectorXd resid = y - mu_eta;
  const Eigen::VectorXd z = factor.llt().matrixL().solve(resid);
  double log_prior = 0.0;
  for (Index i = 0; i < lambda.size(); ++i) {
    log_prior += (prior.a - 1.0) * std::log(lambda(i)) - prior.b * lambda(i);
  }
  return -0.5 * factor.log_det() - 0.5 * z.squaredNorm() + log_prior;
}

DiscrepancyPrecisions estimate_lambda(const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& mu_eta,
                                      const Eigen::MatrixXd& sigma_ee, Index n_outputs,
                                      Index steps, std::uint64_t seed,
                                      const DiscrepancyPrior& prior, double proposal_sd) {
  check_prior(prior);
  if (n_outputs < 1) throw ValidationError("need at least one output");
  // Target on u = log(lambda), including the Jacobian of the exp map.
  const LogTarget target = [&](const Eigen::VectorXd& u) {
    if (!u.allFinite() || (u.array().abs() > 700.0).any()) {
      return -std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd lambda = u.array().exp();
    return lambda_log_posterior(lambda, y, mu_eta, sigma_ee, prior) + u.sum();
  };
  const McmcChain chain =
      mcmc_sampler(target, Eigen::VectorXd::Zero(n_outputs), steps, proposal_sd, seed);
  DiscrepancyPrecisions out;
  out.lambda = chain.samples.array().exp().colwise().mean().transpose();
  out.prior = prior;
  out.acceptance_rate = chain.acceptance_rate;
  out.kept_samples = chain.samples.rows();
  return out;
}

}  // namespace enkfcal
