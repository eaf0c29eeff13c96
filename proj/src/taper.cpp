#include "enkfcal/taper.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <string>

#include "enkfcal/errors.hpp"
#include "enkfcal/linalg.hpp"
#include "enkfcal/parallel.hpp"

namespace enkfcal {

SpatialGrid::SpatialGrid(std::vector<std::array<double, 2>> sites) : sites_(std::move(sites)) {
  if (sites_.empty()) throw ValidationError("spatial grid has no sites");
  if (std::set<std::array<double, 2>>(sites_.begin(), sites_.end()).size() != sites_.size()) {
    throw ValidationError("spatial grid sites must be distinct");
  }
}

SpatialGrid SpatialGrid::lattice(Index nx, Index ny) {
  if (nx < 1 || ny < 1) throw ValidationError("lattice dimensions must be positive");
  std::vector<std::array<double, 2>> sites;
  sites.reserve(static_cast<std::size_t>(nx * ny));
  for (Index row = 0; row < ny; ++row) {
    for (Index col = 0; col < nx; ++col) {
      sites.push_back({static_cast<double>(col), static_cast<double>(row)});
    }
  }
  SpatialGrid grid(std::move(sites));
  grid.nx_ = nx;
  grid.ny_ = ny;
  return grid;
}

std::array<Index, 2> SpatialGrid::row_col(Index site) const {
  if (site < 0 || site >= size()) throw ValidationError("site index out of range");
  const auto& s = sites_[static_cast<std::size_t>(site)];
  return {static_cast<Index>(s[1]), static_cast<Index>(s[0])};
}

Eigen::MatrixXd SpatialGrid::distances() const {
  const Index n = size();
  Eigen::MatrixXd d(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& a = sites_[static_cast<std::size_t>(i)];
    d(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) {
      const auto& b = sites_[static_cast<std::size_t>(j)];
      d(i, j) = d(j, i) = std::hypot(a[0] - b[0], a[1] - b[1]);
    }
  }
  return d;
}

SpatialGrid SpatialGrid::permuted(const std::vector<Index>& order) const {
  if (static_cast<Index>(order.size()) != size()) {
    throw ValidationError("permutation length does not match the grid");
  }
  std::vector<std::array<double, 2>> sites;
  sites.reserve(order.size());
  for (Index i : order) {
    if (i < 0 || i >= size()) throw ValidationError("permutation index out of range");
    sites.push_back(sites_[static_cast<std::size_t>(i)]);
  }
  return SpatialGrid(std::move(sites));
}

namespace {

Eigen::MatrixXd exponential_correlation(const Eigen::MatrixXd& distances, double r) {
  if (!(r > 0.0)) throw ValidationError("taper range r must be positive");
  return (-distances.array() / r).exp().matrix();
}

void check_candidates(const std::vector<double>& candidates) {
  if (candidates.empty()) throw ValidationError("no taper range candidates");
  for (double r : candidates) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ValidationError("taper range candidates must be positive and finite");
    }
  }
}

// Highest finite log likelihood wins; ties go to the smaller range.
void choose_best(TaperFit& fit) {
  bool found = false;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < fit.candidates.size(); ++c) {
    const double ll = fit.log_likelihood[c];
    if (!std::isfinite(ll)) continue;
    if (!found || ll > best_ll || (ll == best_ll && fit.candidates[c] < fit.r_star)) {
      found = true;
      best_ll = ll;
      fit.r_star = fit.candidates[c];
    }
  }
  if (!found) {
    throw NumericalError("no taper range candidate gives a positive definite covariance");
  }
}

}  // namespace

TaperMatrix exponential_taper(const SpatialGrid& grid, double r) {
  return {r, exponential_correlation(grid.distances(), r)};
}

Eigen::MatrixXd taper_apply(const Eigen::MatrixXd& sample_cov, const TaperMatrix& taper) {
  if (sample_cov.rows() != taper.matrix.rows() || sample_cov.cols() != taper.matrix.cols()) {
    throw ValidationError("taper and covariance shapes differ");
  }
  if (!(sample_cov.diagonal().array() > 0.0).all()) {
    throw ValidationError("covariance to taper needs a strictly positive diagonal");
  }
  return sample_cov.cwiseProduct(taper.matrix);
}

std::vector<double> default_taper_candidates() {
  constexpr int kCount = 32;
  std::vector<double> out(kCount);
  for (int i = 0; i < kCount; ++i) {
    out[static_cast<std::size_t>(i)] =
        std::pow(10.0, -1.0 + 3.0 * static_cast<double>(i) / (kCount - 1));
  }
  return out;
}

TaperFit fit_taper_range(const Eigen::MatrixXd& samples, const SpatialGrid& grid,
                         const std::vector<double>& candidates) {
  check_candidates(candidates);
  const Index m = samples.rows();
  const Index p = samples.cols();
  if (p != grid.size()) {
    throw ValidationError("sample width " + std::to_string(p) + " does not match the " +
                          std::to_string(grid.size()) + "-site grid");
  }
  if (candidates.size() == 1) {
    return {candidates.front(), candidates, {0.0}};
  }
  if (m < 3) {
    throw InsufficientEnsembleError("taper range fit needs at least 3 members");
  }

  // Centering at the full mean leaves every leave-one-out covariance unchanged
  // and keeps the downdates well conditioned.
  const Eigen::RowVectorXd grand_mean = samples.colwise().mean();
  const Eigen::MatrixXd x = samples.rowwise() - grand_mean;
  const Eigen::MatrixXd cross = x.transpose() * x;
  const Eigen::VectorXd total = x.colwise().sum().transpose();
  const auto md = static_cast<double>(m);

  std::vector<Eigen::MatrixXd> loo_cov(static_cast<std::size_t>(m));
  std::vector<Eigen::VectorXd> loo_resid(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) {
    const Eigen::VectorXd xk = x.row(k).transpose();
    const Eigen::VectorXd rest_sum = total - xk;
    const Eigen::VectorXd rest_mean = rest_sum / (md - 1.0);
    loo_cov[static_cast<std::size_t>(k)] =
        symmetrize((cross - xk * xk.transpose() - rest_sum * rest_mean.transpose()) /
                   (md - 2.0));
    loo_resid[static_cast<std::size_t>(k)] = xk - rest_mean;
  }

  const Eigen::MatrixXd distances = grid.distances();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  TaperFit fit{candidates.front(), candidates,
               std::vector<double>(candidates.size(),
                                   -std::numeric_limits<double>::infinity())};
  parallel_for(candidates.size(), [&](std::size_t c) {
    const Eigen::MatrixXd taper = exponential_correlation(distances, candidates[c]);
    double total_ll = 0.0;
    try {
      for (Index k = 0; k < m; ++k) {
        const SpdFactor factor(loo_cov[static_cast<std::size_t>(k)].cwiseProduct(taper),
                               "tapered covariance");
        const Eigen::VectorXd& d = loo_resid[static_cast<std::size_t>(k)];
        const Eigen::VectorXd z = factor.llt().matrixL().solve(d);
        total_ll += -0.5 * (factor.log_det() + z.squaredNorm() +
                            static_cast<double>(p) * log_2pi);
      }
    } catch (const NumericalError&) {
      return;
    }
    fit.log_likelihood[c] = std::isfinite(total_ll)
                                ? total_ll
                                : -std::numeric_limits<double>::infinity();
  });

  choose_best(fit);
  return fit;
}

TaperFit fit_taper_range_known_base(const Eigen::MatrixXd& samples,
                                    const Eigen::MatrixXd& base_cov, const SpatialGrid& grid,
                                    const std::vector<double>& candidates) {
  check_candidates(candidates);
  const Index m = samples.rows();
  const Index p = samples.cols();
  if (p != grid.size() || base_cov.rows() != p || base_cov.cols() != p) {
    throw ValidationError("samples, base covariance and grid sizes differ");
  }
  if (m < 2) throw InsufficientEnsembleError("taper range fit needs at least 2 members");
  if (!(base_cov.diagonal().array() > 0.0).all()) {
    throw ValidationError("base covariance needs a strictly positive diagonal");
  }
  if (candidates.size() == 1) {
    return {candidates.front(), candidates, {0.0}};
  }

  const Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  const Eigen::MatrixXd distances = grid.distances();
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const auto md = static_cast<double>(m);
  TaperFit fit{candidates.front(), candidates,
               std::vector<double>(candidates.size(),
                                   -std::numeric_limits<double>::infinity())};
  parallel_for(candidates.size(), [&](std::size_t c) {
    try {
      const Eigen::MatrixXd cov =
          base_cov.cwiseProduct(exponential_correlation(distances, candidates[c]));
      const SpdFactor factor(cov, "tapered covariance");
      const Eigen::MatrixXd z = factor.llt().matrixL().solve(centered.transpose());
      const double ll = -0.5 * (md * (factor.log_det() + static_cast<double>(p) * log_2pi) +
                                z.squaredNorm());
      if (std::isfinite(ll)) fit.log_likelihood[c] = ll;
    } catch (const NumericalError&) {
    }
  });
  choose_best(fit);
  return fit;
}

}  // namespace enkfcal
