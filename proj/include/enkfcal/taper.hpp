#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "enkfcal/ensemble.hpp"

namespace enkfcal {

/// Measurement sites in lattice units (neighbouring sites are 1 apart).
class SpatialGrid {
 public:
  explicit SpatialGrid(std::vector<std::array<double, 2>> sites);
  // nx columns by ny rows; site index = row * nx + col, coordinates (col, row).
  static SpatialGrid lattice(Index nx, Index ny);

  Index size() const { return static_cast<Index>(sites_.size()); }
  const std::vector<std::array<double, 2>>& sites() const { return sites_; }
  // Zero for irregular grids.
  Index nx() const { return nx_; }
  Index ny() const { return ny_; }
  // (row, col) of a lattice site.
  std::array<Index, 2> row_col(Index site) const;

  Eigen::MatrixXd distances() const;

  // Same sites in a new order: result site i is this grid's site order[i].
  SpatialGrid permuted(const std::vector<Index>& order) const;

 private:
  std::vector<std::array<double, 2>> sites_;
  Index nx_ = 0;
  Index ny_ = 0;
};

struct TaperMatrix {
  double r;
  Eigen::MatrixXd matrix;
};

// R_ij = exp(-|s_i - s_j| / r). Throws ValidationError for r <= 0.
TaperMatrix exponential_taper(const SpatialGrid& grid, double r);

// Elementwise product S o R. S must have a strictly positive diagonal.
Eigen::MatrixXd taper_apply(const Eigen::MatrixXd& sample_cov, const TaperMatrix& taper);

// 32 log-spaced ranges from 0.1 to 100 lattice units.
std::vector<double> default_taper_candidates();

struct TaperFit {
  double r_star;
  std::vector<double> candidates;
  std::vector<double> log_likelihood;  // -inf where the candidate failed
};

// Chooses the taper range by leave-one-out Gaussian log likelihood: member k
// is scored under N(mean_{-k}, S_{-k} o R(r)) where the moments exclude k.
// The in-sample likelihood with S from all members increases without bound
// as r grows whenever m <= p, so it cannot select a range. Ties go to the
// smaller r. `samples` holds one eta vector per row.
TaperFit fit_taper_range(const Eigen::MatrixXd& samples, const SpatialGrid& grid,
                         const std::vector<double>& candidates);

// Maximum likelihood range when the covariance being tapered is a known
// matrix S rather than an estimate from the same samples:
//   L(r) = prod_k N(eta_k; mean, S o R(r)), mean = sample mean.
// This is the setting in which the range of a N(0, S o R(r0)) field is
// identifiable.
TaperFit fit_taper_range_known_base(const Eigen::MatrixXd& samples,
                                    const Eigen::MatrixXd& base_cov, const SpatialGrid& grid,
                                    const std::vector<double>& candidates);

}  // namespace enkfcal
