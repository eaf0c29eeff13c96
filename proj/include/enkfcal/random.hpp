#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include <Eigen/Dense>

namespace enkfcal {

// Mixes a 64-bit value with the SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Seed of the independent substream `stream` of `seed`. Substreams let
// per-member draws run in any order (or in parallel) with identical results.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Counter-based SplitMix64 generator with Box-Muller normals.
///
/// Only integer arithmetic and the C math library (log, sqrt, cos, sin) are
/// involved, so a given (seed, stream) reproduces the same draws on every
/// platform with an IEEE-754 libm. The standard library's distributions are
/// deliberately not used; their algorithms are implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double normal() noexcept;
  // Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n) noexcept;

  Eigen::VectorXd normal_vector(Eigen::Index n);

 private:
  std::uint64_t counter_;
  std::optional<double> spare_;
};

// Draws N(mean, cov) vectors as mean + L z with L a Cholesky factor of cov.
// Singular PSD covariances fall back to a symmetric eigen square root.
class GaussianSampler {
 public:
  GaussianSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);

  Eigen::VectorXd draw(RandomStream& rng) const;
  // m draws as rows; row k uses substream (seed, k).
  Eigen::MatrixXd draw_rows(Eigen::Index m, std::uint64_t seed) const;

  const Eigen::MatrixXd& factor() const { return factor_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
};

}  // namespace enkfcal
