#include "enkfcal/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "enkfcal/errors.hpp"
#include "enkfcal/parallel.hpp"

namespace enkfcal {
namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(mix64(seed) + kGolden * (stream + 1));
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept
    : counter_(derive_seed(seed, stream)) {}

std::uint64_t RandomStream::next_u64() noexcept {
  counter_ += kGolden;
  return mix64(counter_);
}

double RandomStream::uniform() noexcept {
  // 53 random bits, offset by half an ulp to stay off 0 and 1.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() noexcept {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::size_t RandomStream::below(std::size_t n) noexcept {
  // Lemire's multiply-shift with rejection of the biased low band.
  const std::uint64_t bound = n;
  unsigned __int128 product = static_cast<unsigned __int128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(product);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::size_t>(product >> 64);
}

Eigen::VectorXd RandomStream::normal_vector(Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal();
  return z;
}

GaussianSampler::GaussianSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov)
    : mean_(std::move(mean)) {
  if (cov.rows() != cov.cols() || cov.rows() != mean_.size()) {
    throw ValidationError("GaussianSampler: covariance shape does not match mean");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd evals = eig.eigenvalues();
  const double tol = -1e-10 * std::max(1.0, cov.diagonal().cwiseAbs().sum());
  if (evals.minCoeff() < tol) {
    throw ValidationError("GaussianSampler: covariance is not positive semidefinite");
  }
  factor_ = eig.eigenvectors() * evals.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd GaussianSampler::draw(RandomStream& rng) const {
  return mean_ + factor_ * rng.normal_vector(factor_.cols());
}

Eigen::MatrixXd GaussianSampler::draw_rows(Eigen::Index m, std::uint64_t seed) const {
  Eigen::MatrixXd out(m, mean_.size());
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t k) {
    RandomStream rng(seed, k);
    out.row(static_cast<Eigen::Index>(k)) = draw(rng).transpose();
  });
  return out;
}

}  // namespace enkfcal
