#include "enkfcal/forward_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "enkfcal/errors.hpp"
#include "enkfcal/parallel.hpp"
#include "enkfcal/random.hpp"

namespace enkfcal {

ForwardModel::ForwardModel(Function function, Index d_theta, Index d_eta,
                           std::string name)
    : function_(std::move(function)), d_theta_(d_theta), d_eta_(d_eta),
      name_(std::move(name)) {
  if (!function_) throw ValidationError("forward model has no function");
  if (d_theta_ < 1 || d_eta_ < 1) {
    throw ValidationError("forward model dimensions must be positive");
  }
}

Eigen::VectorXd ForwardModel::evaluate(const Eigen::VectorXd& theta) const {
  if (theta.size() != d_theta_) {
    throw ValidationError("forward model expects " + std::to_string(d_theta_) +
                          " parameters, got " + std::to_string(theta.size()));
  }
  Eigen::VectorXd eta;
  try {
    eta = function_(theta);
  } catch (const std::exception& e) {
    throw ForwardModelError(std::string("forward model failed: ") + e.what(), 0);
  }
  if (eta.size() != d_eta_) {
    throw ForwardModelError("forward model returned " + std::to_string(eta.size()) +
                                " outputs, expected " + std::to_string(d_eta_),
                            0);
  }
  if (!eta.allFinite()) {
    throw ForwardModelError("forward model returned non-finite output", 0);
  }
  return eta;
}

Eigen::MatrixXd ForwardModel::evaluate_rows(const Eigen::MatrixXd& thetas) const {
  if (thetas.cols() != d_theta_) {
    throw ValidationError("forward model expects " + std::to_string(d_theta_) +
                          " parameter columns, got " + std::to_string(thetas.cols()));
  }
  Eigen::MatrixXd etas(thetas.rows(), d_eta_);
  parallel_for(static_cast<std::size_t>(thetas.rows()), [&](std::size_t k) {
    const auto row = static_cast<Index>(k);
    try {
      etas.row(row) = evaluate(thetas.row(row).transpose()).transpose();
    } catch (const ForwardModelError& e) {
      throw ForwardModelError(std::string(e.what()) + " (member " + std::to_string(k) + ")",
                              k);
    }
  });
  return etas;
}

JointEnsemble build_ensemble(const ForwardModel& model, const Eigen::MatrixXd& thetas) {
  return {thetas, model.evaluate_rows(thetas)};
}

double toy_forward(double theta) { return 0.5 * std::erfc(-theta / std::sqrt(2.0)); }

ForwardModel toy_model() {
  return {[](const Eigen::VectorXd& theta) {
            return Eigen::VectorXd::Constant(1, toy_forward(theta(0)));
          },
          1, 1, "toy"};
}

LinearForward::LinearForward(Eigen::VectorXd intercept, Eigen::MatrixXd slope)
    : intercept_(std::move(intercept)), slope_(std::move(slope)) {
  if (slope_.rows() != intercept_.size() || slope_.cols() < 1 || slope_.rows() < 1) {
    throw ValidationError("linear forward model: slope must be d_eta x d_theta");
  }
}

Eigen::VectorXd LinearForward::operator()(const Eigen::VectorXd& theta) const {
  if (theta.size() != slope_.cols()) {
    throw ValidationError("linear forward model: parameter length mismatch");
  }
  return intercept_ + slope_ * theta;
}

ForwardModel LinearForward::model() const {
  return {[self = *this](const Eigen::VectorXd& theta) { return self(theta); },
          slope_.cols(), slope_.rows(), "linear"};
}

MomentEstimate LinearForward::joint_moments(const Eigen::VectorXd& mu_theta,
                                            const Eigen::MatrixXd& sigma_tt) const {
  const Index dt = slope_.cols();
  const Index de = slope_.rows();
  if (mu_theta.size() != dt || sigma_tt.rows() != dt || sigma_tt.cols() != dt) {
    throw ValidationError("linear forward model: moment shapes do not match");
  }
  Eigen::VectorXd mu(dt + de);
  mu << mu_theta, intercept_ + slope_ * mu_theta;
  Eigen::MatrixXd sigma(dt + de, dt + de);
  const Eigen::MatrixXd cross = sigma_tt * slope_.transpose();
  sigma.topLeftCorner(dt, dt) = sigma_tt;
  sigma.topRightCorner(dt, de) = cross;
  sigma.bottomLeftCorner(de, dt) = cross.transpose();
  sigma.bottomRightCorner(de, de) = slope_ * cross;
  return {std::move(mu), 0.5 * (sigma + sigma.transpose()), dt};
}

namespace {

// Unnormalized bump, evaluated at cell centres.
double ice_bump(Index col, Index row, Index nx, Index ny) {
  const double x = (static_cast<double>(col) + 0.5) / static_cast<double>(nx);
  const double y = (static_cast<double>(row) + 0.5) / static_cast<double>(ny);
  return x * y * (1.0 - y) * (1.0 - x + 0.2);
}

}  // namespace

Eigen::VectorXd synthetic_ice_thickness(double theta1, double theta2, Index nx,
                                        Index ny) {
  if (!(theta1 >= 0.0 && theta1 <= 1.0 && theta2 >= 0.0 && theta2 <= 1.0)) {
    throw ValidationError("ice surrogate parameters must lie in [0, 1]");
  }
  if (nx < 1 || ny < 1) throw ValidationError("ice surrogate grid must be non-empty");
  constexpr double kBase = 1.0;
  constexpr double kSensitivity = 0.5;
  Eigen::VectorXd bump(nx * ny);
  for (Index row = 0; row < ny; ++row) {
    for (Index col = 0; col < nx; ++col) bump(row * nx + col) = ice_bump(col, row, nx, ny);
  }
  bump /= bump.maxCoeff();
  return (kBase + (bump * (1.0 + kSensitivity * (theta2 - theta1))).array()).matrix();
}

ForwardModel ice_model(Index nx, Index ny) {
  return {[nx, ny](const Eigen::VectorXd& theta) {
            return synthetic_ice_thickness(theta(0), theta(1), nx, ny);
          },
          2, nx * ny, "ice"};
}

ParameterBox::ParameterBox(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() < 1) {
    throw ValidationError("parameter box bounds must be non-empty and equal length");
  }
  if (!(lower.array() < upper.array()).all()) {
    throw ValidationError("parameter box needs lower < upper in every coordinate");
  }
}

bool ParameterBox::contains(const Eigen::VectorXd& theta) const {
  return theta.size() == dim() && (theta.array() >= lower.array()).all() &&
         (theta.array() <= upper.array()).all();
}

ParameterBox ParameterBox::unit(Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

ParameterBox ParameterBox::cosmology() {
  Eigen::VectorXd lo(5), hi(5);
  lo << 0.8, 0.5, 0.6, 0.0, 0.02;
  hi << 1.4, 1.1, 1.6, 0.6, 0.12;
  return {lo, hi};
}

namespace {

Eigen::MatrixXd unit_latin_hypercube(Index m, Index d, RandomStream& rng) {
  Eigen::MatrixXd u(m, d);
  std::vector<Index> perm(static_cast<std::size_t>(m));
  for (Index j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), Index{0});
    for (std::size_t i = perm.size(); i > 1; --i) {
      std::swap(perm[i - 1], perm[rng.below(i)]);
    }
    for (Index i = 0; i < m; ++i) {
      u(i, j) = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + rng.uniform()) /
                static_cast<double>(m);
    }
  }
  return u;
}

Eigen::MatrixXd to_box(const Eigen::MatrixXd& u, const ParameterBox& box) {
  const Eigen::RowVectorXd width = (box.upper - box.lower).transpose();
  return (u.array().rowwise() * width.array()).rowwise() + box.lower.transpose().array();
}

double min_pair_distance(const Eigen::MatrixXd& u) {
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < u.rows(); ++i) {
    for (Index j = i + 1; j < u.rows(); ++j) {
      best = std::min(best, (u.row(i) - u.row(j)).norm());
    }
  }
  return best;
}

}  // namespace

Eigen::MatrixXd latin_hypercube(Index m, const ParameterBox& box, std::uint64_t seed) {
  if (m < 1) throw ValidationError("latin hypercube needs at least one point");
  RandomStream rng(seed);
  return to_box(unit_latin_hypercube(m, box.dim(), rng), box);
}

Eigen::MatrixXd maximin_latin_hypercube(Index m, const ParameterBox& box,
                                        std::uint64_t seed, int tries) {
  if (m < 1) throw ValidationError("latin hypercube needs at least one point");
  if (tries < 1) throw ValidationError("maximin search needs at least one try");
  Eigen::MatrixXd best;
  double best_distance = -1.0;
  for (int t = 0; t < tries; ++t) {
    RandomStream rng(seed, static_cast<std::uint64_t>(t));
    Eigen::MatrixXd u = unit_latin_hypercube(m, box.dim(), rng);
    const double d = min_pair_distance(u);
    if (d > best_distance) {
      best_distance = d;
      best = std::move(u);
    }
  }
  return to_box(best, box);
}

}  // namespace enkfcal
