#include "enkfcal/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "enkfcal/errors.hpp"
#include "enkfcal/linalg.hpp"
#include "enkfcal/parallel.hpp"
#include "enkfcal/random.hpp"

namespace enkfcal {

DesignProblem::DesignProblem(MomentEstimate moments_in, Eigen::MatrixXd tapered_cov_in,
                             double obs_noise_var_in, SpatialGrid grid_in, Index n_in)
    : moments(std::move(moments_in)),
      tapered_cov(std::move(tapered_cov_in)),
      obs_noise_var(obs_noise_var_in),
      grid(std::move(grid_in)),
      n(n_in) {
  const Index de = moments.d_eta();
  if (tapered_cov.rows() != de || tapered_cov.cols() != de) {
    throw ValidationError("tapered covariance must be d_eta x d_eta");
  }
  if (grid.size() != de) {
    throw ValidationError("grid has " + std::to_string(grid.size()) + " sites but d_eta is " +
                          std::to_string(de));
  }
  if (!(obs_noise_var > 0.0) || !std::isfinite(obs_noise_var)) {
    throw ValidationError("observation noise variance must be positive and finite");
  }
  if (n < 1 || n > de) {
    throw ValidationError("number of sites must be in [1, " + std::to_string(de) + "]");
  }
  if (!tapered_cov.allFinite() || !is_symmetric(tapered_cov)) {
    throw ValidationError("tapered covariance must be finite and symmetric");
  }
  if (!is_psd(moments.with_sigma_ee(tapered_cov).sigma(), 1e-9)) {
    throw ValidationError(
        "joint prior with the tapered eta block is not positive semidefinite; "
        "taper the regression residual instead or use a longer range");
  }
}

DesignProblem DesignProblem::from_ensemble(const JointEnsemble& ensemble, SpatialGrid grid,
                                           double taper_range, double obs_noise_var,
                                           Index n, TaperTarget target) {
  MomentEstimate moments = compute_moments(ensemble);
  const TaperMatrix taper = exponential_taper(grid, taper_range);
  if (target == TaperTarget::sample) {
    Eigen::MatrixXd tapered = taper_apply(moments.sigma_ee(), taper);
    return {std::move(moments), std::move(tapered), obs_noise_var, std::move(grid), n};
  }
  const SpdFactor tt(moments.sigma_tt(), "prior Sigma_theta_theta");
  const Eigen::MatrixXd explained =
      symmetrize(moments.sigma_et() * tt.solve(Eigen::MatrixXd(moments.sigma_te())));
  const Eigen::MatrixXd residual = symmetrize(moments.sigma_ee() - explained);
  Eigen::MatrixXd tapered = symmetrize(explained + residual.cwiseProduct(taper.matrix));
  return {std::move(moments), std::move(tapered), obs_noise_var, std::move(grid), n};
}

namespace {

void check_sites(const DesignProblem& problem, const std::vector<Index>& sites) {
  std::vector<Index> sorted = sites;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("design sites must be distinct");
  }
  for (Index s : sorted) {
    if (s < 0 || s >= problem.candidates()) {
      throw ValidationError("design site " + std::to_string(s) + " out of range");
    }
  }
}

// Evaluates designs without re-validating; used in the search loops.
class CriterionEvaluator {
 public:
  explicit CriterionEvaluator(const DesignProblem& problem)
      : problem_(problem),
        sigma_tt_(problem.moments.sigma_tt()),
        sigma_te_(problem.moments.sigma_te()) {}

  Eigen::MatrixXd posterior(const std::vector<Index>& sites) const {
    const auto n = static_cast<Index>(sites.size());
    if (n == 0) return sigma_tt_;
    Eigen::MatrixXd w(n, n);
    Eigen::MatrixXd cross(n, sigma_tt_.rows());
    for (Index i = 0; i < n; ++i) {
      const Index si = sites[static_cast<std::size_t>(i)];
      for (Index j = 0; j < n; ++j) {
        w(i, j) = problem_.tapered_cov(si, sites[static_cast<std::size_t>(j)]);
      }
      w(i, i) += problem_.obs_noise_var;
      cross.row(i) = sigma_te_.col(si).transpose();
    }
    const SpdFactor factor(symmetrize(w), "design system H Sigma_ee(r) H' + Sigma_y");
    const Eigen::MatrixXd half = factor.llt().matrixL().solve(cross);
    return symmetrize(sigma_tt_ - half.transpose() * half);
  }

  double criterion(const std::vector<Index>& sites) const {
    const Eigen::MatrixXd post = posterior(sites);
    const Eigen::LLT<Eigen::MatrixXd> llt(post);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("theta posterior covariance is not positive definite");
    }
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }

 private:
  const DesignProblem& problem_;
  Eigen::MatrixXd sigma_tt_;
  Eigen::MatrixXd sigma_te_;
};

Design local_exchange(const CriterionEvaluator& eval, std::vector<Index> sites, Index p) {
  double current = eval.criterion(sites);
  std::vector<char> selected(static_cast<std::size_t>(p), 0);
  for (Index s : sites) selected[static_cast<std::size_t>(s)] = 1;

  for (;;) {
    double best_gain = 1e-12;
    std::size_t best_pos = 0;
    Index best_in = -1;
    double best_value = current;
    for (Index in = 0; in < p; ++in) {
      if (selected[static_cast<std::size_t>(in)]) continue;
      for (std::size_t pos = 0; pos < sites.size(); ++pos) {
        const Index out = sites[pos];
        sites[pos] = in;
        const double value = eval.criterion(sites);
        sites[pos] = out;
        if (current - value > best_gain) {
          best_gain = current - value;
          best_pos = pos;
          best_in = in;
          best_value = value;
        }
      }
    }
    if (best_in < 0) break;
    selected[static_cast<std::size_t>(sites[best_pos])] = 0;
    selected[static_cast<std::size_t>(best_in)] = 1;
    sites[best_pos] = best_in;
    current = best_value;
  }
  std::sort(sites.begin(), sites.end());
  return {std::move(sites), current};
}

std::vector<Index> random_subset(Index p, Index n, RandomStream& rng) {
  std::vector<Index> pool(static_cast<std::size_t>(p));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < n; ++i) {
    const auto remaining = static_cast<std::size_t>(p - i);
    const std::size_t j = static_cast<std::size_t>(i) + rng.below(remaining);
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(n));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

Eigen::MatrixXd posterior_param_cov(const DesignProblem& problem,
                                    const std::vector<Index>& sites) {
  check_sites(problem, sites);
  return CriterionEvaluator(problem).posterior(sites);
}

double d_criterion(const DesignProblem& problem, const std::vector<Index>& sites) {
  check_sites(problem, sites);
  return CriterionEvaluator(problem).criterion(sites);
}

std::uint64_t binomial(std::uint64_t p, std::uint64_t n) {
  if (n > p) return 0;
  n = std::min(n, p - n);
  unsigned __int128 value = 1;
  for (std::uint64_t i = 1; i <= n; ++i) {
    value = value * (p - n + i) / i;
    if (value > std::numeric_limits<std::uint64_t>::max()) {
      return std::numeric_limits<std::uint64_t>::max();
    }
  }
  return static_cast<std::uint64_t>(value);
}

Design exhaustive_design(const DesignProblem& problem) {
  const Index p = problem.candidates();
  const Index n = problem.n;
  if (binomial(static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(n)) > 1'000'000) {
    throw ValidationError("exhaustive design search limited to 10^6 subsets");
  }
  const CriterionEvaluator eval(problem);
  std::vector<Index> sites(static_cast<std::size_t>(n));
  std::iota(sites.begin(), sites.end(), Index{0});
  Design best{sites, eval.criterion(sites)};
  // Lexicographic enumeration; strict improvement keeps the earliest tie.
  for (;;) {
    Index i = n - 1;
    while (i >= 0 && sites[static_cast<std::size_t>(i)] == p - n + i) --i;
    if (i < 0) break;
    ++sites[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < n; ++j) {
      sites[static_cast<std::size_t>(j)] = sites[static_cast<std::size_t>(j - 1)] + 1;
    }
    const double value = eval.criterion(sites);
    if (value < best.criterion) best = {sites, value};
  }
  return best;
}

ExchangeReport fedorov_exchange_report(const DesignProblem& problem, int restarts,
                                       std::uint64_t seed) {
  if (restarts < 1) throw ValidationError("exchange needs at least one restart");
  const CriterionEvaluator eval(problem);
  const auto count = static_cast<std::size_t>(restarts);
  ExchangeReport report{{}, std::vector<double>(count), std::vector<Design>(count)};
  parallel_for(count, [&](std::size_t t) {
    RandomStream rng(seed, t);
    std::vector<Index> start = random_subset(problem.candidates(), problem.n, rng);
    report.initial_criteria[t] = eval.criterion(start);
    report.restart_results[t] = local_exchange(eval, std::move(start), problem.candidates());
  });
  report.best = report.restart_results.front();
  for (std::size_t t = 1; t < count; ++t) {
    if (report.restart_results[t].criterion < report.best.criterion) {
      report.best = report.restart_results[t];
    }
  }
  return report;
}

Design fedorov_exchange(const DesignProblem& problem, int restarts, std::uint64_t seed) {
  return fedorov_exchange_report(problem, restarts, seed).best;
}

}  // namespace enkfcal
