#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "degpd/links.hpp"
#include "degpd/math.hpp"
#include "degpd/optim.hpp"
#include "degpd/parallel.hpp"

// Maximum-likelihood estimation for iid (constant-parameter) models:
// likelihood evaluation, quasi-Newton ascent over link-transformed
// parameters, numerical-Hessian covariance, parametric bootstrap, AIC/BIC.

namespace degpd {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// PMF values below this are floored before taking logs and the objective is
// marked suspect; an optimizer step into invalid parameter territory returns
// -inf instead of raising.
inline constexpr double kPmfFloor = 1e-300;

namespace detail {

// Count data repeat heavily, so iid likelihoods are evaluated over the
// frequency table rather than the raw sequence.
struct CountTable {
  std::vector<std::pair<long long, long long>> freq;  // (value, count)
  std::size_t n = 0;
  long long n_zero = 0;

  static CountTable from(std::span<const long long> data) {
    CountTable t;
    t.n = data.size();
    std::map<long long, long long> acc;
    for (long long k : data) {
      if (k < 0) throw std::invalid_argument("count data must be non-negative");
      ++acc[k];
    }
    t.freq.assign(acc.begin(), acc.end());
    auto it = acc.find(0);
    t.n_zero = (it == acc.end()) ? 0 : it->second;
    return t;
  }
};

inline double loglik_table(const ModelSpec& spec, const Eigen::VectorXd& natural,
                           const CountTable& table, bool* floored = nullptr) {
  if (!params_valid(spec, natural)) return kNegInf;
  const AnyModel model = make_model(spec, natural);
  double ll = 0.0;
  for (const auto& [k, count] : table.freq) {
    double p = pmf(model, k);
    if (!(p > kPmfFloor)) {
      p = kPmfFloor;
      if (floored) *floored = true;
    }
    ll += double(count) * std::log(p);
  }
  return std::isfinite(ll) ? ll : kNegInf;
}

}  // namespace detail

/// Sum of log PMF over the data at the given natural-scale parameters.
/// Returns -inf when the parameters are invalid for the family.
inline double loglik(const ModelSpec& spec, const Eigen::VectorXd& natural,
                     std::span<const long long> data) {
  if (data.empty()) throw std::invalid_argument("loglik: data must be nonempty");
  return detail::loglik_table(spec, natural, detail::CountTable::from(data));
}

struct InformationCriteria {
  double aic;
  double bic;
};

inline InformationCriteria information_criteria(double loglik, int n_params,
                                                std::size_t n_obs) {
  if (n_obs < 1) throw std::invalid_argument("information_criteria: n_obs >= 1");
  return {-2.0 * loglik + 2.0 * n_params,
          -2.0 * loglik + n_params * std::log(double(n_obs))};
}

struct FitOptions {
  std::optional<Eigen::VectorXd> start;  // natural scale
  int max_iter = 300;
  double tol = 1e-6;
  bool compute_covariance = true;
};

struct FitResult {
  ModelSpec spec;
  Eigen::VectorXd estimates;       // natural scale
  Eigen::VectorXd link_estimates;  // unconstrained scale actually optimized
  double loglik = kNegInf;
  std::optional<Eigen::MatrixXd> covariance;  // link scale; absent if singular
  std::optional<Eigen::VectorXd> std_errors;  // natural scale, delta method
  std::optional<Eigen::VectorXd> link_std_errors;
  std::size_t n_obs = 0;
  int n_params = 0;
  bool converged = false;
  double grad_max_norm = 0.0;
  double tol_used = 0.0;
  int iterations = 0;
  bool loglik_floored = false;
  double aic = 0.0;
  double bic = 0.0;
  bool zero_warning = false;  // ZI family fitted to data without zeros
};

namespace detail {

inline Eigen::VectorXd default_start(const ModelSpec& spec, const CountTable& table,
                                     double xi0, double kappa0) {
  const auto names = spec.param_names();
  Eigen::VectorXd theta(names.size());
  double mean = 0.0;
  for (const auto& [k, c] : table.freq) mean += double(k) * double(c);
  mean /= double(table.n);
  const double zero_frac = double(table.n_zero) / double(table.n);
  double kappa1_start = kappa0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& nm = names[i];
    if (nm == "sigma") {
      theta[i] = mean + 1.0;
    } else if (nm == "xi") {
      theta[i] = xi0;
    } else if (nm == "pi") {
      theta[i] = std::max(1e-3, 0.5 * zero_frac);
    } else if (nm == "p") {
      theta[i] = 0.5;
    } else if (nm == "lambda") {
      theta[i] = std::max(mean, 1e-3);
    } else if (nm == "kappa2") {
      theta[i] = kappa1_start + 1.0;
    } else {  // kappa, delta, kappa1
      theta[i] = kappa0;
      kappa1_start = kappa0;
    }
  }
  return theta;
}

struct MleAttempt {
  BfgsResult opt;
  bool floored = false;
};

inline MleAttempt run_mle(const ModelSpec& spec, const ParamLinkMap& linkmap,
                          const CountTable& table, const Eigen::VectorXd& start_natural,
                          const FitOptions& opt) {
  MleAttempt attempt;
  Objective objective = [&](const Eigen::VectorXd& eta) {
    return loglik_table(spec, linkmap.to_natural(eta), table, &attempt.floored);
  };
  BfgsOptions bopt;
  bopt.max_iter = opt.max_iter;
  bopt.tol = opt.tol;
  attempt.opt = maximize_bfgs(objective, linkmap.to_link(start_natural), bopt);
  return attempt;
}

}  // namespace detail

/// Maximum-likelihood fit. Quasi-Newton ascent on the link scale with
/// finite-difference gradients; if the default start fails or stalls, a small
/// grid over (xi0, kappa0) is tried and the best finite optimum wins.
inline FitResult fit_mle(const ModelSpec& spec, std::span<const long long> data,
                         const FitOptions& opt = {}) {
  if (data.empty()) throw std::invalid_argument("fit_mle: data must be nonempty");
  const auto table = detail::CountTable::from(data);
  const ParamLinkMap linkmap(spec);

  std::vector<Eigen::VectorXd> starts;
  if (opt.start) {
    if (!params_valid(spec, *opt.start))
      throw std::invalid_argument("fit_mle: invalid start parameters");
    starts.push_back(*opt.start);
  } else {
    starts.push_back(detail::default_start(spec, table, 0.2, 1.0));
  }

  detail::MleAttempt best = detail::run_mle(spec, linkmap, table, starts[0], opt);
  const bool first_ok = std::isfinite(best.opt.value) && best.opt.converged;
  if (!first_ok) {
    for (double xi0 : {0.05, 0.2, 0.5}) {
      for (double k0 : {0.5, 1.0, 5.0}) {
        auto attempt = detail::run_mle(
            spec, linkmap, table, detail::default_start(spec, table, xi0, k0), opt);
        const bool better =
            std::isfinite(attempt.opt.value) &&
            (!std::isfinite(best.opt.value) ||
             (attempt.opt.converged && !best.opt.converged) ||
             (attempt.opt.converged == best.opt.converged &&
              attempt.opt.value > best.opt.value));
        if (better) best = attempt;
        if (best.opt.converged) break;
      }
      if (best.opt.converged) break;
    }
  }
  if (!std::isfinite(best.opt.value))
    throw FitError("fit_mle: no start produced a finite likelihood");

  FitResult fit;
  fit.spec = spec;
  fit.link_estimates = best.opt.x;
  fit.estimates = linkmap.to_natural(best.opt.x);
  fit.loglik = best.opt.value;
  fit.n_obs = table.n;
  fit.n_params = spec.n_params();
  fit.converged = best.opt.converged;
  fit.grad_max_norm = best.opt.gradient.lpNorm<Eigen::Infinity>();
  fit.tol_used = opt.tol;
  fit.iterations = best.opt.iterations;
  fit.loglik_floored = best.floored;
  fit.zero_warning = spec.zero_inflated() && table.n_zero == 0;
  const auto ic = information_criteria(fit.loglik, fit.n_params, fit.n_obs);
  fit.aic = ic.aic;
  fit.bic = ic.bic;

  if (opt.compute_covariance) {
    Objective objective = [&](const Eigen::VectorXd& eta) {
      return detail::loglik_table(spec, linkmap.to_natural(eta), table);
    };
    const Eigen::MatrixXd H = fd_hessian(objective, fit.link_estimates);
    const Eigen::MatrixXd negH = -H;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(negH);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      Eigen::MatrixXd cov = ldlt.solve(
          Eigen::MatrixXd::Identity(negH.rows(), negH.cols()));
      cov = 0.5 * (cov + cov.transpose()).eval();
      if (cov.allFinite()) {
        fit.covariance = cov;
        fit.link_std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
        const Eigen::MatrixXd J = linkmap.jacobian(fit.link_estimates);
        const Eigen::MatrixXd natural_cov = J * cov * J.transpose();
        fit.std_errors = natural_cov.diagonal().cwiseMax(0.0).cwiseSqrt();
      }
    }
  }
  return fit;
}

/// Natural-scale standard errors of a fit; absent when the Hessian was
/// singular at the optimum.
inline std::optional<Eigen::VectorXd> std_errors(const FitResult& fit) {
  return fit.std_errors;
}

struct BootstrapOptions {
  int B = 200;
  double level = 0.95;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct BootstrapResult {
  std::vector<std::string> param_names;
  Eigen::MatrixXd lower_upper;  // n_params x 2
  Eigen::MatrixXd replicate_estimates;  // successful replicates x n_params
  int n_failed = 0;
  int B = 0;
  double level = 0.0;
  bool high_failure_warning = false;  // more than 20% of refits failed
};

namespace detail {

// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (double(v.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double w = pos - double(lo);
  return (1.0 - w) * v[lo] + w * v[hi];
}

}  // namespace detail

/// Parametric bootstrap confidence intervals: simulate B datasets of size
/// n_obs from the fitted model, refit each (replicate r seeded with
/// sub_seed(seed, r)), take percentile intervals. Failed refits are dropped
/// and counted.
inline BootstrapResult bootstrap_ci(const FitResult& fit,
                                    const BootstrapOptions& opt = {}) {
  if (!fit.converged)
    throw FitError("bootstrap_ci: requires a converged fit");
  const AnyModel model = make_model(fit.spec, fit.estimates);
  const int np = fit.n_params;

  Eigen::MatrixXd estimates(opt.B, np);
  std::vector<char> ok(opt.B, 0);

  parallel_for(opt.B, opt.jobs, [&](std::size_t r) {
    const auto draws = sample(model, fit.n_obs, sub_seed(opt.seed, r));
    FitOptions refit_opt;
    refit_opt.start = fit.estimates;
    refit_opt.compute_covariance = false;
    try {
      FitResult refit = fit_mle(fit.spec, draws, refit_opt);
      if (refit.converged) {
        estimates.row(r) = refit.estimates.transpose();
        ok[r] = 1;
      }
    } catch (const FitError&) {
      // dropped and counted
    }
  });

  BootstrapResult out;
  out.param_names = fit.spec.param_names();
  out.B = opt.B;
  out.level = opt.level;
  int n_ok = 0;
  for (char c : ok) n_ok += c;
  out.n_failed = opt.B - n_ok;
  out.high_failure_warning = out.n_failed > opt.B / 5;
  if (n_ok == 0) throw FitError("bootstrap_ci: every refit failed");

  out.replicate_estimates.resize(n_ok, np);
  int row = 0;
  for (int r = 0; r < opt.B; ++r) {
    if (ok[r]) out.replicate_estimates.row(row++) = estimates.row(r);
  }

  out.lower_upper.resize(np, 2);
  const double alpha = (1.0 - opt.level) / 2.0;
  for (int j = 0; j < np; ++j) {
    std::vector<double> col(out.replicate_estimates.col(j).data(),
                            out.replicate_estimates.col(j).data() + n_ok);
    out.lower_upper(j, 0) = detail::percentile(col, alpha);
    out.lower_upper(j, 1) = detail::percentile(std::move(col), 1.0 - alpha);
  }
  return out;
}

}  // namespace degpd
