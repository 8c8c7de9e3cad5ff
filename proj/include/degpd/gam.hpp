#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "degpd/dataframe.hpp"
#include "degpd/formula.hpp"
#include "degpd/inference.hpp"
#include "degpd/links.hpp"
#include "degpd/math.hpp"
#include "degpd/optim.hpp"
#include "degpd/parallel.hpp"
#include "degpd/splines.hpp"

// Covariate-dependent distribution parameters: additive spline predictors per
// parameter with quadratic (second-difference) penalties, penalized MLE by
// quasi-Newton ascent, smoothing selection on an AIC grid, trace-based
// effective degrees of freedom, and Wald term tests.

namespace degpd {

struct GamTerm {
  std::string param;
  std::string covariate;
  BSplineBasis basis;
  Eigen::VectorXd colmeans;  // of the uncentered design; defines the centering
  Eigen::MatrixXd centering;  // Z, K x (K-1)
  Eigen::MatrixXd design;     // centered, n x (K-1)
  Eigen::MatrixXd penalty;    // centered, (K-1) x (K-1)
  int offset = 0;             // first coefficient index in beta
  int n_coef = 0;             // K-1
};

struct GamDesign {
  ModelSpec spec;
  std::vector<std::string> params;
  std::vector<Link> links;          // per distribution parameter
  std::vector<int> intercept_index; // per distribution parameter
  std::vector<GamTerm> terms;
  int n_coef = 0;
  std::vector<long long> y;

  std::size_t n_obs() const { return y.size(); }

  /// Natural-scale parameter matrix, one row per observation.
  Eigen::MatrixXd thetas(const Eigen::VectorXd& beta) const {
    const std::size_t n = n_obs();
    const int d = static_cast<int>(params.size());
    Eigen::MatrixXd eta(n, d);
    for (int j = 0; j < d; ++j) eta.col(j).setConstant(beta[intercept_index[j]]);
    for (const auto& term : terms) {
      const int j = param_index(term.param);
      eta.col(j) += term.design * beta.segment(term.offset, term.n_coef);
    }
    Eigen::MatrixXd theta(n, d);
    for (int j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < n; ++i)
        theta(i, j) = link_invert(links[j], eta(i, j));
    }
    return theta;
  }

  int param_index(const std::string& name) const {
    for (std::size_t j = 0; j < params.size(); ++j)
      if (params[j] == name) return static_cast<int>(j);
    throw ConfigError("gam: unknown distribution parameter '" + name + "'");
  }
};

/// Build per-parameter design and penalty blocks from a formula. Coefficient
/// layout is deterministic: for each distribution parameter in family order,
/// its intercept, then the coefficients of each of its smooths in formula
/// order.
inline GamDesign assemble(const GamFormula& formula, const ModelSpec& spec,
                          const DataFrame& data, const std::string& response) {
  GamDesign gd;
  gd.spec = spec;
  gd.params = spec.param_names();
  gd.y = response_counts(data, response);
  for (const auto& part : formula.parts) {
    bool known = false;
    for (const auto& p : gd.params)
      if (p == part.param) known = true;
    if (!known)
      throw ConfigError("formula: '" + part.param + "' is not a parameter of family " +
                        family_to_string(spec.family));
  }

  for (const auto& p : gd.params) gd.links.push_back(link_for_param(p, spec.xi_link));

  int next = 0;
  for (const auto& p : gd.params) {
    gd.intercept_index.push_back(next++);
    const ParamFormula* pf = formula.find(p);
    if (!pf) continue;
    for (const auto& sm : pf->smooths) {
      if (!data.has_column(sm.covariate))
        throw ConfigError("formula: data has no column '" + sm.covariate + "'");
      const auto& x = data.column(sm.covariate);
      for (double v : x) {
        if (!std::isfinite(v))
          throw DataError("covariate '" + sm.covariate + "' contains non-finite values");
      }
      GamTerm term{p, sm.covariate, BSplineBasis::from_quantiles(x, sm.n_basis),
                   {}, {}, {}, {}, next, sm.n_basis - 1};
      Eigen::MatrixXd raw = term.basis.design(x);
      term.colmeans = raw.colwise().mean();
      term.centering = centering_transform(term.colmeans);
      term.design = raw * term.centering;
      term.penalty =
          term.centering.transpose() * term.basis.penalty() * term.centering;
      next += term.n_coef;
      gd.terms.push_back(std::move(term));
    }
  }
  gd.n_coef = next;
  return gd;
}

/// l(beta) - 1/2 sum_j lambda_j beta_j' S_j beta_j. Returns -inf when any
/// observation's parameters leave the family's domain.
inline double penalized_loglik(const GamDesign& gd, const Eigen::VectorXd& beta,
                               const std::vector<double>& lambdas,
                               double* unpenalized = nullptr) {
  const Eigen::MatrixXd theta = gd.thetas(beta);
  const std::size_t n = gd.n_obs();
  double ll = 0.0;
  Eigen::VectorXd row(theta.cols());
  for (std::size_t i = 0; i < n; ++i) {
    row = theta.row(i);
    if (!params_valid(gd.spec, row)) return kNegInf;
    const AnyModel model = make_model(gd.spec, row);
    double p = pmf(model, gd.y[i]);
    if (!(p > kPmfFloor)) p = kPmfFloor;
    ll += std::log(p);
  }
  if (!std::isfinite(ll)) return kNegInf;
  if (unpenalized) *unpenalized = ll;
  double pen = 0.0;
  for (std::size_t j = 0; j < gd.terms.size(); ++j) {
    const auto& t = gd.terms[j];
    const Eigen::VectorXd b = beta.segment(t.offset, t.n_coef);
    pen += lambdas[j] * b.dot(t.penalty * b);
  }
  return ll - 0.5 * pen;
}

/// Assembled block-diagonal penalty sum_j lambda_j S_j over all coefficients.
inline Eigen::MatrixXd penalty_matrix(const GamDesign& gd,
                                      const std::vector<double>& lambdas) {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(gd.n_coef, gd.n_coef);
  for (std::size_t j = 0; j < gd.terms.size(); ++j) {
    const auto& t = gd.terms[j];
    S.block(t.offset, t.offset, t.n_coef, t.n_coef) += lambdas[j] * t.penalty;
  }
  return S;
}

struct GamOptions {
  std::vector<double> lambda_grid = {1e-4, 0.00316227766016838, 1e-1, 1.0,
                                     31.6227766016838, 1e3, 1e-2};
  int sweeps = 2;
  int max_iter = 300;
  double tol = 1e-6;
  int jobs = 1;
};

struct GamTermFit {
  std::string param;
  std::string covariate;
  int n_basis = 0;
  double lambda = 0.0;
  double edf = 0.0;
  std::vector<double> knots;
  Eigen::VectorXd colmeans;
  int offset = 0;
  int n_coef = 0;
};

struct GamFit {
  ModelSpec spec;
  std::vector<std::string> params;
  std::vector<Link> links;
  std::vector<int> intercept_index;
  std::vector<GamTermFit> terms;
  Eigen::VectorXd beta;
  std::vector<double> lambdas;
  double loglik = kNegInf;            // unpenalized, at beta
  double penalized = kNegInf;
  double total_edf = 0.0;
  double aic_edf = 0.0;               // -2 loglik + 2 total_edf
  std::optional<Eigen::MatrixXd> covariance;  // (H + S)^-1
  bool converged = false;
  double grad_max_norm = 0.0;
  double tol_used = 0.0;
  std::size_t n_obs = 0;
  int n_coef = 0;
};

namespace detail {

struct EdfReport {
  double total = 0.0;
  std::vector<double> per_term;
  std::optional<Eigen::MatrixXd> covariance;
  Eigen::MatrixXd neg_unpenalized_hessian;
};

// edf from the penalized-objective Hessian: the penalty is exactly quadratic,
// so -H_pen = Hhat + S and tr[(Hhat+S)^-1 Hhat] = p - tr[(-H_pen)^-1 S].
inline std::optional<EdfReport> edf_from_hessian(const GamDesign& gd,
                                                 const Eigen::MatrixXd& pen_hessian,
                                                 const std::vector<double>& lambdas) {
  const Eigen::MatrixXd S = penalty_matrix(gd, lambdas);
  const Eigen::MatrixXd A = -pen_hessian;  // Hhat + S
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  const Eigen::MatrixXd V = ldlt.solve(Eigen::MatrixXd::Identity(gd.n_coef, gd.n_coef));
  const Eigen::MatrixXd M = V * (A - S);  // V * Hhat
  EdfReport rep;
  rep.total = M.trace();
  for (const auto& t : gd.terms)
    rep.per_term.push_back(M.diagonal().segment(t.offset, t.n_coef).sum());
  rep.covariance = 0.5 * (V + V.transpose());
  rep.neg_unpenalized_hessian = A - S;
  return rep;
}

struct InnerFit {
  BfgsResult opt;
  std::optional<EdfReport> edf;
  double unpenalized = kNegInf;
  double aic_edf = std::numeric_limits<double>::infinity();
};

inline InnerFit inner_fit(const GamDesign& gd, const std::vector<double>& lambdas,
                          const Eigen::VectorXd& beta0, const GamOptions& opt,
                          bool with_edf) {
  InnerFit out;
  Objective obj = [&](const Eigen::VectorXd& b) {
    return penalized_loglik(gd, b, lambdas);
  };
  BfgsOptions bopt;
  bopt.max_iter = opt.max_iter;
  bopt.tol = opt.tol;
  out.opt = maximize_bfgs(obj, beta0, bopt);
  if (!std::isfinite(out.opt.value)) return out;
  penalized_loglik(gd, out.opt.x, lambdas, &out.unpenalized);
  if (with_edf) {
    const Eigen::MatrixXd H = fd_hessian(obj, out.opt.x);
    out.edf = edf_from_hessian(gd, H, lambdas);
    if (out.edf) out.aic_edf = -2.0 * out.unpenalized + 2.0 * out.edf->total;
  }
  return out;
}

inline Eigen::VectorXd gam_start(const GamDesign& gd, const GamOptions& opt) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(gd.n_coef);
  // Intercepts warm-started from the iid fit of the same family.
  FitOptions fopt;
  fopt.max_iter = opt.max_iter;
  fopt.tol = opt.tol;
  try {
    const FitResult iid = fit_mle(gd.spec, gd.y, fopt);
    for (std::size_t j = 0; j < gd.params.size(); ++j) {
      beta[gd.intercept_index[j]] =
          link_apply(gd.links[j], iid.estimates[static_cast<Eigen::Index>(j)]);
    }
  } catch (const FitError&) {
    const auto table = CountTable::from(gd.y);
    const Eigen::VectorXd theta0 = default_start(gd.spec, table, 0.2, 1.0);
    for (std::size_t j = 0; j < gd.params.size(); ++j)
      beta[gd.intercept_index[j]] =
          link_apply(gd.links[j], theta0[static_cast<Eigen::Index>(j)]);
  }
  return beta;
}

}  // namespace detail

/// Penalized-MLE GAM fit. Inner loop: BFGS over all coefficients. Outer loop:
/// each smoothing parameter is selected on a log grid by minimizing
/// AIC_edf = -2 l + 2 edf, holding the others fixed (coordinate sweeps, ties
/// to the larger lambda).
inline GamFit fit_gam(const GamFormula& formula, const ModelSpec& spec,
                      const DataFrame& data, const std::string& response,
                      const GamOptions& opt = {}) {
  GamDesign gd = assemble(formula, spec, data, response);
  if (gd.n_obs() == 0) throw DataError("fit_gam: data is empty");

  std::vector<double> grid = opt.lambda_grid;
  std::sort(grid.begin(), grid.end());

  std::vector<double> lambdas(gd.terms.size(), 1.0);
  Eigen::VectorXd beta = detail::gam_start(gd, opt);

  detail::InnerFit current = detail::inner_fit(gd, lambdas, beta, opt, true);
  if (!std::isfinite(current.opt.value))
    throw FitError("fit_gam: optimizer found no finite penalized likelihood");

  if (!gd.terms.empty()) {
    for (int sweep = 0; sweep < opt.sweeps; ++sweep) {
      for (std::size_t j = 0; j < gd.terms.size(); ++j) {
        std::vector<detail::InnerFit> fits(grid.size());
        const Eigen::VectorXd warm = current.opt.x;
        parallel_for(grid.size(), opt.jobs, [&](std::size_t g) {
          std::vector<double> trial = lambdas;
          trial[j] = grid[g];
          fits[g] = detail::inner_fit(gd, trial, warm, opt, true);
        });
        // Lowest AIC_edf wins; ties break toward the larger lambda
        // (parsimony). The grid is sorted ascending, so >= keeps the largest.
        std::size_t best = 0;
        for (std::size_t g = 1; g < grid.size(); ++g) {
          if (fits[g].aic_edf <= fits[best].aic_edf) best = g;
        }
        if (std::isfinite(fits[best].aic_edf)) {
          lambdas[j] = grid[best];
          current = fits[best];
        }
      }
    }
  }

  if (!current.edf) {
    // Final state must carry edf/covariance; recompute if the last inner fit
    // was taken without them.
    current = detail::inner_fit(gd, lambdas, current.opt.x, opt, true);
  }

  GamFit fit;
  fit.spec = gd.spec;
  fit.params = gd.params;
  fit.links = gd.links;
  fit.intercept_index = gd.intercept_index;
  fit.beta = current.opt.x;
  fit.lambdas = lambdas;
  fit.loglik = current.unpenalized;
  fit.penalized = current.opt.value;
  fit.converged = current.opt.converged;
  fit.grad_max_norm = current.opt.gradient.size()
                          ? current.opt.gradient.lpNorm<Eigen::Infinity>()
                          : 0.0;
  fit.tol_used = opt.tol;
  fit.n_obs = gd.n_obs();
  fit.n_coef = gd.n_coef;
  for (std::size_t j = 0; j < gd.terms.size(); ++j) {
    const auto& t = gd.terms[j];
    GamTermFit tf;
    tf.param = t.param;
    tf.covariate = t.covariate;
    tf.n_basis = t.n_coef + 1;
    tf.lambda = lambdas[j];
    tf.edf = current.edf ? current.edf->per_term[j] : 0.0;
    tf.knots = t.basis.knots();
    tf.colmeans = t.colmeans;
    tf.offset = t.offset;
    tf.n_coef = t.n_coef;
    fit.terms.push_back(std::move(tf));
  }
  if (current.edf) {
    fit.total_edf = current.edf->total;
    fit.covariance = current.edf->covariance;
    fit.aic_edf = -2.0 * fit.loglik + 2.0 * fit.total_edf;
  } else {
    fit.total_edf = double(gd.n_coef);
    fit.aic_edf = -2.0 * fit.loglik + 2.0 * fit.total_edf;
  }
  return fit;
}

struct TermTest {
  std::string label;
  bool smooth = false;
  double estimate = 0.0;   // parametric terms only
  double std_error = 0.0;  // parametric terms only
  double statistic = 0.0;  // z for parametric, chi-square for smooths
  double df = 0.0;         // edf for smooths, 0 for parametric
  double p_value = 1.0;
};

/// Wald tests: z = estimate/SE for intercepts, beta' V^-1 beta with df = edf
/// for smooth blocks.
inline std::vector<TermTest> term_tests(const GamFit& fit) {
  if (!fit.covariance)
    throw FitError("term_tests: covariance unavailable (singular penalized Hessian)");
  const Eigen::MatrixXd& V = *fit.covariance;
  std::vector<TermTest> out;
  for (std::size_t j = 0; j < fit.params.size(); ++j) {
    TermTest t;
    const int idx = fit.intercept_index[j];
    Link link = fit.links[j];
    std::string link_label = link == Link::Log ? "log(" + fit.params[j] + ")"
                             : link == Link::Logit ? "logit(" + fit.params[j] + ")"
                                                   : fit.params[j];
    t.label = link_label;
    t.estimate = fit.beta[idx];
    t.std_error = std::sqrt(std::max(0.0, V(idx, idx)));
    t.statistic = t.std_error > 0.0 ? t.estimate / t.std_error : 0.0;
    t.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(t.statistic)));
    out.push_back(std::move(t));
  }
  for (const auto& term : fit.terms) {
    TermTest t;
    t.label = "s(" + term.covariate + "):" + term.param;
    t.smooth = true;
    const Eigen::VectorXd b = fit.beta.segment(term.offset, term.n_coef);
    const Eigen::MatrixXd Vj = V.block(term.offset, term.offset, term.n_coef, term.n_coef);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Vj);
    double chisq = 0.0;
    if (ldlt.info() == Eigen::Success) chisq = b.dot(ldlt.solve(b));
    t.statistic = std::max(0.0, chisq);
    t.df = std::max(term.edf, 1e-3);
    t.p_value = chi_square_sf(t.statistic, t.df);
    out.push_back(std::move(t));
  }
  return out;
}

struct PredictResult {
  Eigen::MatrixXd theta;  // n x d natural-scale parameters
  int n_extrapolated = 0;
};

/// Evaluate the fitted parameter surfaces on new data. Covariate values
/// beyond a smooth's knot range use the linear extension of the spline and
/// are counted in n_extrapolated.
inline PredictResult predict_parameters(const GamFit& fit, const DataFrame& newdata) {
  const std::size_t n = newdata.n_rows();
  const int d = static_cast<int>(fit.params.size());
  Eigen::MatrixXd eta(n, d);
  for (int j = 0; j < d; ++j) eta.col(j).setConstant(fit.beta[fit.intercept_index[j]]);
  int extrapolated = 0;
  for (const auto& term : fit.terms) {
    if (!newdata.has_column(term.covariate))
      throw ConfigError("predict: data has no column '" + term.covariate + "'");
    const auto& x = newdata.column(term.covariate);
    BSplineBasis basis(term.knots);
    int n_out = 0;
    const Eigen::MatrixXd raw = basis.design(x, &n_out);
    extrapolated += n_out;
    const Eigen::MatrixXd Xc = raw * centering_transform(term.colmeans);
    int j = -1;
    for (std::size_t q = 0; q < fit.params.size(); ++q)
      if (fit.params[q] == term.param) j = static_cast<int>(q);
    eta.col(j) += Xc * fit.beta.segment(term.offset, term.n_coef);
  }
  PredictResult out;
  out.n_extrapolated = extrapolated;
  out.theta.resize(n, d);
  for (int j = 0; j < d; ++j)
    for (std::size_t i = 0; i < n; ++i)
      out.theta(i, j) = link_invert(fit.links[j], eta(i, j));
  return out;
}

/// Total and per-term effective degrees of freedom of a fit.
struct EffectiveDof {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> per_term;
};

inline EffectiveDof effective_dof(const GamFit& fit) {
  EffectiveDof out;
  out.total = fit.total_edf;
  for (const auto& t : fit.terms)
    out.per_term.emplace_back("s(" + t.covariate + "):" + t.param, t.edf);
  return out;
}

}  // namespace degpd
