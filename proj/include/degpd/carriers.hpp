#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>

#include "degpd/math.hpp"

// Continuous building blocks: the GPD on [0, inf) and the carrier CDFs G on
// [0, 1] that are composed with it. All parameter validation happens at
// construction so the evaluation paths stay branch-light.

namespace degpd {

// Below this magnitude the shape parameter is treated as exactly zero and the
// exponential branch is used; avoids catastrophic cancellation in
// (1 + xi*x/sigma)^(-1/xi).
inline constexpr double kXiZeroTol = 1e-8;

struct GpdParams {
  GpdParams(double sigma_, double xi_) : sigma(sigma_), xi(xi_) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw std::domain_error("GpdParams: sigma must be positive and finite");
    if (!(xi >= 0.0) || !std::isfinite(xi))
      throw std::domain_error("GpdParams: xi must be non-negative and finite");
  }
  double sigma;
  double xi;
};

/// GPD survival function 1 - F(x).
inline double gpd_sf(const GpdParams& g, double x) {
  if (x < 0.0) throw std::domain_error("gpd_sf: x must be non-negative");
  if (g.xi < kXiZeroTol) return std::exp(-x / g.sigma);
  return std::exp(-std::log1p(g.xi * x / g.sigma) / g.xi);
}

/// GPD CDF, Pareto-type for xi > 0 and exponential for xi ~ 0.
inline double gpd_cdf(const GpdParams& g, double x) {
  if (x < 0.0) throw std::domain_error("gpd_cdf: x must be non-negative");
  if (g.xi < kXiZeroTol) return -std::expm1(-x / g.sigma);
  return -std::expm1(-std::log1p(g.xi * x / g.sigma) / g.xi);
}

/// GPD quantile function on [0, 1).
inline double gpd_inverse(const GpdParams& g, double prob) {
  if (!(prob >= 0.0 && prob < 1.0))
    throw std::domain_error("gpd_inverse: prob must lie in [0, 1)");
  if (g.xi < kXiZeroTol) return -g.sigma * std::log1p(-prob);
  return (g.sigma / g.xi) * std::expm1(-g.xi * std::log1p(-prob));
}

// Carrier families. Shape parameters are strictly positive; the mixture keeps
// kappa1 <= kappa2, the identifiable ordering.

struct PowerCarrier {
  explicit PowerCarrier(double kappa_) : kappa(kappa_) {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw std::domain_error("PowerCarrier: kappa must be positive");
  }
  double kappa;
};

struct BetaCarrier {
  explicit BetaCarrier(double delta_) : delta(delta_) {
    if (!(delta > 0.0) || !std::isfinite(delta))
      throw std::domain_error("BetaCarrier: delta must be positive");
  }
  double delta;
};

struct BetaPowerCarrier {
  BetaPowerCarrier(double delta_, double kappa_) : delta(delta_), kappa(kappa_) {
    if (!(delta > 0.0) || !std::isfinite(delta))
      throw std::domain_error("BetaPowerCarrier: delta must be positive");
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw std::domain_error("BetaPowerCarrier: kappa must be positive");
  }
  double delta;
  double kappa;
};

struct MixtureCarrier {
  MixtureCarrier(double p_, double kappa1_, double kappa2_)
      : p(p_), kappa1(kappa1_), kappa2(kappa2_) {
    if (!(p > 0.0 && p <= 1.0))
      throw std::domain_error("MixtureCarrier: p must lie in (0, 1]");
    if (!(kappa1 > 0.0) || !std::isfinite(kappa1))
      throw std::domain_error("MixtureCarrier: kappa1 must be positive");
    if (!(kappa2 > 0.0) || !std::isfinite(kappa2))
      throw std::domain_error("MixtureCarrier: kappa2 must be positive");
    if (kappa2 < kappa1)
      throw std::domain_error("MixtureCarrier: requires kappa1 <= kappa2");
  }
  double p;
  double kappa1;
  double kappa2;
};

using CarrierFamily =
    std::variant<PowerCarrier, BetaCarrier, BetaPowerCarrier, MixtureCarrier>;

/// CDF of the Beta(1/delta, 2) component used by the beta-type carriers:
/// D(w) = ((1+delta)/delta) * w^(1/delta) * (1 - w/(1+delta)).
inline double beta_component_cdf(double delta, double w) {
  if (!(w >= 0.0 && w <= 1.0))
    throw std::domain_error("beta_component_cdf: w must lie in [0, 1]");
  if (w == 0.0) return 0.0;
  if (w == 1.0) return 1.0;
  const double v =
      (1.0 + delta) / delta * std::pow(w, 1.0 / delta) * (1.0 - w / (1.0 + delta));
  return std::min(1.0, std::max(0.0, v));
}

namespace detail {

inline double carrier_cdf_unchecked(const CarrierFamily& fam, double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return std::visit(
      [u](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerCarrier>) {
          return std::pow(u, f.kappa);
        } else if constexpr (std::is_same_v<T, BetaCarrier>) {
          return 1.0 - beta_component_cdf(f.delta, std::pow(1.0 - u, f.delta));
        } else if constexpr (std::is_same_v<T, BetaPowerCarrier>) {
          const double inner =
              1.0 - beta_component_cdf(f.delta, std::pow(1.0 - u, f.delta));
          return std::pow(inner, f.kappa / 2.0);
        } else {
          return f.p * std::pow(u, f.kappa1) + (1.0 - f.p) * std::pow(u, f.kappa2);
        }
      },
      fam);
}

}  // namespace detail

/// Carrier CDF G(u).
inline double carrier_cdf(const CarrierFamily& fam, double u) {
  if (!(u >= 0.0 && u <= 1.0))
    throw std::domain_error("carrier_cdf: u must lie in [0, 1]");
  return detail::carrier_cdf_unchecked(fam, u);
}

/// 1 - G(1 - s), evaluated without forming 1 - s when s is small. PMF values
/// of the discretized laws are differences of this function at consecutive
/// GPD survival values, which keeps the deep upper tail free of cancellation
/// against 1.
inline double carrier_tail(const CarrierFamily& fam, double s) {
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return std::visit(
      [s](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if (s >= 1.0) return 1.0;
        if constexpr (std::is_same_v<T, PowerCarrier>) {
          return -std::expm1(f.kappa * std::log1p(-s));
        } else if constexpr (std::is_same_v<T, BetaCarrier>) {
          return beta_component_cdf(f.delta, std::pow(s, f.delta));
        } else if constexpr (std::is_same_v<T, BetaPowerCarrier>) {
          const double d = beta_component_cdf(f.delta, std::pow(s, f.delta));
          return -std::expm1(f.kappa / 2.0 * std::log1p(-d));
        } else {
          return -f.p * std::expm1(f.kappa1 * std::log1p(-s)) -
                 (1.0 - f.p) * std::expm1(f.kappa2 * std::log1p(-s));
        }
      },
      fam);
}

/// Inverse carrier CDF. Closed form for the power family; the others use a
/// bracketing bisection/secant hybrid on [0, 1] (tolerance 1e-12 on u,
/// iteration cap 200 — G is continuous and strictly increasing, so the
/// bracket always converges).
inline double carrier_inverse(const CarrierFamily& fam, double v) {
  if (!(v >= 0.0 && v <= 1.0))
    throw std::domain_error("carrier_inverse: v must lie in [0, 1]");
  if (v == 0.0) return 0.0;
  if (v == 1.0) return 1.0;
  if (const auto* pw = std::get_if<PowerCarrier>(&fam)) {
    return std::pow(v, 1.0 / pw->kappa);
  }

  double lo = 0.0, hi = 1.0;
  double flo = 0.0 - v, fhi = 1.0 - v;
  double x = 0.5, fx;
  for (int it = 0; it < 200; ++it) {
    // Secant proposal on even iterations, clipped into the open bracket;
    // plain bisection on odd ones so the bracket provably halves.
    double cand = 0.5 * (lo + hi);
    if (it % 2 == 0) {
      const double sec = lo - flo * (hi - lo) / (fhi - flo);
      if (std::isfinite(sec) && sec > lo && sec < hi) cand = sec;
    }
    x = cand;
    fx = detail::carrier_cdf_unchecked(fam, x) - v;
    if (fx == 0.0) return x;
    if (fx < 0.0) {
      lo = x;
      flo = fx;
    } else {
      hi = x;
      fhi = fx;
    }
    if (hi - lo < 1e-15 * (1.0 + std::fabs(lo))) break;
  }
  return (std::fabs(flo) < std::fabs(fhi)) ? lo : hi;
}

}  // namespace degpd
