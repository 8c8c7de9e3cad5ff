#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "degpd/carriers.hpp"
#include "degpd/math.hpp"

// Discrete laws obtained by discretizing continuous CDFs:
//   P(Y = k) = G(F(k+1)) - G(F(k)),  k in N,
// plus the zero-inflated variant and the DGPD / Poisson / ZIP baselines.
// The free-function API (pmf / cdf / quantile / sample) is overloaded per
// model type; all models are immutable value types.

namespace degpd {

struct DegpdModel {
  DegpdModel(CarrierFamily carrier_, GpdParams gpd_)
      : carrier(std::move(carrier_)), gpd(gpd_) {}
  CarrierFamily carrier;
  GpdParams gpd;
};

struct ZiDegpdModel {
  ZiDegpdModel(double pi_, DegpdModel base_) : pi(pi_), base(std::move(base_)) {
    if (!(pi >= 0.0 && pi <= 1.0))
      throw std::domain_error("ZiDegpdModel: pi must lie in [0, 1]");
  }
  double pi;
  DegpdModel base;
};

struct DgpdModel {
  explicit DgpdModel(GpdParams gpd_) : gpd(gpd_) {}
  GpdParams gpd;
};

struct PoissonModel {
  explicit PoissonModel(double lambda_) : lambda(lambda_) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw std::domain_error("PoissonModel: lambda must be positive");
  }
  double lambda;
};

struct ZiPoissonModel {
  ZiPoissonModel(double pi_, double lambda_) : pi(pi_), lambda(lambda_) {
    if (!(pi >= 0.0 && pi <= 1.0))
      throw std::domain_error("ZiPoissonModel: pi must lie in [0, 1]");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw std::domain_error("ZiPoissonModel: lambda must be positive");
  }
  double pi;
  double lambda;
};

using BaselineModel = std::variant<DgpdModel, PoissonModel, ZiPoissonModel>;

// ---------------------------------------------------------------------------
// DEGPD

/// P(Y = k) = G(F(k+1)) - G(F(k)), computed in survival form so both terms
/// stay accurate deep in the upper tail; floored at 0.
inline double pmf(const DegpdModel& m, long long k) {
  if (k < 0) throw std::domain_error("pmf: k must be non-negative");
  const double upper = carrier_tail(m.carrier, gpd_sf(m.gpd, double(k)));
  const double lower = carrier_tail(m.carrier, gpd_sf(m.gpd, double(k) + 1.0));
  return std::max(0.0, upper - lower);
}

/// P(Y <= k) = G(F(k+1)); 0 for k < 0.
inline double cdf(const DegpdModel& m, long long k) {
  if (k < 0) return 0.0;
  return 1.0 - carrier_tail(m.carrier, gpd_sf(m.gpd, double(k) + 1.0));
}

namespace detail {

// ceil(x) - 1 floored at 0, then corrected by at most a step or two so the
// bracket property cdf(q) >= p > cdf(q - 1) holds even when floating rounding
// lands the ceiling argument on an integer boundary.
template <typename Model>
long long bracketed_quantile(const Model& m, double p, double x) {
  long long q = static_cast<long long>(std::ceil(x)) - 1;
  if (q < 0) q = 0;
  while (cdf(m, q) < p) ++q;
  while (q > 0 && cdf(m, q - 1) >= p) --q;
  return q;
}

}  // namespace detail

/// Smallest integer q >= 0 with cdf(q) >= p.
inline long long quantile(const DegpdModel& m, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("quantile: p must lie in (0, 1)");
  const double x = gpd_inverse(m.gpd, carrier_inverse(m.carrier, p));
  return detail::bracketed_quantile(m, p, x);
}

// ---------------------------------------------------------------------------
// ZIDEGPD

inline double pmf(const ZiDegpdModel& m, long long k) {
  if (k < 0) throw std::domain_error("pmf: k must be non-negative");
  if (k == 0) return m.pi + (1.0 - m.pi) * pmf(m.base, 0);
  return (1.0 - m.pi) * pmf(m.base, k);
}

inline double cdf(const ZiDegpdModel& m, long long k) {
  if (k < 0) return 0.0;
  return m.pi + (1.0 - m.pi) * cdf(m.base, k);
}

inline long long quantile(const ZiDegpdModel& m, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("quantile: p must lie in (0, 1)");
  if (p <= cdf(m, 0)) return 0;
  const double pstar = (p - m.pi) / (1.0 - m.pi);
  const double x = gpd_inverse(m.base.gpd, carrier_inverse(m.base.carrier, pstar));
  return detail::bracketed_quantile(m, p, x);
}

// ---------------------------------------------------------------------------
// Baselines

inline double pmf(const DgpdModel& m, long long k) {
  if (k < 0) throw std::domain_error("pmf: k must be non-negative");
  const double upper = gpd_sf(m.gpd, double(k));
  const double lower = gpd_sf(m.gpd, double(k) + 1.0);
  return std::max(0.0, upper - lower);
}

inline double cdf(const DgpdModel& m, long long k) {
  if (k < 0) return 0.0;
  return gpd_cdf(m.gpd, double(k) + 1.0);
}

inline long long quantile(const DgpdModel& m, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("quantile: p must lie in (0, 1)");
  return detail::bracketed_quantile(m, p, gpd_inverse(m.gpd, p));
}

inline double pmf(const PoissonModel& m, long long k) {
  if (k < 0) throw std::domain_error("pmf: k must be non-negative");
  return std::exp(double(k) * std::log(m.lambda) - m.lambda -
                  std::lgamma(double(k) + 1.0));
}

/// Poisson CDF via the regularized upper incomplete gamma.
inline double cdf(const PoissonModel& m, long long k) {
  if (k < 0) return 0.0;
  return gamma_q(double(k) + 1.0, m.lambda);
}

inline long long quantile(const PoissonModel& m, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("quantile: p must lie in (0, 1)");
  long long q = 0;
  double acc = pmf(m, 0);
  while (acc < p && q < (1ll << 40)) {
    ++q;
    acc += pmf(m, q);
  }
  return q;
}

inline double pmf(const ZiPoissonModel& m, long long k) {
  if (k < 0) throw std::domain_error("pmf: k must be non-negative");
  const double base = pmf(PoissonModel(m.lambda), k);
  return (k == 0) ? m.pi + (1.0 - m.pi) * base : (1.0 - m.pi) * base;
}

inline double cdf(const ZiPoissonModel& m, long long k) {
  if (k < 0) return 0.0;
  return m.pi + (1.0 - m.pi) * cdf(PoissonModel(m.lambda), k);
}

inline long long quantile(const ZiPoissonModel& m, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("quantile: p must lie in (0, 1)");
  long long q = 0;
  double acc = cdf(m, 0);
  while (acc < p && q < (1ll << 40)) {
    ++q;
    acc += pmf(m, q);
  }
  return q;
}

inline double pmf(const BaselineModel& m, long long k) {
  return std::visit([k](const auto& b) { return pmf(b, k); }, m);
}
inline double cdf(const BaselineModel& m, long long k) {
  return std::visit([k](const auto& b) { return cdf(b, k); }, m);
}
inline long long quantile(const BaselineModel& m, double p) {
  return std::visit([p](const auto& b) { return quantile(b, p); }, m);
}

// ---------------------------------------------------------------------------
// Sampling. Inverse transform through the carrier: U ~ U(0,1),
// Y = floor(F^{-1}(G^{-1}(U))), which matches the discretized PMF exactly.
// Each call owns a private generator seeded from `seed`, so concurrent
// sampling with distinct seeds is race-free and reproducible.

namespace detail {

class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed) : rng_(seed) {}
  double next() { return dist_(rng_); }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

inline long long degpd_draw(const DegpdModel& m, double u) {
  const double x = gpd_inverse(m.gpd, carrier_inverse(m.carrier, u));
  long long k = static_cast<long long>(std::floor(x));
  if (k < 0) k = 0;
  return k;
}

}  // namespace detail

inline std::vector<long long> sample(const DegpdModel& m, std::size_t n,
                                     std::uint64_t seed) {
  detail::UniformStream u(seed);
  std::vector<long long> out(n);
  for (auto& y : out) y = detail::degpd_draw(m, u.next());
  return out;
}

inline std::vector<long long> sample(const ZiDegpdModel& m, std::size_t n,
                                     std::uint64_t seed) {
  detail::UniformStream u(seed);
  std::vector<long long> out(n);
  for (auto& y : out) {
    if (u.next() < m.pi) {
      y = 0;
    } else {
      y = detail::degpd_draw(m.base, u.next());
    }
  }
  return out;
}

inline std::vector<long long> sample(const BaselineModel& m, std::size_t n,
                                     std::uint64_t seed) {
  return std::visit(
      [&](const auto& b) -> std::vector<long long> {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, DgpdModel>) {
          detail::UniformStream u(seed);
          std::vector<long long> out(n);
          for (auto& y : out) {
            long long k =
                static_cast<long long>(std::floor(gpd_inverse(b.gpd, u.next())));
            y = k < 0 ? 0 : k;
          }
          return out;
        } else if constexpr (std::is_same_v<T, PoissonModel>) {
          std::mt19937_64 rng(seed);
          std::poisson_distribution<long long> pois(b.lambda);
          std::vector<long long> out(n);
          for (auto& y : out) y = pois(rng);
          return out;
        } else {
          std::mt19937_64 rng(seed);
          std::uniform_real_distribution<double> unif(0.0, 1.0);
          std::poisson_distribution<long long> pois(b.lambda);
          std::vector<long long> out(n);
          for (auto& y : out) y = unif(rng) < b.pi ? 0 : pois(rng);
          return out;
        }
      },
      m);
}

}  // namespace degpd
