#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "degpd/distributions.hpp"

// Model registry: family identifiers, natural-scale parameter layouts, link
// functions, and the bijection between natural and unconstrained (link-scale)
// parameter vectors used by the optimizers.

namespace degpd {

enum class Family {
  Degpd1,
  Degpd2,
  Degpd3,
  Degpd4,
  ZiDegpd1,
  ZiDegpd2,
  ZiDegpd3,
  ZiDegpd4,
  Dgpd,
  Poisson,
  Zip,
};

inline Family family_from_string(const std::string& s) {
  if (s == "degpd1") return Family::Degpd1;
  if (s == "degpd2") return Family::Degpd2;
  if (s == "degpd3") return Family::Degpd3;
  if (s == "degpd4") return Family::Degpd4;
  if (s == "zidegpd1") return Family::ZiDegpd1;
  if (s == "zidegpd2") return Family::ZiDegpd2;
  if (s == "zidegpd3") return Family::ZiDegpd3;
  if (s == "zidegpd4") return Family::ZiDegpd4;
  if (s == "dgpd") return Family::Dgpd;
  if (s == "poisson") return Family::Poisson;
  if (s == "zip") return Family::Zip;
  throw std::invalid_argument("unknown family: " + s);
}

inline std::string family_to_string(Family f) {
  switch (f) {
    case Family::Degpd1: return "degpd1";
    case Family::Degpd2: return "degpd2";
    case Family::Degpd3: return "degpd3";
    case Family::Degpd4: return "degpd4";
    case Family::ZiDegpd1: return "zidegpd1";
    case Family::ZiDegpd2: return "zidegpd2";
    case Family::ZiDegpd3: return "zidegpd3";
    case Family::ZiDegpd4: return "zidegpd4";
    case Family::Dgpd: return "dgpd";
    case Family::Poisson: return "poisson";
    case Family::Zip: return "zip";
  }
  throw std::logic_error("family_to_string: bad enum");
}

enum class Link { Log, Logit, Identity };

inline double link_apply(Link l, double theta) {
  switch (l) {
    case Link::Log: return std::log(theta);
    case Link::Logit: return std::log(theta / (1.0 - theta));
    case Link::Identity: return theta;
  }
  throw std::logic_error("link_apply: bad enum");
}

inline double link_invert(Link l, double eta) {
  switch (l) {
    case Link::Log: return std::exp(eta);
    case Link::Logit: return 1.0 / (1.0 + std::exp(-eta));
    case Link::Identity: return eta;
  }
  throw std::logic_error("link_invert: bad enum");
}

/// d theta / d eta at the given eta.
inline double link_invert_deriv(Link l, double eta) {
  switch (l) {
    case Link::Log: return std::exp(eta);
    case Link::Logit: {
      const double t = 1.0 / (1.0 + std::exp(-eta));
      return t * (1.0 - t);
    }
    case Link::Identity: return 1.0;
  }
  throw std::logic_error("link_invert_deriv: bad enum");
}

struct ModelSpec {
  Family family = Family::Degpd1;
  Link xi_link = Link::Log;  // Identity is the alternative; keeps xi >= 0 when Log.

  bool zero_inflated() const {
    switch (family) {
      case Family::ZiDegpd1:
      case Family::ZiDegpd2:
      case Family::ZiDegpd3:
      case Family::ZiDegpd4:
      case Family::Zip: return true;
      default: return false;
    }
  }

  /// Carrier type 1..4 for (ZI)DEGPD families, 0 otherwise.
  int carrier_type() const {
    switch (family) {
      case Family::Degpd1:
      case Family::ZiDegpd1: return 1;
      case Family::Degpd2:
      case Family::ZiDegpd2: return 2;
      case Family::Degpd3:
      case Family::ZiDegpd3: return 3;
      case Family::Degpd4:
      case Family::ZiDegpd4: return 4;
      default: return 0;
    }
  }

  std::vector<std::string> param_names() const {
    std::vector<std::string> names;
    if (zero_inflated()) names.push_back("pi");
    switch (carrier_type()) {
      case 1: names.push_back("kappa"); break;
      case 2: names.push_back("delta"); break;
      case 3:
        names.push_back("kappa");
        names.push_back("delta");
        break;
      case 4:
        names.push_back("p");
        names.push_back("kappa1");
        names.push_back("kappa2");
        break;
      default: break;
    }
    if (family == Family::Poisson || family == Family::Zip) {
      names.push_back("lambda");
    } else {
      names.push_back("sigma");
      names.push_back("xi");
    }
    return names;
  }

  int n_params() const { return static_cast<int>(param_names().size()); }

  int index_of(const std::string& name) const {
    const auto names = param_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
};

/// Link used for a single distribution parameter in isolation (the GAM path,
/// where every parameter gets its own additive predictor).
inline Link link_for_param(const std::string& name, Link xi_link) {
  if (name == "p" || name == "pi") return Link::Logit;
  if (name == "xi") return xi_link;
  return Link::Log;  // sigma, kappa, delta, kappa1, kappa2, lambda
}

/// Validity of a natural-scale parameter vector for the family; used as a
/// branch-light rejection test inside likelihood evaluations.
inline bool params_valid(const ModelSpec& spec, const Eigen::VectorXd& theta) {
  const auto names = spec.param_names();
  if (theta.size() != static_cast<Eigen::Index>(names.size())) return false;
  double kappa1 = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double v = theta[i];
    if (!std::isfinite(v)) return false;
    const std::string& nm = names[i];
    if (nm == "pi") {
      if (!(v >= 0.0 && v <= 1.0)) return false;
    } else if (nm == "p") {
      if (!(v > 0.0 && v <= 1.0)) return false;
    } else if (nm == "xi") {
      if (!(v >= 0.0)) return false;
    } else {
      if (!(v > 0.0)) return false;
    }
    if (nm == "kappa1") kappa1 = v;
    if (nm == "kappa2" && v < kappa1) return false;
  }
  return true;
}

using AnyModel =
    std::variant<DegpdModel, ZiDegpdModel, DgpdModel, PoissonModel, ZiPoissonModel>;

inline double pmf(const AnyModel& m, long long k) {
  return std::visit([k](const auto& b) { return pmf(b, k); }, m);
}
inline double cdf(const AnyModel& m, long long k) {
  return std::visit([k](const auto& b) { return cdf(b, k); }, m);
}
inline long long quantile(const AnyModel& m, double p) {
  return std::visit([p](const auto& b) { return quantile(b, p); }, m);
}
inline std::vector<long long> sample(const AnyModel& m, std::size_t n,
                                     std::uint64_t seed) {
  return std::visit(
      [&](const auto& b) -> std::vector<long long> {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, DgpdModel> ||
                      std::is_same_v<T, PoissonModel> ||
                      std::is_same_v<T, ZiPoissonModel>) {
          return sample(BaselineModel(b), n, seed);
        } else {
          return sample(b, n, seed);
        }
      },
      m);
}

namespace detail {

inline CarrierFamily make_carrier(const ModelSpec& spec,
                                  const Eigen::VectorXd& theta, int offset) {
  switch (spec.carrier_type()) {
    case 1: return PowerCarrier(theta[offset]);
    case 2: return BetaCarrier(theta[offset]);
    case 3: return BetaPowerCarrier(theta[offset + 1], theta[offset]);
    case 4: return MixtureCarrier(theta[offset], theta[offset + 1], theta[offset + 2]);
    default: throw std::logic_error("make_carrier: not a DEGPD family");
  }
}

}  // namespace detail

/// Build the concrete model for a natural-scale parameter vector laid out as
/// ModelSpec::param_names(). Throws on invalid parameters.
inline AnyModel make_model(const ModelSpec& spec, const Eigen::VectorXd& theta) {
  const auto names = spec.param_names();
  if (theta.size() != static_cast<Eigen::Index>(names.size()))
    throw std::invalid_argument("make_model: parameter count mismatch");
  const int zi = spec.zero_inflated() ? 1 : 0;
  switch (spec.family) {
    case Family::Poisson: return PoissonModel(theta[0]);
    case Family::Zip: return ZiPoissonModel(theta[0], theta[1]);
    case Family::Dgpd: return DgpdModel(GpdParams(theta[0], theta[1]));
    default: break;
  }
  const int np = static_cast<int>(names.size());
  GpdParams gpd(theta[np - 2], theta[np - 1]);
  DegpdModel base(detail::make_carrier(spec, theta, zi), gpd);
  if (zi) return ZiDegpdModel(theta[0], std::move(base));
  return base;
}

// ---------------------------------------------------------------------------
// ParamLinkMap: bijection between the natural parameter vector and an
// unconstrained link-scale vector. Positive parameters use log, probabilities
// use logit, xi uses the spec's choice, and kappa2 is carried as
// log(kappa2 - kappa1) so the mixture ordering holds by construction.

class ParamLinkMap {
 public:
  explicit ParamLinkMap(const ModelSpec& spec)
      : spec_(spec), names_(spec.param_names()) {
    kappa1_idx_ = spec.index_of("kappa1");
    kappa2_idx_ = spec.index_of("kappa2");
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& param_names() const { return names_; }

  /// Name of the link-scale coordinate, e.g. "log(sigma)" or
  /// "log(kappa2-kappa1)".
  std::string link_name(int i) const {
    const std::string& nm = names_[i];
    if (i == kappa2_idx_) return "log(kappa2-kappa1)";
    switch (link_of(i)) {
      case Link::Log: return "log(" + nm + ")";
      case Link::Logit: return "logit(" + nm + ")";
      case Link::Identity: return nm;
    }
    return nm;
  }

  Eigen::VectorXd to_link(const Eigen::VectorXd& natural) const {
    Eigen::VectorXd eta(natural.size());
    for (int i = 0; i < size(); ++i) {
      if (i == kappa2_idx_) {
        eta[i] = std::log(natural[i] - natural[kappa1_idx_]);
      } else {
        eta[i] = link_apply(link_of(i), natural[i]);
      }
    }
    return eta;
  }

  Eigen::VectorXd to_natural(const Eigen::VectorXd& eta) const {
    Eigen::VectorXd theta(eta.size());
    for (int i = 0; i < size(); ++i) {
      if (i == kappa2_idx_) {
        theta[i] = theta[kappa1_idx_] + std::exp(eta[i]);
      } else {
        theta[i] = link_invert(link_of(i), eta[i]);
      }
    }
    return theta;
  }

  /// Jacobian d(natural)/d(link) at the given link-scale point; used by the
  /// delta method. Only the kappa2 row has an off-diagonal entry (its
  /// dependence on log(kappa1)).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& eta) const {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(size(), size());
    for (int i = 0; i < size(); ++i) {
      if (i == kappa2_idx_) {
        J(i, i) = std::exp(eta[i]);
        J(i, kappa1_idx_) = std::exp(eta[kappa1_idx_]);
      } else {
        J(i, i) = link_invert_deriv(link_of(i), eta[i]);
      }
    }
    return J;
  }

 private:
  Link link_of(int i) const { return link_for_param(names_[i], spec_.xi_link); }

  ModelSpec spec_;
  std::vector<std::string> names_;
  int kappa1_idx_ = -1;
  int kappa2_idx_ = -1;
};

}  // namespace degpd
