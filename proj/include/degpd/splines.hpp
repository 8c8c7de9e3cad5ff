#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "degpd/errors.hpp"

// Cubic B-spline bases with quantile-placed knots and second-difference
// (P-spline) penalties, plus the sum-to-zero centering used for smooth-term
// identifiability.

namespace degpd {

class BSplineBasis {
 public:
  static constexpr int kOrder = 4;  // cubic

  /// Basis with n_basis functions whose interior knots sit at quantiles of
  /// the distinct values of x.
  static BSplineBasis from_quantiles(std::span<const double> x, int n_basis) {
    if (n_basis < kOrder)
      throw ConfigError("BSplineBasis: need at least 4 basis functions");
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (static_cast<int>(sorted.size()) < n_basis)
      throw ConfigError("BSplineBasis: fewer distinct covariate values than basis functions");

    const int n_interior = n_basis - kOrder;
    std::vector<double> knots;
    knots.reserve(n_basis + kOrder);
    const double a = sorted.front();
    const double b = sorted.back();
    for (int i = 0; i < kOrder; ++i) knots.push_back(a);
    for (int i = 1; i <= n_interior; ++i) {
      const double q = double(i) / double(n_interior + 1);
      const double pos = q * (double(sorted.size()) - 1.0);
      const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
      const double w = pos - double(lo);
      knots.push_back((1.0 - w) * sorted[lo] + w * sorted[hi]);
    }
    for (int i = 0; i < kOrder; ++i) knots.push_back(b);
    return BSplineBasis(std::move(knots));
  }

  explicit BSplineBasis(std::vector<double> padded_knots)
      : knots_(std::move(padded_knots)),
        n_basis_(static_cast<int>(knots_.size()) - kOrder) {
    if (n_basis_ < kOrder) throw ConfigError("BSplineBasis: bad knot vector");
  }

  int n_basis() const { return n_basis_; }
  const std::vector<double>& knots() const { return knots_; }
  double lower() const { return knots_.front(); }
  double upper() const { return knots_.back(); }

  /// Basis row at x. Outside the knot span the spline is extended linearly
  /// from the boundary (value + derivative there); *extrapolated reports it.
  Eigen::RowVectorXd row(double x, bool* extrapolated = nullptr) const {
    if (extrapolated) *extrapolated = false;
    const double a = lower(), b = upper();
    if (x < a || x > b) {
      if (extrapolated) *extrapolated = true;
      const double edge = (x < a) ? a : b;
      Eigen::RowVectorXd v = inside_row(edge);
      Eigen::RowVectorXd d = inside_derivative_row(edge);
      return v + (x - edge) * d;
    }
    return inside_row(x);
  }

  Eigen::MatrixXd design(std::span<const double> x,
                         int* n_extrapolated = nullptr) const {
    Eigen::MatrixXd X(x.size(), n_basis_);
    int count = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      bool ex = false;
      X.row(i) = row(x[i], &ex);
      if (ex) ++count;
    }
    if (n_extrapolated) *n_extrapolated = count;
    return X;
  }

  /// Second-difference penalty S = D^T D with D the (K-2) x K difference
  /// operator; S annihilates affine coefficient sequences and has rank K-2.
  Eigen::MatrixXd penalty() const {
    const int k = n_basis_;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k - 2, k);
    for (int i = 0; i < k - 2; ++i) {
      d(i, i) = 1.0;
      d(i, i + 1) = -2.0;
      d(i, i + 2) = 1.0;
    }
    return d.transpose() * d;
  }

 private:
  int find_span(double x) const {
    // Largest j with knots_[j] <= x, clamped into [kOrder-1, n_basis_-1].
    int lo = kOrder - 1;
    int hi = n_basis_ - 1;
    if (x >= knots_[n_basis_]) return hi;
    if (x <= knots_[lo]) return lo;
    while (lo < hi) {
      const int mid = (lo + hi + 1) / 2;
      if (knots_[mid] <= x) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    return lo;
  }

  // Nonzero basis values of the given degree at x (Cox-de Boor), scattered
  // into a length-K row. 0/0 from repeated knots is treated as 0.
  void de_boor(double x, int degree, int span, double* out) const {
    out[0] = 1.0;
    std::array<double, kOrder> left{}, right{};
    for (int r = 1; r <= degree; ++r) {
      left[r] = x - knots_[span + 1 - r];
      right[r] = knots_[span + r] - x;
      double saved = 0.0;
      for (int k = 0; k < r; ++k) {
        const double denom = right[k + 1] + left[r - k];
        const double temp = (denom != 0.0) ? out[k] / denom : 0.0;
        out[k] = saved + right[k + 1] * temp;
        saved = left[r - k] * temp;
      }
      out[r] = saved;
    }
  }

  Eigen::RowVectorXd inside_row(double x) const {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(n_basis_);
    const int span = find_span(x);
    double nz[kOrder];
    de_boor(x, kOrder - 1, span, nz);
    for (int k = 0; k < kOrder; ++k) v[span - (kOrder - 1) + k] = nz[k];
    return v;
  }

  Eigen::RowVectorXd inside_derivative_row(double x) const {
    // dB_i/dx = 3 B_{i,2}/(t_{i+3}-t_i) - 3 B_{i+1,2}/(t_{i+4}-t_{i+1}), so
    // each nonzero quadratic value B_{m,2} feeds d[m] and d[m-1] with the
    // same factor 3 B_{m,2}/(t_{m+3}-t_m).
    Eigen::RowVectorXd d = Eigen::RowVectorXd::Zero(n_basis_);
    const int span = find_span(x);
    double nz[kOrder];
    de_boor(x, kOrder - 2, span, nz);  // quadratic values B_{span-2..span,2}
    for (int k = 0; k < kOrder - 1; ++k) {
      const int m = span - (kOrder - 2) + k;  // index of B_{m,2}
      const double den = knots_[m + 3] - knots_[m];
      if (den == 0.0) continue;
      const double coef = 3.0 * nz[k] / den;
      if (m < n_basis_) d[m] += coef;
      if (m - 1 >= 0) d[m - 1] -= coef;
    }
    return d;
  }

  std::vector<double> knots_;
  int n_basis_;
};

/// Sum-to-zero reparameterization for a smooth block: given the column means
/// c of the uncentered design, the K x (K-1) matrix Z spans { b : c^T b = 0 },
/// so X Z has centered fitted values and one fewer coefficient.
inline Eigen::MatrixXd centering_transform(const Eigen::VectorXd& colmeans) {
  const Eigen::Index k = colmeans.size();
  Eigen::VectorXd w = colmeans;
  const double nrm = w.norm();
  if (nrm == 0.0) {
    return Eigen::MatrixXd::Identity(k, k).rightCols(k - 1);
  }
  w[0] += (w[0] >= 0.0 ? nrm : -nrm);
  const Eigen::MatrixXd H =
      Eigen::MatrixXd::Identity(k, k) - (2.0 / w.squaredNorm()) * w * w.transpose();
  return H.rightCols(k - 1);
}

}  // namespace degpd
