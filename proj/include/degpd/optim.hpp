#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

#include "degpd/math.hpp"

// Quasi-Newton machinery used by the iid and GAM fitters: central-difference
// derivatives and a BFGS ascent that tolerates objectives returning -inf as a
// rejection value (the line search simply backs off).

namespace degpd {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Central-difference gradient with per-coordinate step h_i = step*(1+|x_i|).
/// Falls back to a one-sided difference when a probe point is rejected.
inline Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x,
                                   double step = 1e-6,
                                   double fx = std::numeric_limits<double>::quiet_NaN()) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n);
  bool have_fx = std::isfinite(fx);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = step * (1.0 + std::fabs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(xp);
    const double fm = f(xm);
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[i] = (fp - fm) / (2.0 * h);
    } else {
      if (!have_fx) {
        fx = f(x);
        have_fx = true;
      }
      if (std::isfinite(fp)) {
        g[i] = (fp - fx) / h;
      } else if (std::isfinite(fm)) {
        g[i] = (fx - fm) / h;
      } else {
        g[i] = 0.0;
      }
    }
  }
  return g;
}

/// Hessian as central differences of fd_gradient. The outer step is larger
/// than the inner one so gradient noise is not amplified.
inline Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x,
                                  double grad_step = 1e-6,
                                  double outer_step = 1e-4) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = outer_step * (1.0 + std::fabs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Eigen::VectorXd gp = fd_gradient(f, xp, grad_step);
    const Eigen::VectorXd gm = fd_gradient(f, xm, grad_step);
    H.col(i) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

struct BfgsOptions {
  int max_iter = 300;
  double tol = 1e-6;        // converged when ||grad||_inf <= tol*(1+|f|)
  double grad_step = 1e-6;  // finite-difference step scale
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = kNegInf;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// BFGS ascent of f from x0. The start must have a finite value; every
/// accepted iterate keeps the Armijo condition, so the returned value never
/// drops below f(x0).
inline BfgsResult maximize_bfgs(const Objective& f, Eigen::VectorXd x0,
                                const BfgsOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  if (!std::isfinite(res.value)) return res;  // caller treats as failed start

  Eigen::VectorXd g = fd_gradient(f, res.x, opt.grad_step, res.value);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);

  auto converged_at = [&](double fval, const Eigen::VectorXd& grad) {
    return grad.lpNorm<Eigen::Infinity>() <= opt.tol * (1.0 + std::fabs(fval));
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter;
    if (converged_at(res.value, g)) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd dir = Hinv * g;
    double slope = g.dot(dir);
    if (!(slope > 0.0) || !dir.allFinite()) {
      Hinv.setIdentity();
      dir = g;
      slope = g.dot(dir);
      if (!(slope > 0.0)) {
        res.converged = converged_at(res.value, g);
        break;
      }
    }

    // Backtracking Armijo line search; -inf trial values just shrink alpha.
    const double c1 = 1e-4;
    double alpha = 1.0;
    double fnew = kNegInf;
    Eigen::VectorXd xnew;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xnew = res.x + alpha * dir;
      fnew = f(xnew);
      if (std::isfinite(fnew) && fnew >= res.value + c1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      res.converged = converged_at(res.value, g);
      break;
    }

    const Eigen::VectorXd gnew = fd_gradient(f, xnew, opt.grad_step, fnew);
    const Eigen::VectorXd s = xnew - res.x;
    const Eigen::VectorXd y = gnew - g;  // note: ascent, curvature is s.y < 0

    res.x = xnew;
    res.value = fnew;
    g = gnew;

    const double sy = s.dot(y);
    if (sy < -1e-12 * s.norm() * y.norm()) {
      // BFGS update of the inverse Hessian of -f, rewritten in terms of the
      // ascent quantities: with rho = 1/(s.y) < 0,
      //   H+ = (I - rho s y^T) H (I - rho y s^T) - rho s s^T.
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) -
             rho * s * s.transpose();
    } else {
      Hinv.setIdentity();
    }

    if (s.lpNorm<Eigen::Infinity>() <
        1e-13 * (1.0 + res.x.lpNorm<Eigen::Infinity>())) {
      res.converged = converged_at(res.value, g);
      break;
    }
    res.iterations = iter + 1;
  }

  if (!res.converged) res.converged = converged_at(res.value, g);
  res.gradient = g;
  return res;
}

}  // namespace degpd
