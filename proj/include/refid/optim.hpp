#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "refid/errors.hpp"

namespace refid::optim {

struct Options {
  double grad_tol = 1e-6;  // on the infinity norm of the gradient
  int max_iters = 500;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 60;
};

struct Result {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_inf = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
  std::vector<double> history;  // objective after each accepted step, history[0] at x0
};

/// Slack on objective comparisons near convergence, relative to |f|.
inline double rounding_slack(double f) { return 64.0 * std::numeric_limits<double>::epsilon() * std::abs(f); }

namespace detail {

inline void require_finite(double f, const Eigen::VectorXd& g) {
  if (!std::isfinite(f) || !g.allFinite())
    throw Error(Errc::non_finite_loss, "objective or gradient is not finite");
}

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), clamped
// into the safeguarded interior of [a, b]; bisects when the cubic is useless.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
  }
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double dg = 0.0;  // directional derivative
  Eigen::VectorXd g;
};

}  // namespace detail

/// Line search for a step satisfying the strong Wolfe conditions along
/// direction d (bracketing followed by zoom). Returns false if no step met
/// them; `best` then holds the lowest point found.
template <class FG>
bool strong_wolfe(FG&& fg, const Eigen::VectorXd& x, double f0, const Eigen::VectorXd& g0, const Eigen::VectorXd& d,
                  double alpha_init, const Options& opt, detail::LinePoint& out, int& evaluations) {
  const double dg0 = g0.dot(d);
  auto eval = [&](double alpha) {
    detail::LinePoint p;
    p.alpha = alpha;
    p.g.resize(x.size());
    p.f = fg(Eigen::VectorXd(x + alpha * d), p.g);
    ++evaluations;
    detail::require_finite(p.f, p.g);
    p.dg = p.g.dot(d);
    return p;
  };
  // Near the optimum f(x + a d) - f0 drops below the rounding error of f, so
  // sufficient decrease is also granted within a few ulps of f0 once the
  // directional derivative (which stays accurate) has shrunk enough.
  const double f_noise = rounding_slack(f0);
  auto armijo = [&](const detail::LinePoint& p) {
    return p.f <= f0 + opt.c1 * p.alpha * dg0 || (p.f <= f0 + f_noise && p.dg <= (2.0 * opt.c1 - 1.0) * dg0);
  };
  auto curvature = [&](const detail::LinePoint& p) { return std::abs(p.dg) <= -opt.c2 * dg0; };

  detail::LinePoint prev;
  prev.alpha = 0.0;
  prev.f = f0;
  prev.dg = dg0;
  prev.g = g0;
  detail::LinePoint best = prev;
  double alpha = alpha_init;

  auto zoom = [&](detail::LinePoint lo, detail::LinePoint hi, int budget) -> bool {
    for (int k = 0; k < budget; ++k) {
      if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) break;
      const double a = detail::cubic_step(lo.alpha, lo.f, lo.dg, hi.alpha, hi.f, hi.dg);
      auto p = eval(a);
      if (p.f < best.f) best = p;
      if (!armijo(p) || p.f > lo.f + f_noise) {
        hi = p;
      } else {
        if (curvature(p)) {
          out = p;
          return true;
        }
        if (p.dg * (hi.alpha - lo.alpha) >= 0) hi = lo;
        lo = p;
      }
    }
    out = best;
    return false;
  };

  for (int i = 0; i < opt.max_line_search; ++i) {
    auto p = eval(alpha);
    if (p.f < best.f) best = p;
    if (!armijo(p) || (i > 0 && p.f > prev.f + f_noise)) return zoom(prev, p, opt.max_line_search - i);
    if (curvature(p)) {
      out = p;
      return true;
    }
    if (p.dg >= 0) return zoom(p, prev, opt.max_line_search - i);
    prev = p;
    alpha *= 2.0;
  }
  out = best;
  return false;
}

/// BFGS with inverse-Hessian updates. `fg(x, grad)` returns f(x) and fills grad.
template <class FG>
Result bfgs(FG&& fg, Eigen::VectorXd x0, const Options& opt = {}) {
  Result r;
  const auto n = x0.size();
  r.x = std::move(x0);
  Eigen::VectorXd g(n);
  r.f = fg(r.x, g);
  r.evaluations = 1;
  detail::require_finite(r.f, g);
  r.history.push_back(r.f);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  for (r.iterations = 0;; ++r.iterations) {
    r.grad_inf = n ? g.lpNorm<Eigen::Infinity>() : 0.0;
    if (r.grad_inf <= opt.grad_tol) {
      r.converged = true;
      r.status = "gradient tolerance reached";
      return r;
    }
    if (r.iterations >= opt.max_iters) {
      r.status = "iteration limit";
      return r;
    }

    Eigen::VectorXd d = -hinv * g;
    if (g.dot(d) >= 0.0) {
      hinv.setIdentity();
      scaled = false;
      d = -g;
    }
    const double alpha0 = scaled ? 1.0 : std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>());

    detail::LinePoint p;
    bool ok = strong_wolfe(fg, r.x, r.f, g, d, alpha0, opt, p, r.evaluations);
    if (!ok && !(p.alpha > 0.0 && p.f < r.f)) {
      if (scaled || hinv != Eigen::MatrixXd::Identity(n, n)) {
        // retry once from steepest descent before giving up
        hinv.setIdentity();
        scaled = false;
        continue;
      }
      r.status = "line search failed";
      return r;
    }

    const Eigen::VectorXd s = p.alpha * d;
    const Eigen::VectorXd y = p.g - g;
    r.x += s;
    r.f = p.f;
    g = p.g;
    r.history.push_back(r.f);

    const double sy = s.dot(y);
    if (sy > std::numeric_limits<double>::epsilon() * s.norm() * y.norm()) {
      if (!scaled) {
        hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv += (rho * rho * yhy + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
}

/// Damped Newton: Cholesky of H + mu*I with mu raised (1e-8, x10) until it
/// factors, then Armijo backtracking from the full step.
template <class FG, class Hess>
Result newton(FG&& fg, Hess&& hess, Eigen::VectorXd x0, const Options& opt = {}) {
  Result r;
  const auto n = x0.size();
  r.x = std::move(x0);
  Eigen::VectorXd g(n);
  r.f = fg(r.x, g);
  r.evaluations = 1;
  detail::require_finite(r.f, g);
  r.history.push_back(r.f);

  for (r.iterations = 0;; ++r.iterations) {
    r.grad_inf = n ? g.lpNorm<Eigen::Infinity>() : 0.0;
    if (r.grad_inf <= opt.grad_tol) {
      r.converged = true;
      r.status = "gradient tolerance reached";
      return r;
    }
    if (r.iterations >= opt.max_iters) {
      r.status = "iteration limit";
      return r;
    }

    const Eigen::MatrixXd h = hess(r.x);
    if (!h.allFinite()) throw Error(Errc::non_finite_loss, "Hessian is not finite");
    Eigen::VectorXd d;
    double shift = 0.0;
    for (;;) {
      Eigen::LLT<Eigen::MatrixXd> llt(h + shift * Eigen::MatrixXd::Identity(n, n));
      if (llt.info() == Eigen::Success) {
        d = llt.solve(-g);
        if (d.allFinite() && g.dot(d) < 0.0) break;
      }
      shift = shift == 0.0 ? 1e-8 : shift * 10.0;
      if (shift > 1e12) {
        d = -g;
        break;
      }
    }

    const double dg0 = g.dot(d);
    const double slack = rounding_slack(r.f);
    double alpha = 1.0;
    Eigen::VectorXd gt(n);
    bool accepted = false;
    for (int k = 0; k < opt.max_line_search; ++k) {
      const double ft = fg(Eigen::VectorXd(r.x + alpha * d), gt);
      ++r.evaluations;
      detail::require_finite(ft, gt);
      if (ft <= r.f + opt.c1 * alpha * dg0 || (ft <= r.f + slack && gt.dot(d) <= 0.5 * std::abs(dg0))) {
        r.x += alpha * d;
        r.f = ft;
        g = gt;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      r.status = "line search failed";
      return r;
    }
    r.history.push_back(r.f);
  }
}

}  // namespace refid::optim
