#include "conmix/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace conmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : kNegInf;
}

} // namespace

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double rel) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + h;
    const double up = f(xp);
    xp(i) = x(i) - h;
    const double dn = f(xp);
    xp(i) = x(i);
    g(i) = (up - dn) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel) {
  const Eigen::Index k = x.size();
  Eigen::MatrixXd H(k, k);
  Eigen::VectorXd h(k);
  for (Eigen::Index i = 0; i < k; ++i) h(i) = rel * (1.0 + std::abs(x(i)));
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < k; ++i) {
    xp(i) = x(i) + h(i);
    const double up = f(xp);
    xp(i) = x(i) - h(i);
    const double dn = f(xp);
    xp(i) = x(i);
    H(i, i) = (up - 2.0 * f0 + dn) / (h(i) * h(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      auto at = [&](double si, double sj) {
        xp(i) = x(i) + si * h(i);
        xp(j) = x(j) + sj * h(j);
        const double v = f(xp);
        xp(i) = x(i);
        xp(j) = x(j);
        return v;
      };
      H(i, j) = H(j, i) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4.0 * h(i) * h(j));
    }
  }
  return H;
}

OptimizerResult bfgs_maximize(const Objective& f, const Eigen::VectorXd& x0,
                              const OptimizerOptions& opts) {
  const Eigen::Index k = x0.size();
  OptimizerResult res;
  res.x = x0;
  res.value = safe_eval(f, x0);
  if (res.value == kNegInf) {
    res.message = "objective not finite at the starting point";
    res.gradient = Eigen::VectorXd::Constant(k, std::numeric_limits<double>::quiet_NaN());
    return res;
  }
  res.trace.push_back(res.value);
  if (k == 0) {
    res.gradient.resize(0);
    res.converged = true;
    res.message = "no free parameters";
    return res;
  }
  // minimize F = -f
  Eigen::VectorXd g = -numeric_gradient(f, res.x);
  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(k, k);
  bool scaled = false;
  int failures = 0;
  for (int it = 0; it < opts.max_iter; ++it) {
    if (!g.allFinite()) {
      res.message = "non-finite gradient";
      break;
    }
    if (g.lpNorm<Eigen::Infinity>() < opts.tol) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      break;
    }
    Eigen::VectorXd dir = -Hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      Hinv.setIdentity();
      dir = -g;
      slope = g.dot(dir);
    }
    const double norm = dir.norm();
    if (norm > opts.max_step) {
      dir *= opts.max_step / norm;
      slope *= opts.max_step / norm;
    }

    // backtracking with quadratic then cubic interpolation on F(x + t dir)
    const double F0 = -res.value;
    double t = 1.0, t_prev = 0.0, F_prev = 0.0;
    double Ft = -safe_eval(f, res.x + t * dir);
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      if (std::isfinite(Ft) && Ft <= F0 + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      double t_new;
      if (!std::isfinite(Ft)) {
        t_new = 0.1 * t;
      } else if (ls == 0 || !std::isfinite(F_prev)) {
        t_new = -slope * t * t / (2.0 * (Ft - F0 - slope * t));
      } else {
        const double r1 = Ft - F0 - slope * t;
        const double r2 = F_prev - F0 - slope * t_prev;
        const double a = (r1 / (t * t) - r2 / (t_prev * t_prev)) / (t - t_prev);
        const double b = (-t_prev * r1 / (t * t) + t * r2 / (t_prev * t_prev)) / (t - t_prev);
        if (a == 0.0) {
          t_new = -slope / (2.0 * b);
        } else {
          const double disc = b * b - 3.0 * a * slope;
          t_new = disc < 0.0 ? 0.5 * t : (-b + std::sqrt(disc)) / (3.0 * a);
        }
      }
      if (!std::isfinite(t_new)) t_new = 0.5 * t;
      t_new = std::clamp(t_new, 0.1 * t, 0.5 * t);
      t_prev = t;
      F_prev = Ft;
      t = t_new;
      Ft = -safe_eval(f, res.x + t * dir);
      if (t * norm < 1e-14) break;
    }
    if (!accepted) {
      if (++failures >= 2) {
        res.message = "line search failed";
        break;
      }
      Hinv.setIdentity();
      scaled = false;
      continue;
    }
    failures = 0;
    const Eigen::VectorXd s = t * dir;
    res.x += s;
    res.value = -Ft;
    res.trace.push_back(res.value);
    res.iterations = it + 1;
    const Eigen::VectorXd g_new = -numeric_gradient(f, res.x);
    const Eigen::VectorXd yv = g_new - g;
    g = g_new;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        Hinv = (sy / yv.squaredNorm()) * Eigen::MatrixXd::Identity(k, k);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(k, k);
      Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) +
             rho * s * s.transpose();
    }
    if (it + 1 == opts.max_iter) res.message = "iteration limit reached";
  }
  res.gradient = -g;
  if (!res.converged && res.gradient.allFinite() && res.gradient.lpNorm<Eigen::Infinity>() < opts.tol) {
    res.converged = true;
  }
  return res;
}

} // namespace conmix
