#ifndef CONMIX_TEST_ORACLES_HPP
#define CONMIX_TEST_ORACLES_HPP

// Reference computations written independently of the library code paths:
// direct closed forms, brute-force quadrature and plain Monte Carlo.

#include <conmix/model.hpp>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline double lgam(double x) { return std::lgamma(x); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double gamma_pdf(double t, double a, double b) {
  if (t <= 0.0) return 0.0;
  return std::exp((a - 1.0) * std::log(t) - t / b - lgam(a) - a * std::log(b));
}

inline double beta_pdf(double t, double a, double b) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return std::exp((a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t) - lgam(a) - lgam(b) + lgam(a + b));
}

inline double poisson_pmf(double y, double mu) { return std::exp(y * std::log(mu) - mu - lgam(y + 1.0)); }

inline double weibull_pdf(double y, double rate, double rho) {
  return rho * std::pow(y, rho - 1.0) * rate * std::exp(-rate * std::pow(y, rho));
}

// int_0^inf f(t) Gamma(t; a, scale b) dt
inline double integrate_gamma(const std::function<double(double)>& f, double a, double b) {
  // split at the mode region so both pieces are smooth for the rules
  boost::math::quadrature::tanh_sinh<double> ts(15);
  boost::math::quadrature::exp_sinh<double> es(15);
  const double cut = std::max(a * b, b);
  auto g = [&](double t) { return f(t) * gamma_pdf(t, a, b); };
  return ts.integrate(g, 0.0, cut, 1e-15) + es.integrate(g, cut, std::numeric_limits<double>::infinity(), 1e-15);
}

// The two-argument integrand receives the distance to the nearer endpoint,
// which keeps the (1 - t)^(b - 1) factor accurate next to t = 1.
inline double integrate_beta(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> ts(15);
  const double norm = lgam(a) + lgam(b) - lgam(a + b);
  auto g = [&](double t, double tc) {
    const double lo = tc < 0.0 ? -tc : t;
    const double hi = tc > 0.0 ? tc : 1.0 - t;
    if (lo <= 0.0 || hi <= 0.0) return 0.0;
    return f(t) * std::exp((a - 1.0) * std::log(lo) + (b - 1.0) * std::log(hi) - norm);
  };
  return ts.integrate(g, 0.0, 1.0, 1e-15);
}

// Negative-binomial pmf with gamma(a, b) mixing of a Poisson(kappa * theta).
inline double nb_log_pmf(double y, double kappa, double a, double b) {
  return lgam(a + y) - lgam(a) - lgam(y + 1.0) + y * std::log(kappa * b) - (a + y) * std::log1p(kappa * b);
}

// Weibull(rate kappa*theta, shape rho) mixed over gamma(a, b).
inline double weibull_gamma_log_pdf(double y, double kappa, double rho, double a, double b) {
  const double t = std::pow(y, rho);
  return std::log(rho) + (rho - 1.0) * std::log(y) + std::log(a * b * kappa) - (a + 1.0) * std::log1p(b * kappa * t);
}

// Shared gamma effect over all outcomes of a subject (Poisson).
inline double shared_nb_log_pmf(const std::vector<double>& y, const std::vector<double>& kappa, double a, double b) {
  double sy = 0, sk = 0, out = 0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    sy += y[j];
    sk += kappa[j];
    out += y[j] * std::log(kappa[j]) - lgam(y[j] + 1.0);
  }
  return out + lgam(a + sy) - lgam(a) + sy * std::log(b) - (a + sy) * std::log1p(b * sk);
}

// Log of f(y | eta) with any independent conjugate effect integrated out,
// written from the textbook forms.
struct ObsModel {
  conmix::FamilyKind family;
  conmix::Overdispersion od = conmix::Overdispersion::None;
  double alpha = 1.0, beta = 1.0; // gamma
  double pi0 = 1.0;               // beta effect mean
  double rho = 1.0, sigma = 1.0;

  double log_f(double y, double eta) const {
    using conmix::FamilyKind;
    const bool gamma = od != conmix::Overdispersion::None;
    switch (family) {
    case FamilyKind::Poisson:
      return gamma ? nb_log_pmf(y, std::exp(eta), alpha, beta) : std::log(poisson_pmf(y, std::exp(eta)));
    case FamilyKind::Weibull:
      return gamma ? weibull_gamma_log_pdf(y, std::exp(eta), rho, alpha, beta)
                   : std::log(weibull_pdf(y, std::exp(eta), rho));
    case FamilyKind::BernoulliLogit: {
      const double p = pi0 * sigmoid(eta);
      return y == 1.0 ? std::log(p) : std::log1p(-p);
    }
    case FamilyKind::BernoulliProbit: {
      const double p = pi0 * Phi(eta);
      return y == 1.0 ? std::log(p) : std::log1p(-p);
    }
    case FamilyKind::Normal:
      return -0.5 * std::log(2 * std::numbers::pi * sigma * sigma) - 0.5 * (y - eta) * (y - eta) / (sigma * sigma);
    }
    return 0.0;
  }
};

// log int prod_j f(y_j | x_j'xi + z_j'b) N(b; 0, D) db by a dense trapezoid
// rule over b = L u, u on [-half, half]^q.
inline double trapezoid_subject_loglik(const ObsModel& m, const conmix::Subject& s, const Eigen::VectorXd& xi,
                                       const Eigen::MatrixXd& D, int points = 4001, double half = 10.0) {
  const int q = static_cast<int>(D.rows());
  const Eigen::VectorXd eta0 = s.X * xi;
  auto logf = [&](const Eigen::VectorXd& b) {
    double acc = 0.0;
    const Eigen::VectorXd eta = eta0 + s.Z * b;
    for (int j = 0; j < s.n(); ++j) acc += m.log_f(s.y(j), eta(j));
    return acc;
  };
  if (q == 0) return logf(Eigen::VectorXd::Zero(0));
  Eigen::LLT<Eigen::MatrixXd> llt(D);
  const Eigen::MatrixXd L = llt.matrixL();
  const double h = 2.0 * half / (points - 1);
  std::vector<double> logs;
  logs.reserve(q == 1 ? points : static_cast<std::size_t>(points) * points);
  Eigen::VectorXd u(q);
  if (q == 1) {
    for (int i = 0; i < points; ++i) {
      u(0) = -half + i * h;
      const double w = (i == 0 || i == points - 1) ? 0.5 : 1.0;
      logs.push_back(std::log(w * h) + logf(L * u) - 0.5 * u.squaredNorm() - 0.5 * std::log(2 * std::numbers::pi));
    }
  } else {
    for (int i = 0; i < points; ++i) {
      for (int k = 0; k < points; ++k) {
        u(0) = -half + i * h;
        u(1) = -half + k * h;
        const double w = ((i == 0 || i == points - 1) ? 0.5 : 1.0) * ((k == 0 || k == points - 1) ? 0.5 : 1.0);
        logs.push_back(std::log(w * h * h) + logf(L * u) - 0.5 * u.squaredNorm() - std::log(2 * std::numbers::pi));
      }
    }
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logs) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logs) sum += std::exp(v - mx);
  return mx + std::log(sum);
}

// Multivariate normal log density.
inline double mvn_log_pdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd r = llt.matrixL().solve(y - mean);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(y.size()) * std::log(2 * std::numbers::pi) + logdet + r.squaredNorm());
}

// Running mean and the standard error of the mean.
struct Moments {
  double n = 0, mean = 0, m2 = 0;
  void add(double x) {
    n += 1;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double var() const { return m2 / (n - 1); }
  double se() const { return std::sqrt(var() / n); }
};

// Sample covariance of (x, y) with the standard error estimated from the
// products.
struct CovAccumulator {
  Moments x, y, xy;
  std::vector<double> xs, ys;
  void add(double a, double b) {
    xs.push_back(a);
    ys.push_back(b);
  }
  // returns (estimate, se)
  std::pair<double, double> cov() const {
    Moments mx, my;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx.add(xs[i]);
      my.add(ys[i]);
    }
    Moments prod;
    for (std::size_t i = 0; i < xs.size(); ++i) prod.add((xs[i] - mx.mean) * (ys[i] - my.mean));
    return {prod.mean * prod.n / (prod.n - 1), prod.se()};
  }
};

} // namespace oracle

#endif
