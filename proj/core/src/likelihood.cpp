#include "conmix/likelihood.hpp"

#include "conmix/errors.hpp"
#include "conmix/parallel.hpp"
#include "conmix/special_fns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>

namespace conmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594;
constexpr double kInf = std::numeric_limits<double>::infinity();

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double log_std_normal_pdf(double x) { return -0.5 * x * x - 0.5 * kLog2Pi; }

const NodeSet& cached_gh(int order) {
  static std::mutex guard;
  static std::map<int, NodeSet> cache;
  std::lock_guard lock(guard);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, gh_nodes(order)).first;
  return it->second;
}

// Parameters of the conditional density, prepared once per evaluation.
struct Kernel {
  FamilyKind family;
  Overdispersion od;
  bool gamma = false;
  bool beta = false;
  std::vector<double> alpha, log_beta, lgamma_alpha;
  std::vector<bool> degenerate; // alpha = inf: theta is identically 1
  double log_pi0 = 0.0;
  double log1m_pi0 = -kInf;
  double a = 1.0, b = 1.0, log_beta_fn = 0.0; // shared beta effects
  double rho = 1.0, log_rho = 0.0;
  double sigma = 1.0;

  Kernel(const ModelSpec& spec, const Params& p) : family(spec.family), od(spec.overdispersion) {
    gamma = spec.gamma_effects();
    beta = spec.beta_effects();
    if (gamma) {
      if (p.alpha.empty() || p.alpha.size() != p.beta.size()) {
        throw ValidationError("gamma overdispersion needs alpha and beta values");
      }
      for (std::size_t g = 0; g < p.alpha.size(); ++g) {
        if (!(p.alpha[g] > 0.0) || !(p.beta[g] > 0.0)) {
          throw DomainError("gamma effect parameters must be positive");
        }
        const bool inf = std::isinf(p.alpha[g]);
        degenerate.push_back(inf);
        alpha.push_back(p.alpha[g]);
        log_beta.push_back(std::log(p.beta[g]));
        lgamma_alpha.push_back(inf ? kInf : log_gamma(p.alpha[g]));
      }
    }
    if (beta) {
      if (!(p.pi0 > 0.0 && p.pi0 <= 1.0)) throw DomainError("pi0 must lie in (0, 1]");
      log_pi0 = std::log(p.pi0);
      log1m_pi0 = p.pi0 < 1.0 ? std::log1p(-p.pi0) : -kInf;
      if (od == Overdispersion::Shared) {
        if (!(p.pi0 < 1.0) || !(p.nu > 0.0)) {
          throw DomainError("shared beta effects need pi0 < 1 and nu > 0");
        }
        a = p.pi0 * p.nu;
        b = (1.0 - p.pi0) * p.nu;
        log_beta_fn = log_gamma(a) + log_gamma(b) - log_gamma(a + b);
      }
    }
    if (family == FamilyKind::Weibull) {
      if (!(p.rho > 0.0)) throw DomainError("Weibull shape must be positive");
      rho = p.rho;
      log_rho = std::log(p.rho);
    }
    if (family == FamilyKind::Normal) {
      if (!(p.sigma > 0.0)) throw DomainError("sigma must be positive");
      sigma = p.sigma;
    }
  }

  bool theta_free(int g) const { return gamma && !degenerate.at(g); }
};

// Quantities of one outcome that do not depend on eta.
struct ObsCache {
  double y = 0.0;
  int group = 0;
  double lgamma_y1 = 0.0;  // ln y!
  double lgamma_ratio = 0; // ln Gamma(alpha+y) - ln Gamma(alpha)
  double log_y = 0.0;
  double t = 1.0;          // y^rho
  double log_t = 0.0;
  double weibull_const = 0.0; // ln rho + (rho-1) ln y
};

ObsCache make_cache(const Kernel& k, double y, int group) {
  ObsCache c;
  c.y = y;
  c.group = group;
  switch (k.family) {
  case FamilyKind::Poisson:
    c.lgamma_y1 = log_gamma(y + 1.0);
    if (k.theta_free(group)) c.lgamma_ratio = log_gamma(k.alpha[group] + y) - k.lgamma_alpha[group];
    break;
  case FamilyKind::Weibull:
    c.log_y = std::log(y);
    c.log_t = k.rho * c.log_y;
    c.t = std::exp(c.log_t);
    c.weibull_const = k.log_rho + (k.rho - 1.0) * c.log_y;
    break;
  default:
    break;
  }
  return c;
}

struct Term {
  double f = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

// log f(y | eta) with an independent conjugate effect integrated out, and its
// first two eta-derivatives.
Term obs_term(const Kernel& k, const ObsCache& c, double eta) {
  Term out;
  const double y = c.y;
  switch (k.family) {
  case FamilyKind::Normal: {
    const double s2 = k.sigma * k.sigma;
    const double r = y - eta;
    out.f = -0.5 * r * r / s2 - 0.5 * (kLog2Pi + std::log(s2));
    out.d1 = r / s2;
    out.d2 = -1.0 / s2;
    break;
  }
  case FamilyKind::Poisson:
    if (!k.theta_free(c.group)) {
      const double mu = std::exp(eta);
      out.f = y * eta - mu - c.lgamma_y1;
      out.d1 = y - mu;
      out.d2 = -mu;
    } else {
      const double a = k.alpha[c.group];
      const double z = eta + k.log_beta[c.group];
      const double p = sigmoid(z);
      out.f = c.lgamma_ratio + y * z - (a + y) * log1pexp(z) - c.lgamma_y1;
      out.d1 = y - (a + y) * p;
      out.d2 = -(a + y) * p * (1.0 - p);
    }
    break;
  case FamilyKind::Weibull:
    if (!k.theta_free(c.group)) {
      const double h = std::exp(eta + c.log_t);
      out.f = c.weibull_const + eta - h;
      out.d1 = 1.0 - h;
      out.d2 = -h;
    } else {
      const double a = k.alpha[c.group];
      const double lb = k.log_beta[c.group];
      const double z = eta + lb + c.log_t;
      const double p = sigmoid(z);
      out.f = c.weibull_const + eta + std::log(a) + lb - (a + 1.0) * log1pexp(z);
      out.d1 = 1.0 - (a + 1.0) * p;
      out.d2 = -(a + 1.0) * p * (1.0 - p);
    }
    break;
  case FamilyKind::BernoulliLogit:
    if (y == 1.0) {
      const double s = sigmoid(eta);
      out.f = k.log_pi0 - log1pexp(-eta);
      out.d1 = 1.0 - s;
      out.d2 = -s * (1.0 - s);
    } else if (k.log1m_pi0 == -kInf) {
      const double s = sigmoid(eta);
      out.f = -log1pexp(eta);
      out.d1 = -s;
      out.d2 = -s * (1.0 - s);
    } else {
      // 1 - pi0 s(eta) = (1 + (1-pi0) e^eta) / (1 + e^eta)
      const double s = sigmoid(eta);
      const double s1 = sigmoid(eta + k.log1m_pi0);
      out.f = log1pexp(eta + k.log1m_pi0) - log1pexp(eta);
      out.d1 = s1 - s;
      out.d2 = s1 * (1.0 - s1) - s * (1.0 - s);
    }
    break;
  case FamilyKind::BernoulliProbit:
    if (y == 1.0) {
      out.f = k.log_pi0 + log_std_normal_cdf(eta);
      const double m = std::exp(log_std_normal_pdf(eta) - log_std_normal_cdf(eta));
      out.d1 = m;
      out.d2 = -eta * m - m * m;
    } else {
      // 1 - pi0 Phi(eta) = (1 - pi0) + pi0 Phi(-eta)
      out.f = log_add_exp(k.log1m_pi0, k.log_pi0 + log_std_normal_cdf(-eta));
      const double d1 = -std::exp(k.log_pi0 + log_std_normal_pdf(eta) - out.f);
      out.d1 = d1;
      out.d2 = -eta * d1 - d1 * d1;
    }
    break;
  }
  return out;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf || !std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Joint conditional log density of one subject's outcomes given eta, with
// eta-derivatives. The Hessian is diag(hdiag) + hscale * p p^T.
struct Joint {
  double f = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd hdiag;
  double hscale = 0.0;
  Eigen::VectorXd p;
};

class SubjectEval {
public:
  SubjectEval(const Kernel& k, std::span<const double> y, std::span<const int> groups)
      : k_(k), n_(static_cast<int>(y.size())) {
    cache_.reserve(n_);
    for (int j = 0; j < n_; ++j) cache_.push_back(make_cache(k, y[j], groups.empty() ? 0 : groups[j]));
    shared_gamma_ = k.gamma && k.od == Overdispersion::Shared && !k.degenerate[0];
    shared_beta_ = k.beta && k.od == Overdispersion::Shared;
    if (shared_gamma_) {
      for (const auto& c : cache_) {
        sum_y_ += c.y;
        sum_const_ += k.family == FamilyKind::Poisson ? -c.lgamma_y1 : c.weibull_const;
      }
      const double a = k.alpha[0];
      const double m = k.family == FamilyKind::Poisson ? sum_y_ : n_;
      shape_ = a + m;
      lgamma_ratio_ = log_gamma(a + m) - k.lgamma_alpha[0];
    }
  }

  bool analytic_derivatives() const { return !shared_beta_; }

  Joint eval(const Eigen::VectorXd& eta, bool derivs) const {
    if (shared_gamma_) return shared_gamma(eta, derivs);
    if (shared_beta_) return {shared_beta(eta), {}, {}, 0.0, {}};
    Joint out;
    if (derivs) {
      out.grad.resize(n_);
      out.hdiag.resize(n_);
    }
    for (int j = 0; j < n_; ++j) {
      const Term t = obs_term(k_, cache_[j], eta(j));
      out.f += t.f;
      if (derivs) {
        out.grad(j) = t.d1;
        out.hdiag(j) = t.d2;
      }
    }
    return out;
  }

private:
  Joint shared_gamma(const Eigen::VectorXd& eta, bool derivs) const {
    const double lb = k_.log_beta[0];
    // z_j = ln(beta kappa_j t_j); Weibull carries t_j = y_j^rho
    Eigen::VectorXd z(n_);
    double zmax = -kInf;
    for (int j = 0; j < n_; ++j) {
      z(j) = eta(j) + lb + (k_.family == FamilyKind::Weibull ? cache_[j].log_t : 0.0);
      zmax = std::max(zmax, z(j));
    }
    double s = 0.0;
    for (int j = 0; j < n_; ++j) s += std::exp(z(j) - zmax);
    const double lse = zmax + std::log(s);
    const double log_denom = log1pexp(lse);
    Joint out;
    double lin = 0.0;
    if (k_.family == FamilyKind::Poisson) {
      for (int j = 0; j < n_; ++j) lin += cache_[j].y * eta(j);
      out.f = sum_const_ + lin + lgamma_ratio_ + sum_y_ * lb - shape_ * log_denom;
    } else {
      for (int j = 0; j < n_; ++j) lin += eta(j);
      out.f = sum_const_ + lin + lgamma_ratio_ + n_ * lb - shape_ * log_denom;
    }
    if (derivs) {
      out.p.resize(n_);
      out.grad.resize(n_);
      for (int j = 0; j < n_; ++j) {
        out.p(j) = std::exp(z(j) - log_denom);
        const double base = k_.family == FamilyKind::Poisson ? cache_[j].y : 1.0;
        out.grad(j) = base - shape_ * out.p(j);
      }
      out.hdiag = -shape_ * out.p;
      out.hscale = shape_;
    }
    return out;
  }

  double shared_beta(const Eigen::VectorXd& eta) const {
    // prod over zeros of (1 - kappa theta) = prod ((1-kappa) + kappa (1-theta)),
    // expanded in powers of (1 - theta) with nonnegative coefficients.
    double log_ones = 0.0;
    int ones = 0;
    std::vector<double> coef{1.0};
    double log_scale = 0.0;
    for (int j = 0; j < n_; ++j) {
      double kap, kbar;
      if (k_.family == FamilyKind::BernoulliLogit) {
        kap = sigmoid(eta(j));
        kbar = sigmoid(-eta(j));
      } else {
        kap = std_normal_cdf(eta(j));
        kbar = std_normal_cdf(-eta(j));
      }
      if (cache_[j].y == 1.0) {
        ++ones;
        log_ones += k_.family == FamilyKind::BernoulliLogit ? -log1pexp(-eta(j))
                                                            : log_std_normal_cdf(eta(j));
      } else {
        std::vector<double> next(coef.size() + 1, 0.0);
        for (std::size_t m = 0; m < coef.size(); ++m) {
          next[m] += coef[m] * kbar;
          next[m + 1] += coef[m] * kap;
        }
        double mx = 0.0;
        for (double v : next) mx = std::max(mx, v);
        if (mx > 0.0) {
          for (double& v : next) v /= mx;
          log_scale += std::log(mx);
        }
        coef.swap(next);
      }
    }
    std::vector<double> terms;
    terms.reserve(coef.size());
    for (std::size_t m = 0; m < coef.size(); ++m) {
      if (coef[m] <= 0.0) continue;
      const double ab = k_.a + ones;
      const double bb = k_.b + static_cast<double>(m);
      terms.push_back(std::log(coef[m]) + log_gamma(ab) + log_gamma(bb) - log_gamma(ab + bb) -
                      k_.log_beta_fn);
    }
    return log_ones + log_scale + log_sum_exp(terms);
  }

  const Kernel& k_;
  int n_;
  std::vector<ObsCache> cache_;
  bool shared_gamma_ = false;
  bool shared_beta_ = false;
  double sum_y_ = 0.0;
  double sum_const_ = 0.0;
  double shape_ = 0.0;
  double lgamma_ratio_ = 0.0;
};

double normal_subject_loglik(const Params& params, const Subject& s) {
  const int n = s.n();
  Eigen::MatrixXd V = params.sigma * params.sigma * Eigen::MatrixXd::Identity(n, n);
  if (s.Z.cols() > 0) V.noalias() += s.Z * params.D * s.Z.transpose();
  const Eigen::VectorXd r = s.y - s.X * params.xi;
  Eigen::LLT<Eigen::MatrixXd> llt(V);
  if (llt.info() != Eigen::Success) throw NumericError("marginal covariance not positive definite for subject " + s.id);
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::VectorXd w = L.triangularView<Eigen::Lower>().solve(r);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += 2.0 * std::log(L(i, i));
  return -0.5 * (n * kLog2Pi + logdet + w.squaredNorm());
}

// ell(u) = log f(y | X xi + A u) - u'u/2 - (q/2) log 2 pi, with derivatives in u.
struct Integrand {
  const SubjectEval& ev;
  const Eigen::VectorXd& offset;
  const Eigen::MatrixXd& A;
  int q;

  double value(const Eigen::VectorXd& u) const {
    const Eigen::VectorXd eta = offset + A * u;
    return ev.eval(eta, false).f - 0.5 * u.squaredNorm() - 0.5 * q * kLog2Pi;
  }

  double derivatives(const Eigen::VectorXd& u, Eigen::VectorXd& g, Eigen::MatrixXd& H) const {
    if (!ev.analytic_derivatives()) return numeric(u, g, H);
    const Eigen::VectorXd eta = offset + A * u;
    const Joint j = ev.eval(eta, true);
    g = A.transpose() * j.grad - u;
    H = A.transpose() * j.hdiag.asDiagonal() * A - Eigen::MatrixXd::Identity(q, q);
    if (j.hscale != 0.0) {
      const Eigen::VectorXd ap = A.transpose() * j.p;
      H += j.hscale * ap * ap.transpose();
    }
    return j.f - 0.5 * u.squaredNorm() - 0.5 * q * kLog2Pi;
  }

  double numeric(const Eigen::VectorXd& u, Eigen::VectorXd& g, Eigen::MatrixXd& H) const {
    const double f0 = value(u);
    g.resize(q);
    H.resize(q, q);
    const double h1 = 1e-5;
    const double h2 = 1e-4;
    for (int i = 0; i < q; ++i) {
      Eigen::VectorXd up = u, dn = u;
      up(i) += h1;
      dn(i) -= h1;
      g(i) = (value(up) - value(dn)) / (2.0 * h1);
      up = u;
      dn = u;
      up(i) += h2;
      dn(i) -= h2;
      H(i, i) = (value(up) - 2.0 * f0 + value(dn)) / (h2 * h2);
      for (int k = 0; k < i; ++k) {
        Eigen::VectorXd pp = u, pm = u, mp = u, mm = u;
        pp(i) += h2, pp(k) += h2;
        pm(i) += h2, pm(k) -= h2;
        mp(i) -= h2, mp(k) += h2;
        mm(i) -= h2, mm(k) -= h2;
        H(i, k) = H(k, i) = (value(pp) - value(pm) - value(mp) + value(mm)) / (4.0 * h2 * h2);
      }
    }
    return f0;
  }
};

// Newton ascent to the mode of ell; returns false when the curvature at the
// end point is not negative definite.
bool find_mode(const Integrand& fn, Eigen::VectorXd& u, Eigen::MatrixXd& H) {
  const int q = fn.q;
  u = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd g;
  double f = fn.derivatives(u, g, H);
  for (int it = 0; it < 200; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-8) break;
    Eigen::MatrixXd negH = -H;
    Eigen::VectorXd step;
    double mu = 0.0;
    for (int tries = 0; tries < 60; ++tries) {
      Eigen::LLT<Eigen::MatrixXd> llt(negH + mu * Eigen::MatrixXd::Identity(q, q));
      if (llt.info() == Eigen::Success) {
        step = llt.solve(g);
        break;
      }
      mu = mu == 0.0 ? 1e-6 * (1.0 + negH.cwiseAbs().maxCoeff()) : mu * 10.0;
    }
    if (step.size() != q || !step.allFinite()) step = g;
    double t = 1.0;
    double fnew = -kInf;
    Eigen::VectorXd unew;
    for (int ls = 0; ls < 60; ++ls) {
      unew = u + t * step;
      fnew = fn.value(unew);
      if (std::isfinite(fnew) && fnew >= f - 1e-12 * std::abs(f)) break;
      t *= 0.5;
    }
    if (!std::isfinite(fnew)) break;
    const double moved = (unew - u).lpNorm<Eigen::Infinity>();
    u = unew;
    f = fn.derivatives(u, g, H);
    if (moved < 1e-15) break;
  }
  Eigen::LLT<Eigen::MatrixXd> check(-H);
  return check.info() == Eigen::Success;
}

double quadrature_loglik(const Kernel& k, const Params& params, const Subject& s,
                         const QuadratureRule& quad) {
  const int q = static_cast<int>(s.Z.cols());
  SubjectEval ev(k, std::span<const double>(s.y.data(), s.y.size()), s.group);
  const Eigen::VectorXd offset = s.X * params.xi;
  const Eigen::MatrixXd Lfac = psd_factor(params.D);
  if (q == 0 || Lfac.isZero(0.0)) return ev.eval(offset, false).f;
  const Eigen::MatrixXd A = s.Z * Lfac;
  Integrand fn{ev, offset, A, q};

  Eigen::VectorXd center = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(q, q);
  double log_det_c = 0.0;
  if (quad.adaptive) {
    Eigen::MatrixXd H;
    if (find_mode(fn, center, H)) {
      Eigen::LLT<Eigen::MatrixXd> llt(-H);
      const Eigen::MatrixXd R = llt.matrixL();
      // (-H)^{-1} = R^{-T} R^{-1}
      C = R.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(q, q));
      for (int i = 0; i < q; ++i) log_det_c -= std::log(R(i, i));
    }
  }

  const int order = q == 1 ? quad.order : quad.order_2d;
  const NodeSet& gh = cached_gh(order);
  const double sqrt2 = std::numbers::sqrt2;
  std::vector<double> terms;
  if (q == 1) {
    terms.reserve(order);
    Eigen::VectorXd v(1);
    for (int i = 0; i < order; ++i) {
      const double x = gh.nodes[i];
      v(0) = sqrt2 * x;
      terms.push_back(std::log(gh.weights[i]) + fn.value(center + C * v) + x * x);
    }
  } else {
    terms.reserve(static_cast<std::size_t>(order) * order);
    Eigen::VectorXd v(2);
    for (int i = 0; i < order; ++i) {
      for (int j = 0; j < order; ++j) {
        const double x1 = gh.nodes[i], x2 = gh.nodes[j];
        v(0) = sqrt2 * x1;
        v(1) = sqrt2 * x2;
        terms.push_back(std::log(gh.weights[i]) + std::log(gh.weights[j]) +
                        fn.value(center + C * v) + x1 * x1 + x2 * x2);
      }
    }
  }
  return log_det_c + 0.5 * q * std::log(2.0) + log_sum_exp(terms);
}

double subject_loglik_impl(const ModelSpec& spec, const Kernel& k, const Params& params,
                           const Subject& s, const QuadratureRule& quad) {
  if (s.Z.cols() != spec.q() || s.X.cols() != spec.p()) {
    throw ValidationError("subject " + s.id + " design does not match the model");
  }
  double out;
  if (spec.family == FamilyKind::Normal) {
    out = normal_subject_loglik(params, s);
  } else {
    if (spec.q() > 2) throw UnsupportedError("at most two normal random effects are supported");
    out = quadrature_loglik(k, params, s, quad);
  }
  if (!std::isfinite(out)) {
    throw NumericError("non-finite likelihood contribution for subject " + s.id);
  }
  return out;
}

} // namespace

double inverse_link(FamilyKind family, double eta) {
  switch (family) {
  case FamilyKind::Normal:
    return eta;
  case FamilyKind::BernoulliLogit:
    return sigmoid(eta);
  case FamilyKind::BernoulliProbit:
    return std_normal_cdf(eta);
  case FamilyKind::Poisson:
  case FamilyKind::Weibull:
    return std::exp(eta);
  }
  return eta;
}

double link(FamilyKind family, double kappa) {
  switch (family) {
  case FamilyKind::Normal:
    return kappa;
  case FamilyKind::BernoulliLogit:
    if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in (0, 1)");
    return std::log(kappa) - std::log1p(-kappa);
  case FamilyKind::BernoulliProbit:
    if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in (0, 1)");
    return std_normal_quantile(kappa);
  case FamilyKind::Poisson:
  case FamilyKind::Weibull:
    if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
    return std::log(kappa);
  }
  return kappa;
}

double cond_log_density_eta(const ModelSpec& spec, const Params& params, double y, double eta,
                            int group) {
  check_support(FamilyMember{spec.family, params.rho}, y);
  const Kernel k(spec, params);
  if (spec.overdispersion == Overdispersion::Shared) {
    const double ys[1] = {y};
    SubjectEval ev(k, ys, {});
    Eigen::VectorXd e(1);
    e(0) = eta;
    return ev.eval(e, false).f;
  }
  if (k.gamma && (group < 0 || group >= static_cast<int>(k.alpha.size()))) {
    throw ValidationError("overdispersion group out of range");
  }
  return obs_term(k, make_cache(k, y, group), eta).f;
}

double cond_log_density(const ModelSpec& spec, const Params& params, double y, double kappa,
                        int group) {
  return cond_log_density_eta(spec, params, y, link(spec.family, kappa), group);
}

double cond_density(const ModelSpec& spec, const Params& params, double y, double kappa, int group) {
  return std::exp(cond_log_density(spec, params, y, kappa, group));
}

double cond_log_density_shared(const ModelSpec& spec, const Params& params,
                               std::span<const double> y, std::span<const double> kappa) {
  if (y.size() != kappa.size()) throw ValidationError("y and kappa lengths differ");
  if (spec.overdispersion != Overdispersion::Shared) {
    throw UnsupportedError("cond_density_shared requires shared overdispersion");
  }
  if (spec.family == FamilyKind::Normal) {
    throw UnsupportedError("the normal family has no shared conjugate effect");
  }
  const FamilyMember member{spec.family, params.rho};
  Eigen::VectorXd eta(static_cast<Eigen::Index>(y.size()));
  for (std::size_t j = 0; j < y.size(); ++j) {
    check_support(member, y[j]);
    eta(static_cast<Eigen::Index>(j)) = link(spec.family, kappa[j]);
  }
  const Kernel k(spec, params);
  SubjectEval ev(k, y, {});
  return ev.eval(eta, false).f;
}

double cond_density_shared(const ModelSpec& spec, const Params& params, std::span<const double> y,
                           std::span<const double> kappa) {
  return std::exp(cond_log_density_shared(spec, params, y, kappa));
}

double subject_loglik(const ModelSpec& spec, const Params& params, const Subject& subject,
                      const QuadratureRule& quad) {
  const Kernel k(spec, params);
  return subject_loglik_impl(spec, k, params, subject, quad);
}

std::vector<double> subject_logliks(const ModelSpec& spec, const Params& params,
                                    const std::vector<Subject>& subjects,
                                    const QuadratureRule& quad) {
  if (params.xi.size() != spec.p()) throw ValidationError("xi has wrong length for the model");
  if (params.D.rows() != spec.q() || params.D.cols() != spec.q()) {
    throw ValidationError("D has wrong shape for the model");
  }
  if (quad.order < 1 || quad.order_2d < 1) throw DomainError("quadrature order must be >= 1");
  const Kernel k(spec, params);
  std::vector<double> out(subjects.size(), 0.0);
  parallel_for(subjects.size(),
               [&](std::size_t i) { out[i] = subject_loglik_impl(spec, k, params, subjects[i], quad); });
  return out;
}

double total_loglik(const ModelSpec& spec, const Params& params,
                    const std::vector<Subject>& subjects, const QuadratureRule& quad) {
  const auto parts = subject_logliks(spec, params, subjects, quad);
  // Neumaier summation in subject order
  double sum = 0.0;
  double comp = 0.0;
  for (double x : parts) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double total_loglik(const ModelSpec& spec, const Params& params, const Dataset& data,
                    const QuadratureRule& quad) {
  return total_loglik(spec, params, build_designs(spec, data), quad);
}

} // namespace conmix
