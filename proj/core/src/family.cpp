#include "conmix/family.hpp"

#include "conmix/errors.hpp"
#include "conmix/special_fns.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace conmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594;

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite");
  }
}

// Sufficient statistic of the data model in conjugate form.
double sufficient(const ConjugatePair& pair, double y) {
  return pair.data == FamilyKind::Weibull ? std::pow(y, pair.shape) : y;
}

} // namespace

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
  case FamilyKind::Normal:
    return "normal";
  case FamilyKind::BernoulliLogit:
    return "logit";
  case FamilyKind::BernoulliProbit:
    return "probit";
  case FamilyKind::Poisson:
    return "poisson";
  case FamilyKind::Weibull:
    return "weibull";
  }
  return "unknown";
}

FamilyKind family_from_string(std::string_view name) {
  if (name == "normal" || name == "gaussian") return FamilyKind::Normal;
  if (name == "logit" || name == "bernoulli" || name == "bernoulli-logit") {
    return FamilyKind::BernoulliLogit;
  }
  if (name == "probit" || name == "bernoulli-probit") return FamilyKind::BernoulliProbit;
  if (name == "poisson") return FamilyKind::Poisson;
  if (name == "weibull" || name == "exponential") return FamilyKind::Weibull;
  throw ValidationError("unknown family '" + std::string(name) + "'");
}

FamilyMember FamilyMember::weibull(double shape) {
  require_positive(shape, "Weibull shape");
  return {FamilyKind::Weibull, shape};
}

ConjugatePair ConjugatePair::weibull_gamma(double shape) {
  require_positive(shape, "Weibull shape");
  return {FamilyKind::Weibull, EffectKind::Gamma, shape, true};
}

bool in_support(const FamilyMember& member, double y) {
  if (!std::isfinite(y)) return false;
  switch (member.kind) {
  case FamilyKind::Normal:
    return true;
  case FamilyKind::BernoulliLogit:
  case FamilyKind::BernoulliProbit:
    return y == 0.0 || y == 1.0;
  case FamilyKind::Poisson:
    return y >= 0.0 && y == std::floor(y);
  case FamilyKind::Weibull:
    return y > 0.0;
  }
  return false;
}

void check_support(const FamilyMember& member, double y) {
  if (!in_support(member, y)) {
    throw DomainError("outcome " + std::to_string(y) + " outside the support of the " +
                      std::string(to_string(member.kind)) + " family");
  }
}

double cumulant(const FamilyMember& member, double eta) {
  switch (member.kind) {
  case FamilyKind::Normal:
    return 0.5 * eta * eta;
  case FamilyKind::BernoulliLogit:
    return log1pexp(eta);
  case FamilyKind::Poisson:
    return std::exp(eta);
  case FamilyKind::Weibull:
    if (!(eta < 0.0)) throw DomainError("Weibull natural parameter must be negative");
    return -std::log(-eta);
  case FamilyKind::BernoulliProbit:
    break;
  }
  throw UnsupportedError("probit link is not the natural link; no cumulant form");
}

double cumulant_d1(const FamilyMember& member, double eta) {
  switch (member.kind) {
  case FamilyKind::Normal:
    return eta;
  case FamilyKind::BernoulliLogit:
    return 1.0 / (1.0 + std::exp(-eta));
  case FamilyKind::Poisson:
    return std::exp(eta);
  case FamilyKind::Weibull:
    if (!(eta < 0.0)) throw DomainError("Weibull natural parameter must be negative");
    return -1.0 / eta;
  case FamilyKind::BernoulliProbit:
    break;
  }
  throw UnsupportedError("probit link is not the natural link; no cumulant form");
}

double cumulant_d2(const FamilyMember& member, double eta) {
  switch (member.kind) {
  case FamilyKind::Normal:
    return 1.0;
  case FamilyKind::BernoulliLogit: {
    const double p = 1.0 / (1.0 + std::exp(-eta));
    return p * (1.0 - p);
  }
  case FamilyKind::Poisson:
    return std::exp(eta);
  case FamilyKind::Weibull:
    if (!(eta < 0.0)) throw DomainError("Weibull natural parameter must be negative");
    return 1.0 / (eta * eta);
  case FamilyKind::BernoulliProbit:
    break;
  }
  throw UnsupportedError("probit link is not the natural link; no cumulant form");
}

double log_density(const FamilyMember& member, double y, double eta, double dispersion) {
  check_support(member, y);
  require_positive(dispersion, "dispersion");
  switch (member.kind) {
  case FamilyKind::Normal:
    return (y * eta - 0.5 * eta * eta) / dispersion - y * y / (2.0 * dispersion) -
           0.5 * (kLog2Pi + std::log(dispersion));
  case FamilyKind::BernoulliLogit:
    return y * eta - log1pexp(eta);
  case FamilyKind::BernoulliProbit:
    return y == 1.0 ? log_std_normal_cdf(eta) : log_std_normal_cdf(-eta);
  case FamilyKind::Poisson:
    return y * eta - std::exp(eta) - log_gamma(y + 1.0);
  case FamilyKind::Weibull: {
    if (!(eta < 0.0)) throw DomainError("Weibull natural parameter must be negative");
    const double rho = member.shape;
    return std::log(-eta) + std::log(rho) + (rho - 1.0) * std::log(y) + eta * std::pow(y, rho);
  }
  }
  return 0.0;
}

double density(const FamilyMember& member, double y, double eta, double dispersion) {
  return std::exp(log_density(member, y, eta, dispersion));
}

MeanVariance mean_variance(const FamilyMember& member, double eta, double dispersion) {
  require_positive(dispersion, "dispersion");
  if (!std::isfinite(eta)) throw DomainError("natural parameter must be finite");
  switch (member.kind) {
  case FamilyKind::Normal:
    return {eta, dispersion};
  case FamilyKind::BernoulliLogit:
  case FamilyKind::Poisson:
    return {cumulant_d1(member, eta), dispersion * cumulant_d2(member, eta)};
  case FamilyKind::BernoulliProbit: {
    const double p = std_normal_cdf(eta);
    return {p, p * (1.0 - p)};
  }
  case FamilyKind::Weibull: {
    if (!(eta < 0.0)) throw DomainError("Weibull natural parameter must be negative");
    const double rate = -eta;
    const double inv = 1.0 / member.shape;
    const double g1 = std::exp(log_gamma(inv + 1.0));
    const double g2 = std::exp(log_gamma(2.0 * inv + 1.0));
    return {std::pow(rate, -inv) * g1, std::pow(rate, -2.0 * inv) * (g2 - g1 * g1)};
  }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Conjugate pairs

Hyper hyper_from_effect(const ConjugatePair& pair, const EffectParams& e, double dispersion) {
  require_positive(dispersion, "dispersion");
  switch (pair.effect) {
  case EffectKind::Normal:
    require_positive(e.variance, "effect variance");
    return {1.0 / e.variance, e.mean / e.variance};
  case EffectKind::Beta:
    require_positive(e.alpha, "beta shape alpha");
    require_positive(e.beta, "beta shape beta");
    return {e.alpha + e.beta - 2.0, e.alpha - 1.0};
  case EffectKind::Gamma:
    require_positive(e.alpha, "gamma shape alpha");
    require_positive(e.beta, "gamma scale beta");
    if (pair.data == FamilyKind::Poisson) return {1.0 / e.beta, e.alpha - 1.0};
    {
      const double rate = 1.0 / dispersion;
      return {rate * (e.alpha - 1.0), 1.0 / e.beta};
    }
  }
  return {};
}

EffectParams effect_from_hyper(const ConjugatePair& pair, const Hyper& h, double dispersion) {
  require_positive(dispersion, "dispersion");
  switch (pair.effect) {
  case EffectKind::Normal:
    require_positive(h.gamma, "normal effect precision");
    return EffectParams::normal(h.gamma_psi / h.gamma, 1.0 / h.gamma);
  case EffectKind::Beta:
    return EffectParams::beta_shapes(h.gamma_psi + 1.0, h.gamma - h.gamma_psi + 1.0);
  case EffectKind::Gamma:
    if (pair.data == FamilyKind::Poisson) {
      require_positive(h.gamma, "gamma hyperparameter");
      return EffectParams::gamma(h.gamma_psi + 1.0, 1.0 / h.gamma);
    }
    require_positive(h.gamma_psi, "gamma hyperparameter product");
    return EffectParams::gamma(h.gamma * dispersion + 1.0, 1.0 / h.gamma_psi);
  }
  return {};
}

double conjugate_c(const ConjugatePair& pair, double y, double dispersion) {
  switch (pair.data) {
  case FamilyKind::Normal:
    return -y * y / (2.0 * dispersion) - 0.5 * (kLog2Pi + std::log(dispersion));
  case FamilyKind::Poisson:
    return -log_gamma(y + 1.0);
  case FamilyKind::BernoulliLogit:
  case FamilyKind::BernoulliProbit:
    return 0.0;
  case FamilyKind::Weibull:
    return std::log(pair.shape / dispersion) + (pair.shape - 1.0) * std::log(y);
  }
  return 0.0;
}

double conjugate_c_star(const ConjugatePair& pair, const Hyper& h, double dispersion) {
  switch (pair.effect) {
  case EffectKind::Normal:
    require_positive(h.gamma, "normal effect precision");
    return -0.5 * h.gamma_psi * h.gamma_psi / h.gamma + 0.5 * (std::log(h.gamma) - kLog2Pi);
  case EffectKind::Beta: {
    const double a = h.gamma_psi + 1.0;
    const double b = h.gamma - h.gamma_psi + 1.0;
    require_positive(a, "beta shape alpha");
    require_positive(b, "beta shape beta");
    return -log_beta(a, b);
  }
  case EffectKind::Gamma:
    if (pair.data == FamilyKind::Poisson) {
      require_positive(h.gamma, "gamma hyperparameter");
      require_positive(1.0 + h.gamma_psi, "gamma shape");
      return (1.0 + h.gamma_psi) * std::log(h.gamma) - log_gamma(1.0 + h.gamma_psi);
    }
    {
      const double rate = 1.0 / dispersion;
      const double shape = (h.gamma + rate) / rate;
      require_positive(h.gamma_psi, "gamma hyperparameter product");
      require_positive(shape, "gamma shape");
      return shape * std::log(h.gamma_psi) - log_gamma(shape);
    }
  }
  return 0.0;
}

double effect_density(const ConjugatePair& pair, double theta, const Hyper& h, double dispersion) {
  const double cs = conjugate_c_star(pair, h, dispersion);
  switch (pair.effect) {
  case EffectKind::Normal:
    return std::exp(h.gamma_psi * theta - 0.5 * h.gamma * theta * theta + cs);
  case EffectKind::Beta:
    if (!(theta > 0.0 && theta < 1.0)) return 0.0;
    return std::exp(h.gamma_psi * std::log(theta / (1.0 - theta)) + h.gamma * std::log1p(-theta) + cs);
  case EffectKind::Gamma:
    if (!(theta > 0.0)) return 0.0;
    if (pair.data == FamilyKind::Poisson) {
      return std::exp(h.gamma_psi * std::log(theta) - h.gamma * theta + cs);
    }
    return std::exp(-h.gamma_psi * theta + h.gamma * dispersion * std::log(theta) + cs);
  }
  return 0.0;
}

double hierarchical_density(const ConjugatePair& pair, double y, double theta, double dispersion) {
  switch (pair.data) {
  case FamilyKind::Normal:
    return std::exp((y * theta - 0.5 * theta * theta) / dispersion + conjugate_c(pair, y, dispersion));
  case FamilyKind::BernoulliLogit:
  case FamilyKind::BernoulliProbit:
    return y == 1.0 ? theta : 1.0 - theta;
  case FamilyKind::Poisson:
    return std::exp(y * std::log(theta) - theta - log_gamma(y + 1.0));
  case FamilyKind::Weibull: {
    const double rate = 1.0 / dispersion;
    const double t = std::pow(y, pair.shape);
    return rate * theta * pair.shape * std::pow(y, pair.shape - 1.0) * std::exp(-rate * theta * t);
  }
  }
  return 0.0;
}

double conjugate_marginal(const ConjugatePair& pair, double y, double dispersion, const Hyper& h) {
  require_positive(dispersion, "dispersion");
  FamilyMember member{pair.data, pair.shape};
  check_support(member, y);
  const double inv_phi = 1.0 / dispersion;
  const Hyper post{inv_phi + h.gamma, inv_phi * sufficient(pair, y) + h.gamma_psi};
  return std::exp(conjugate_c(pair, y, dispersion) + conjugate_c_star(pair, h, dispersion) -
                  conjugate_c_star(pair, post, dispersion));
}

double conjugate_marginal(const ConjugatePair& pair, double y, double dispersion, double gamma,
                          double psi) {
  return conjugate_marginal(pair, y, dispersion, Hyper{gamma, gamma * psi});
}

double strong_conjugate_marginal(const ConjugatePair& pair, double y, double kappa,
                                 double dispersion, const Hyper& h) {
  if (!pair.strong_conjugate || pair.effect == EffectKind::Beta) {
    throw UnsupportedError(
        "strong_conjugate_marginal: lack of strong conjugacy for the Bernoulli-beta pair");
  }
  require_positive(kappa, "kappa");
  EffectParams e = effect_from_hyper(pair, h, dispersion);
  if (pair.effect == EffectKind::Normal) {
    // kappa * theta ~ N(kappa mu, kappa^2 d)
    e.mean *= kappa;
    e.variance *= kappa * kappa;
  } else {
    // a scaled gamma keeps its shape and rescales beta to kappa*beta
    e.beta *= kappa;
  }
  return conjugate_marginal(pair, y, dispersion, hyper_from_effect(pair, e, dispersion));
}

double strong_conjugate_marginal(const ConjugatePair& pair, double y, double kappa,
                                 double dispersion, double gamma, double psi) {
  return strong_conjugate_marginal(pair, y, kappa, dispersion, Hyper{gamma, gamma * psi});
}

MeanVariance marginal_moments(const ConjugatePair& pair, const EffectParams& e, double dispersion) {
  require_positive(dispersion, "dispersion");
  switch (pair.effect) {
  case EffectKind::Normal:
    return {e.mean, dispersion + e.variance};
  case EffectKind::Beta: {
    require_positive(e.alpha, "alpha");
    require_positive(e.beta, "beta");
    const double m = e.alpha / (e.alpha + e.beta);
    return {m, m * (1.0 - m)};
  }
  case EffectKind::Gamma:
    require_positive(e.alpha, "alpha");
    require_positive(e.beta, "beta");
    if (pair.data == FamilyKind::Poisson) {
      return {e.alpha * e.beta, e.alpha * e.beta * (e.beta + 1.0)};
    }
    {
      const double rate = 1.0 / dispersion;
      const double inv = 1.0 / pair.shape;
      const double a = e.alpha;
      if (!(a > inv)) {
        throw NonexistenceError("marginal mean requires alpha > 1/rho");
      }
      const double scale = rate * e.beta;
      const double mean =
          std::exp(log_gamma(a - inv) + log_gamma(inv + 1.0) - inv * std::log(scale) - log_gamma(a));
      if (!(a > 2.0 * inv)) return {mean, std::numeric_limits<double>::infinity()};
      const double second = std::exp(std::log(2.0) + log_gamma(a - 2.0 * inv) + log_gamma(2.0 * inv) -
                                     std::log(pair.shape) - 2.0 * inv * std::log(scale) - log_gamma(a));
      return {mean, second - mean * mean};
    }
  }
  return {};
}

} // namespace conmix
