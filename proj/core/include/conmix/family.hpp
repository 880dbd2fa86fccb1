#ifndef CONMIX_FAMILY_HPP
#define CONMIX_FAMILY_HPP

#include <string>
#include <string_view>

namespace conmix {

enum class FamilyKind { Normal, BernoulliLogit, BernoulliProbit, Poisson, Weibull };
enum class EffectKind { Normal, Beta, Gamma };

std::string_view to_string(FamilyKind kind);
FamilyKind family_from_string(std::string_view name);

/// An exponential-family member as used for the outcome model.
///
/// Densities take the natural parameter eta of the member:
///   Normal          eta = mu, dispersion = sigma^2
///   Bernoulli-logit eta = logit(pi)
///   Bernoulli-probit eta = probit(pi) (not the natural link)
///   Poisson         eta = log(lambda)
///   Weibull         eta = -rate, the member being exponential in y^shape
struct FamilyMember {
  FamilyKind kind = FamilyKind::Poisson;
  double shape = 1.0; // Weibull only

  static FamilyMember normal() { return {FamilyKind::Normal, 1.0}; }
  static FamilyMember bernoulli_logit() { return {FamilyKind::BernoulliLogit, 1.0}; }
  static FamilyMember bernoulli_probit() { return {FamilyKind::BernoulliProbit, 1.0}; }
  static FamilyMember poisson() { return {FamilyKind::Poisson, 1.0}; }
  static FamilyMember weibull(double shape);
  static FamilyMember exponential() { return weibull(1.0); }

  bool natural_link() const { return kind != FamilyKind::BernoulliProbit; }
  bool is_binary() const {
    return kind == FamilyKind::BernoulliLogit || kind == FamilyKind::BernoulliProbit;
  }
};

/// Throws DomainError unless y lies in the member's support.
void check_support(const FamilyMember& member, double y);
bool in_support(const FamilyMember& member, double y);

/// Cumulant psi(eta) and its first two derivatives (natural members only).
double cumulant(const FamilyMember& member, double eta);
double cumulant_d1(const FamilyMember& member, double eta);
double cumulant_d2(const FamilyMember& member, double eta);

double density(const FamilyMember& member, double y, double eta, double dispersion = 1.0);
double log_density(const FamilyMember& member, double y, double eta, double dispersion = 1.0);

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;
};

MeanVariance mean_variance(const FamilyMember& member, double eta, double dispersion = 1.0);

/// Hyperparameters (gamma, psi) of the conjugate effect density. The product
/// gamma*psi is stored directly so that the degenerate translations
/// (alpha+beta = 2 for beta effects, alpha = 1 for gamma time-to-event
/// effects) stay finite.
struct Hyper {
  double gamma = 0.0;
  double gamma_psi = 0.0;
  double psi() const { return gamma_psi / gamma; }
};

/// Parameters of the conjugate random effect in its conventional form.
struct EffectParams {
  double alpha = 1.0; // gamma/beta first shape
  double beta = 1.0;  // gamma scale or beta second shape
  double mean = 0.0;  // normal effect
  double variance = 1.0;

  static EffectParams gamma(double alpha, double beta) { return {alpha, beta, 0.0, 1.0}; }
  static EffectParams beta_shapes(double alpha, double beta) { return {alpha, beta, 0.0, 1.0}; }
  static EffectParams normal(double mean, double variance) { return {1.0, 1.0, mean, variance}; }
};

/// A (data model, conjugate effect) pairing.
struct ConjugatePair {
  FamilyKind data = FamilyKind::Poisson;
  EffectKind effect = EffectKind::Gamma;
  double shape = 1.0; // Weibull shape
  bool strong_conjugate = true;

  static ConjugatePair normal_normal() { return {FamilyKind::Normal, EffectKind::Normal, 1.0, true}; }
  static ConjugatePair poisson_gamma() { return {FamilyKind::Poisson, EffectKind::Gamma, 1.0, true}; }
  static ConjugatePair bernoulli_beta() {
    return {FamilyKind::BernoulliLogit, EffectKind::Beta, 1.0, false};
  }
  static ConjugatePair weibull_gamma(double shape);
  static ConjugatePair exponential_gamma() { return weibull_gamma(1.0); }
};

/// In the functions below `dispersion` is sigma^2 for normal-normal, 1 for
/// the Poisson and Bernoulli pairs and 1/rate for the time-to-event pairs.

/// Translation (alpha, beta) or (mean, variance) -> (gamma, psi).
Hyper hyper_from_effect(const ConjugatePair& pair, const EffectParams& effect, double dispersion);
EffectParams effect_from_hyper(const ConjugatePair& pair, const Hyper& hyper, double dispersion);

/// Normalizers of the hierarchical and effect densities.
double conjugate_c(const ConjugatePair& pair, double y, double dispersion);
double conjugate_c_star(const ConjugatePair& pair, const Hyper& hyper, double dispersion);

/// Density of the conjugate effect at theta.
double effect_density(const ConjugatePair& pair, double theta, const Hyper& hyper, double dispersion);
/// Hierarchical density f(y | theta).
double hierarchical_density(const ConjugatePair& pair, double y, double theta, double dispersion);

/// Closed-form marginal exp[c(y) + c*(gamma,psi) - c*(posterior)].
double conjugate_marginal(const ConjugatePair& pair, double y, double dispersion, const Hyper& hyper);
double conjugate_marginal(const ConjugatePair& pair, double y, double dispersion, double gamma,
                          double psi);

/// Marginal of y given a multiplicative predictor factor kappa. Only defined
/// for strongly conjugate pairs.
double strong_conjugate_marginal(const ConjugatePair& pair, double y, double kappa,
                                 double dispersion, const Hyper& hyper);
double strong_conjugate_marginal(const ConjugatePair& pair, double y, double kappa,
                                 double dispersion, double gamma, double psi);

/// Marginal mean and variance of the conjugate model. `dispersion` is
/// sigma^2 for normal-normal and 1/rate for the time-to-event pairs. The
/// variance is +inf when only the mean exists; NonexistenceError when
/// neither does.
MeanVariance marginal_moments(const ConjugatePair& pair, const EffectParams& effect,
                              double dispersion = 1.0);

} // namespace conmix

#endif
