#ifndef CONMIX_MOMENTS_HPP
#define CONMIX_MOMENTS_HPP

#include "conmix/estimate.hpp"
#include "conmix/family.hpp"
#include "conmix/model.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace conmix {

struct MomentSet {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::map<int, Eigen::VectorXd> higher; // k -> E(Y^k) per occasion
  bool approximate = false;
};

/// Poisson model with mean theta*exp(x'xi + z'b), b ~ N(0, D) and
/// theta with mean theta_mean and variance var_theta (independent across
/// occasions unless shared_theta).
MomentSet poisson_combined_moments(const Eigen::VectorXd& xi, const Eigen::MatrixXd& D,
                                   double var_theta, const Eigen::MatrixXd& X,
                                   const Eigen::MatrixXd& Z, bool shared_theta = false,
                                   double theta_mean = 1.0);

/// E(Y^k) for the Poisson-gamma-normal model via Stirling numbers of the
/// second kind. alpha = +inf gives the model without gamma effects.
double poisson_marginal_moment(int k, double alpha, double beta, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& xi, const Eigen::VectorXd& z,
                               const Eigen::MatrixXd& D);

/// Covariate values for evaluating a model over a time grid. Design names
/// resolve as: "intercept" -> 1, time_name or "occasion" -> t, a stored
/// value, or a product for "a:b".
struct Profile {
  std::map<std::string, double> values;
  std::string time_name = "time";
};

Eigen::MatrixXd profile_design(const std::vector<std::string>& names, const Profile& profile,
                               std::span<const double> times);

/// Closed-form marginal moments of the model at the given design rows
/// (Poisson, normal, probit; logit through the probit bridge, flagged
/// approximate; Bernoulli with beta effects and no normal effects).
MomentSet model_moments(const ModelSpec& spec, const Params& params, const Eigen::MatrixXd& X,
                        const Eigen::MatrixXd& Z);

struct CorrelationSummary {
  std::vector<double> times;
  Eigen::MatrixXd corr;
  double max = 0.0;
  double min = 0.0;
  std::pair<double, double> argmax{0.0, 0.0};
  std::pair<double, double> argmin{0.0, 0.0};
  bool approximate = false;
};

/// Corr(Y(t), Y(s)) from the closed-form moments.
double marginal_correlation(const ModelSpec& spec, const Params& params, const Profile& profile,
                            double t, double s);
/// Correlation over a grid with the extreme values and their time pairs (t < s).
CorrelationSummary marginal_correlation(const ModelSpec& spec, const Params& params,
                                        const Profile& profile, std::span<const double> times);

/// P(Y = pattern) for the probit model with independent beta effects of
/// mean pi0: inclusion-exclusion over the zeros of the pattern, each term
/// pi0^m Phi_m(X xi; I + Z D Z').
double probit_joint_prob(std::span<const int> pattern, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Z, const Eigen::VectorXd& xi,
                         const Eigen::MatrixXd& D, double pi0 = 1.0, double tol = 1e-6);

/// Phi_n(X xi; I + Z D Z') for the rows of X and Z.
double probit_all_ones(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, const Eigen::VectorXd& xi,
                       const Eigen::MatrixXd& D, double tol = 1e-6);

/// 16 sqrt(3) / (15 pi): logistic(y) ~ Phi(c y).
double logit_probit_constant();

/// Approximate logit moments from the probit closed forms with eta scaled by c.
MomentSet logit_moments_via_probit(const Eigen::VectorXd& xi, const Eigen::MatrixXd& D, double pi0,
                                   const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z);
double logit_pattern_prob_via_probit(std::span<const int> pattern, const Eigen::MatrixXd& X,
                                     const Eigen::MatrixXd& Z, const Eigen::VectorXd& xi,
                                     const Eigen::MatrixXd& D, double pi0 = 1.0);

/// Bernoulli with success probability theta*kappa and beta(alpha, beta) theta;
/// rho_shared is the correlation of the theta draws (1 for a shared theta).
MomentSet bernoulli_beta_moments(std::span<const double> kappa, double alpha, double beta,
                                 std::optional<double> rho_shared = std::nullopt);

/// Mean and variance of a sum of n exchangeable Bernoulli(pi) with pairwise
/// correlation rho.
MeanVariance betabinomial_aggregate(int n, double pi, double rho);

/// Second-order expansion of the inverse link around b = 0 combined with the
/// moments of the conjugate effect.
MomentSet approx_moments_delta(const ModelSpec& spec, const Params& params, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Z);

struct MarginalContrast {
  double contrast = 0.0;
  double se = 0.0;
  bool approximate = false;
};

/// Average over `times` of E(Y | profile1) - E(Y | profile0), with a
/// delta-method standard error through the packed covariance.
MarginalContrast marginal_fixed_effect(const ModelSpec& spec, const Eigen::VectorXd& packed,
                                       const Eigen::MatrixXd& vcov, const Profile& profile0,
                                       const Profile& profile1, std::span<const double> times);
MarginalContrast marginal_fixed_effect(const FitResult& fit, const Profile& profile0,
                                       const Profile& profile1, std::span<const double> times);

} // namespace conmix

#endif
