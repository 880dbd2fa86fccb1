#ifndef CONMIX_ESTIMATE_HPP
#define CONMIX_ESTIMATE_HPP

#include "conmix/likelihood.hpp"
#include "conmix/model.hpp"
#include "conmix/optimize.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace conmix {

struct FitOptions {
  int max_iter = 500;
  double tol = 1e-6;
  int starts = 3;
  double jitter = 0.5; // half-width of the uniform jitter on the packed scale
  std::uint64_t seed = 20240601;
  std::optional<Eigen::VectorXd> initial; // packed starting point
  bool compute_se = true;
};

struct FitResult {
  ModelSpec spec;
  std::vector<std::string> names; // natural scale
  Eigen::VectorXd estimates;
  Eigen::VectorXd se;
  Eigen::MatrixXd vcov_natural;
  std::vector<std::string> packed_names;
  Eigen::VectorXd packed_estimates;
  Eigen::MatrixXd vcov; // packed scale
  double loglik = 0.0;
  double minus2ll = 0.0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool se_reliable = true;
  std::vector<std::string> warnings;
  std::vector<double> trace; // log-likelihood per accepted iteration of the chosen start
  int starts = 0;
  DataFingerprint data;

  int index(const std::string& name) const; // -1 when absent
  double estimate(const std::string& name) const;
  double std_error(const std::string& name) const;
  Params params() const { return unpack(spec, packed_estimates); }
};

/// Starting point: GLM fit for xi (no random or conjugate effects), d = 0.1,
/// ln alpha = 0, ln rho = 0.
Eigen::VectorXd initial_values(const ModelSpec& spec, const std::vector<Subject>& subjects,
                               const QuadratureRule& quad = {});

FitResult fit(const ModelSpec& spec, const Dataset& data, const QuadratureRule& quad = {},
              const FitOptions& opts = {});
FitResult fit(const ModelSpec& spec, const std::vector<Subject>& subjects,
              const QuadratureRule& quad = {}, const FitOptions& opts = {});

struct Covariance {
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  bool reliable = true;
  std::string note;
};

/// Inverse of the negative numerical Hessian of `loglik` at x; a
/// pseudo-inverse (and reliable = false) when it is not positive definite.
Covariance covariance_from_objective(const Objective& loglik, const Eigen::VectorXd& x);

/// Packed-scale covariance at a stationary point of the model likelihood.
Covariance standard_errors(const ModelSpec& spec, const std::vector<Subject>& subjects,
                           const QuadratureRule& quad, const Eigen::VectorXd& packed);
Covariance standard_errors(const ModelSpec& spec, const Dataset& data, const QuadratureRule& quad,
                           const Eigen::VectorXd& packed);

/// Delta-method covariance of the natural-scale parameters.
Eigen::MatrixXd natural_vcov(const ModelSpec& spec, const Eigen::VectorXd& packed,
                             const Eigen::MatrixXd& vcov);

/// Upper tail of the chi-square distribution (df = 0 is a point mass at 0).
double chi2_sf(double x, double df);

struct WaldResult {
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
};

/// Wald test of sum_k c_k theta_k = null on the natural scale.
WaldResult wald_test(const FitResult& fit, const std::vector<std::pair<std::string, double>>& contrast,
                     double null_value = 0.0);
WaldResult wald_test(double estimate, double se, double null_value = 0.0);

struct BoundaryResult {
  double statistic = 0.0;
  double p = 0.5;
};

/// Likelihood-ratio test of one variance component on the boundary, with the
/// 50:50 mixture of chi-square(0) and chi-square(1) reference distribution.
BoundaryResult boundary_variance_test(double loglik_null, double loglik_alt, double tol = 1e-8);

enum class ComparisonKind { WaldVarianceBoundary, LrBoundary, LrInterior };
std::string_view to_string(ComparisonKind kind);
ComparisonKind comparison_kind_from_string(std::string_view name);

struct Nesting {
  std::string null_label;
  std::string alt_label;
  ComparisonKind kind = ComparisonKind::LrBoundary;
};

struct Comparison {
  std::string null_label;
  std::string alt_label;
  ComparisonKind kind = ComparisonKind::LrBoundary;
  double statistic = 0.0;
  double p = 0.5;
  int boundary_params = 0; // variance components tested on the boundary
  int interior_params = 0; // further parameters free in the alternative
  std::vector<std::string> tested;
};

/// Nested-model comparisons. Boundary kinds use the chi-bar-square mixture
/// sum_i C(k,i) 2^-k chi2(i + c) for k boundary variance components and c
/// further interior parameters.
std::vector<Comparison> compare_models(const std::vector<std::pair<std::string, FitResult>>& fits,
                                       const std::vector<Nesting>& nesting);

} // namespace conmix

#endif
