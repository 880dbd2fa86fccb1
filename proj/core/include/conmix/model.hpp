#ifndef CONMIX_MODEL_HPP
#define CONMIX_MODEL_HPP

#include "conmix/family.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace conmix {

enum class Overdispersion { None, Independent, Shared };

/// Identifiability constraint for gamma overdispersion effects.
enum class GammaConstraint {
  MeanOne,     // alpha * beta = 1, ln alpha free
  Exponential, // alpha = 1, ln beta free
  FixedBeta,   // beta fixed at ModelSpec::fixed_beta, ln alpha free
  Unconstrained
};

std::string_view to_string(Overdispersion od);
std::string_view to_string(GammaConstraint c);
Overdispersion overdispersion_from_string(std::string_view name);
GammaConstraint constraint_from_string(std::string_view name);

/// Name of the implicit column of ones.
inline constexpr const char* kIntercept = "intercept";

struct ModelSpec {
  FamilyKind family = FamilyKind::Poisson;
  std::vector<std::string> fixed_effects;
  std::vector<std::string> random_effects;
  Overdispersion overdispersion = Overdispersion::None;
  GammaConstraint constraint = GammaConstraint::MeanOne;
  double fixed_beta = 1.0;
  double weibull_shape = 1.0; // used when the shape is not free
  bool weibull_shape_free = false;
  // One gamma effect per occasion instead of a single tied one.
  bool per_occasion_overdispersion = false;
  int overdispersion_groups = 1;
  // alpha + beta for independent beta effects, where only the mean enters
  // the likelihood; used to reconstruct (alpha, beta) for simulation.
  double beta_precision = 2.0;

  int p() const { return static_cast<int>(fixed_effects.size()); }
  int q() const { return static_cast<int>(random_effects.size()); }
  bool gamma_effects() const {
    return overdispersion != Overdispersion::None &&
           (family == FamilyKind::Poisson || family == FamilyKind::Weibull);
  }
  bool beta_effects() const {
    return overdispersion != Overdispersion::None &&
           (family == FamilyKind::BernoulliLogit || family == FamilyKind::BernoulliProbit);
  }
};

/// Long-format data: one row per measurement.
struct Dataset {
  std::vector<std::string> id;
  std::vector<int> occasion;
  std::vector<double> y;
  std::vector<std::string> covariate_names;
  std::vector<std::vector<double>> covariates; // one vector per name, row-aligned

  std::size_t rows() const { return y.size(); }
  /// Index of a covariate column or -1.
  int column_index(const std::string& name) const;
  void add_column(const std::string& name, std::vector<double> values);
};

/// Per-subject design, rows sorted by occasion.
struct Subject {
  std::string id;
  std::vector<int> occasions;
  std::vector<int> group; // overdispersion group per row
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  Eigen::MatrixXd Z;
  int n() const { return static_cast<int>(y.size()); }
};

/// Structured parameters. Gamma effects keep one (alpha, beta) per
/// overdispersion group; beta effects are held as mean pi0 and precision nu
/// so that alpha = pi0*nu, beta = (1 - pi0)*nu.
struct Params {
  Eigen::VectorXd xi;
  Eigen::MatrixXd D;
  std::vector<double> alpha;
  std::vector<double> beta;
  double pi0 = 1.0;
  double nu = 2.0;
  double rho = 1.0;
  double sigma = 1.0;

  double var_theta(int group = 0) const;
};

/// Builds per-subject designs. The name "intercept" is a column of ones and
/// "a:b" is the product of columns a and b when no column of that name
/// exists. Subjects are ordered by id (numerically when all ids are
/// integers).
std::vector<Subject> build_designs(const ModelSpec& spec, const Dataset& data);

/// Value of a named design column at one row (intercept and a:b handled).
double design_value(const Dataset& data, const std::string& name, std::size_t row);

/// Length of the packed vector for a spec.
int packed_size(const ModelSpec& spec);
std::vector<std::string> packed_names(const ModelSpec& spec);

Eigen::VectorXd pack(const ModelSpec& spec, const Params& params);
Params unpack(const ModelSpec& spec, const Eigen::VectorXd& packed);

/// Parameters with the right shapes for a spec and neutral values.
Params default_params(const ModelSpec& spec);

/// Natural-scale names and values reported by a fit.
std::vector<std::string> natural_names(const ModelSpec& spec);
Eigen::VectorXd natural_values(const ModelSpec& spec, const Params& params);

/// Factor L with D = L L^T (Cholesky when D is positive definite, a
/// symmetric square root otherwise). Throws DomainError when D is not PSD.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& D);

enum class Severity { Warning, Error };

struct ValidationIssue {
  Severity severity = Severity::Error;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const;
  std::string summary() const;
};

ValidationReport validate(const ModelSpec& spec, const Dataset& data);
/// Spec-only checks (family/overdispersion combinations, constraints).
ValidationReport validate(const ModelSpec& spec);

/// Row-count, subject-count and outcome hash used to check that fits share
/// the same data.
struct DataFingerprint {
  std::size_t rows = 0;
  std::size_t subjects = 0;
  std::uint64_t y_hash = 0;
  bool operator==(const DataFingerprint&) const = default;
};

DataFingerprint fingerprint(const Dataset& data);
/// Same value as for the dataset the subjects were built from.
DataFingerprint fingerprint(const std::vector<Subject>& subjects);

} // namespace conmix

#endif
