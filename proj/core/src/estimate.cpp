#include "conmix/estimate.hpp"

#include "conmix/errors.hpp"
#include "conmix/special_fns.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

namespace conmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Objective make_objective(const ModelSpec& spec, const std::vector<Subject>& subjects,
                         const QuadratureRule& quad) {
  return [&spec, &subjects, quad](const Eigen::VectorXd& x) {
    try {
      return total_loglik(spec, unpack(spec, x), subjects, quad);
    } catch (const NumericError&) {
      return -std::numeric_limits<double>::infinity();
    } catch (const DomainError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
}

double intercept_start(const ModelSpec& spec, const std::vector<Subject>& subjects) {
  double sum = 0.0, sum_t = 0.0;
  std::size_t n = 0;
  for (const auto& s : subjects) {
    for (int j = 0; j < s.n(); ++j) {
      sum += s.y(j);
      if (spec.family == FamilyKind::Weibull) sum_t += std::pow(s.y(j), spec.weibull_shape);
      ++n;
    }
  }
  if (n == 0) return 0.0;
  const double m = sum / static_cast<double>(n);
  switch (spec.family) {
  case FamilyKind::Normal:
    return m;
  case FamilyKind::Poisson:
    return std::log(m + 0.1);
  case FamilyKind::Weibull:
    return -std::log(sum_t / static_cast<double>(n));
  case FamilyKind::BernoulliLogit: {
    const double p = std::clamp(m, 0.01, 0.99);
    return std::log(p / (1.0 - p));
  }
  case FamilyKind::BernoulliProbit:
    return std_normal_quantile(std::clamp(m, 0.01, 0.99));
  }
  return 0.0;
}

bool is_boundary_name(const std::string& n) {
  if (n == "d" || n == "one_minus_pi0" || n.rfind("var_theta", 0) == 0) return true;
  if (n.rfind("d[", 0) == 0) {
    const auto comma = n.find(',');
    return comma != std::string::npos && n.substr(2, comma - 2) == n.substr(comma + 1, n.size() - comma - 2);
  }
  return false;
}

bool is_derived_name(const std::string& n) {
  static const std::set<std::string> plain{"alpha", "beta", "pi0", "nu", "alpha_over_beta"};
  return plain.count(n) > 0 || n.rfind("alpha[", 0) == 0 || n.rfind("beta[", 0) == 0;
}

// sum_i C(k,i) 2^-k P(chi2(i + c) > w)
double chibar_sf(double w, int k, int c) {
  double p = 0.0;
  double binom = 1.0;
  for (int i = 0; i <= k; ++i) {
    p += binom * chi2_sf(w, i + c);
    binom = binom * (k - i) / (i + 1);
  }
  return p / std::ldexp(1.0, k);
}

} // namespace

int FitResult::index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double FitResult::estimate(const std::string& name) const {
  const int i = index(name);
  if (i < 0) throw ValidationError("unknown parameter '" + name + "'");
  return estimates(i);
}

double FitResult::std_error(const std::string& name) const {
  const int i = index(name);
  if (i < 0) throw ValidationError("unknown parameter '" + name + "'");
  return se(i);
}

Eigen::VectorXd initial_values(const ModelSpec& spec, const std::vector<Subject>& subjects,
                               const QuadratureRule& quad) {
  ModelSpec glm = spec;
  glm.random_effects.clear();
  glm.overdispersion = Overdispersion::None;
  glm.per_occasion_overdispersion = false;

  std::vector<Subject> flat = subjects;
  for (auto& s : flat) s.Z.resize(s.n(), 0);

  Params start = default_params(glm);
  const auto it = std::find(spec.fixed_effects.begin(), spec.fixed_effects.end(), std::string(kIntercept));
  if (it != spec.fixed_effects.end()) start.xi(it - spec.fixed_effects.begin()) = intercept_start(spec, subjects);
  if (spec.family == FamilyKind::Normal) {
    double ss = 0.0, s1 = 0.0;
    std::size_t n = 0;
    for (const auto& s : subjects) {
      s1 += s.y.sum();
      ss += s.y.squaredNorm();
      n += s.n();
    }
    const double m = n ? s1 / n : 0.0;
    start.sigma = n > 1 ? std::sqrt(std::max(ss / n - m * m, 1e-8)) : 1.0;
  }
  const Objective f = make_objective(glm, flat, quad);
  OptimizerOptions oo;
  oo.tol = 1e-8;
  oo.max_iter = 200;
  const OptimizerResult r = bfgs_maximize(f, pack(glm, start), oo);
  const Params g = unpack(glm, r.value > -std::numeric_limits<double>::infinity() ? r.x : pack(glm, start));

  Params full = default_params(spec);
  full.xi = g.xi;
  full.rho = g.rho;
  full.sigma = g.sigma;
  if (spec.beta_effects()) {
    full.pi0 = 1.0 / (1.0 + std::exp(-1.5));
    full.nu = spec.beta_precision;
  }
  return pack(spec, full);
}

Covariance covariance_from_objective(const Objective& loglik, const Eigen::VectorXd& x) {
  Covariance out;
  const Eigen::Index k = x.size();
  out.vcov = Eigen::MatrixXd::Zero(k, k);
  out.se = Eigen::VectorXd::Zero(k);
  if (k == 0) return out;
  Eigen::MatrixXd H = numeric_hessian(loglik, x);
  if (!H.allFinite()) {
    out.reliable = false;
    out.note = "Hessian has non-finite entries";
    out.vcov.setConstant(kNaN);
    out.se.setConstant(kNaN);
    return out;
  }
  const Eigen::MatrixXd info = -0.5 * (H + H.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() == Eigen::Success) {
    out.vcov = llt.solve(Eigen::MatrixXd::Identity(k, k));
  } else {
    out.reliable = false;
    out.note = "negative Hessian not positive definite; pseudo-inverse used";
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::VectorXd inv(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double l = eig.eigenvalues()(i);
      inv(i) = l > 1e-10 * top ? 1.0 / l : 0.0;
    }
    out.vcov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }
  out.vcov = 0.5 * (out.vcov + out.vcov.transpose());
  for (Eigen::Index i = 0; i < k; ++i) out.se(i) = std::sqrt(std::max(out.vcov(i, i), 0.0));
  return out;
}

Covariance standard_errors(const ModelSpec& spec, const std::vector<Subject>& subjects,
                           const QuadratureRule& quad, const Eigen::VectorXd& packed) {
  return covariance_from_objective(make_objective(spec, subjects, quad), packed);
}

Covariance standard_errors(const ModelSpec& spec, const Dataset& data, const QuadratureRule& quad,
                           const Eigen::VectorXd& packed) {
  const auto subjects = build_designs(spec, data);
  return standard_errors(spec, subjects, quad, packed);
}

Eigen::MatrixXd natural_vcov(const ModelSpec& spec, const Eigen::VectorXd& packed,
                             const Eigen::MatrixXd& vcov) {
  const Eigen::VectorXd base = natural_values(spec, unpack(spec, packed));
  Eigen::MatrixXd J(base.size(), packed.size());
  Eigen::VectorXd xp = packed;
  for (Eigen::Index i = 0; i < packed.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(packed(i)));
    xp(i) = packed(i) + h;
    const Eigen::VectorXd up = natural_values(spec, unpack(spec, xp));
    xp(i) = packed(i) - h;
    const Eigen::VectorXd dn = natural_values(spec, unpack(spec, xp));
    xp(i) = packed(i);
    J.col(i) = (up - dn) / (2.0 * h);
  }
  for (Eigen::Index r = 0; r < J.rows(); ++r) {
    if (!J.row(r).allFinite()) J.row(r).setConstant(kNaN);
  }
  return J * vcov * J.transpose();
}

FitResult fit(const ModelSpec& spec, const Dataset& data, const QuadratureRule& quad,
              const FitOptions& opts) {
  const ValidationReport rep = validate(spec, data);
  if (!rep.ok()) throw ValidationError(rep.summary());
  const auto subjects = build_designs(spec, data);
  FitResult r = fit(spec, subjects, quad, opts);
  for (const auto& i : rep.issues) {
    if (i.severity == Severity::Warning) r.warnings.push_back(i.message);
  }
  return r;
}

FitResult fit(const ModelSpec& spec, const std::vector<Subject>& subjects, const QuadratureRule& quad,
              const FitOptions& opts) {
  const ValidationReport rep = validate(spec);
  if (!rep.ok()) throw ValidationError(rep.summary());
  const Objective f = make_objective(spec, subjects, quad);
  const Eigen::VectorXd x0 = opts.initial ? *opts.initial : initial_values(spec, subjects, quad);
  if (x0.size() != packed_size(spec)) throw ValidationError("initial vector has wrong length");
  if (!std::isfinite(f(x0))) throw FitError("log-likelihood is not finite at the initial values");

  OptimizerOptions oo;
  oo.max_iter = opts.max_iter;
  oo.tol = opts.tol;
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-opts.jitter, opts.jitter);

  std::optional<OptimizerResult> best;
  int best_start = -1;
  double first_value = -std::numeric_limits<double>::infinity();
  const int starts = std::max(1, opts.starts);
  std::vector<std::string> failures;
  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXd x = x0;
    if (s > 0) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += jitter(rng);
      if (!std::isfinite(f(x))) {
        failures.push_back("start " + std::to_string(s + 1) + ": non-finite likelihood");
        continue;
      }
    }
    OptimizerResult r = bfgs_maximize(f, x, oo);
    if (s == 0 && std::isfinite(r.value)) first_value = r.value;
    if (!std::isfinite(r.value)) {
      failures.push_back("start " + std::to_string(s + 1) + ": " + r.message);
      continue;
    }
    const bool better = !best || (r.converged && !best->converged && r.value > best->value - 1e-6) ||
                        (r.converged == best->converged && r.value > best->value) ||
                        (!r.converged && best->converged && r.value > best->value + 1e-3);
    if (better) {
      best = std::move(r);
      best_start = s;
    }
  }
  if (!best) {
    std::string msg = "all starts failed";
    for (const auto& m : failures) msg += "; " + m;
    throw FitError(msg);
  }

  FitResult out;
  out.spec = spec;
  out.data = fingerprint(subjects);
  out.packed_names = packed_names(spec);
  out.packed_estimates = best->x;
  out.loglik = best->value;
  out.minus2ll = -2.0 * best->value;
  out.converged = best->converged;
  out.iterations = best->iterations;
  out.gradient_norm = best->gradient.size() ? best->gradient.lpNorm<Eigen::Infinity>() : 0.0;
  out.trace = best->trace;
  out.starts = starts;
  if (!best->converged) out.warnings.push_back("optimizer did not converge: " + best->message);
  if (best_start > 0 && best->value > first_value + 1e-3) {
    out.warnings.push_back("the default start reached a lower optimum; best from start " + std::to_string(best_start + 1));
  }

  out.names = natural_names(spec);
  out.estimates = natural_values(spec, out.params());
  const Eigen::Index k = out.packed_estimates.size();
  out.vcov = Eigen::MatrixXd::Constant(k, k, kNaN);
  out.vcov_natural = Eigen::MatrixXd::Constant(out.estimates.size(), out.estimates.size(), kNaN);
  out.se = Eigen::VectorXd::Constant(out.estimates.size(), kNaN);
  if (opts.compute_se) {
    const Covariance cov = covariance_from_objective(f, out.packed_estimates);
    out.vcov = cov.vcov;
    out.se_reliable = cov.reliable;
    if (!cov.reliable) out.warnings.push_back(cov.note);
    out.vcov_natural = natural_vcov(spec, out.packed_estimates, out.vcov);
    for (Eigen::Index i = 0; i < out.se.size(); ++i) {
      const double v = out.vcov_natural(i, i);
      out.se(i) = std::isfinite(v) ? std::sqrt(std::max(v, 0.0)) : kNaN;
    }
  }
  // parameters pushed against the boundary of the parameter space
  for (Eigen::Index i = 0; i < k; ++i) {
    const std::string& n = out.packed_names[i];
    const double v = out.packed_estimates(i);
    const bool at_boundary = ((n == "ln_sqrt_d" || n.rfind("ln_L[", 0) == 0) && v < -7.0) ||
                             (n.rfind("ln_alpha", 0) == 0 && spec.constraint == GammaConstraint::MeanOne && v > 13.0) ||
                             (n.rfind("ln_beta", 0) == 0 && spec.constraint == GammaConstraint::Exponential && v < -7.0) ||
                             (n == "logit_pi0" && v > 13.0) || (n == "ln_nu" && v > 13.0);
    if (at_boundary) {
      out.se_reliable = false;
      out.warnings.push_back("parameter " + n + " is at the boundary of the parameter space");
    }
  }
  return out;
}

double chi2_sf(double x, double df) {
  if (df < 0) throw DomainError("chi-square degrees of freedom must be >= 0");
  if (df == 0) return 0.0; // P(chi2(0) > x) with all mass at 0
  if (!(x > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

WaldResult wald_test(double estimate, double se, double null_value) {
  WaldResult r;
  r.estimate = estimate;
  r.se = se;
  if (!(se >= 0.0) || !std::isfinite(se)) throw DomainError("standard error must be finite and >= 0");
  const double diff = estimate - null_value;
  if (se == 0.0) {
    if (diff != 0.0) throw DomainError("zero standard error with a nonzero contrast");
    r.z = 0.0;
    r.p = 1.0;
    return r;
  }
  r.z = diff / se;
  r.p = std::erfc(std::abs(r.z) / std::numbers::sqrt2);
  return r;
}

WaldResult wald_test(const FitResult& fit, const std::vector<std::pair<std::string, double>>& contrast,
                     double null_value) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.estimates.size());
  for (const auto& [name, w] : contrast) {
    const int i = fit.index(name);
    if (i < 0) throw ValidationError("contrast names unknown parameter '" + name + "'");
    c(i) += w;
  }
  double est = 0.0;
  Eigen::VectorXd cs = Eigen::VectorXd::Zero(c.size());
  std::vector<Eigen::Index> used;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c(i) != 0.0) {
      est += c(i) * fit.estimates(i);
      used.push_back(i);
    }
  }
  double var = 0.0;
  for (auto i : used) {
    for (auto j : used) var += c(i) * fit.vcov_natural(i, j) * c(j);
  }
  return wald_test(est, std::sqrt(std::max(var, 0.0)), null_value);
}

BoundaryResult boundary_variance_test(double loglik_null, double loglik_alt, double tol) {
  const double w = 2.0 * (loglik_alt - loglik_null);
  if (!std::isfinite(w)) throw DomainError("log-likelihoods must be finite");
  if (w < -2.0 * tol) {
    throw ValidationError("nesting violation: alternative log-likelihood below the null by " +
                          std::to_string(-w / 2.0));
  }
  BoundaryResult r;
  r.statistic = std::max(w, 0.0);
  r.p = 0.5 * chi2_sf(r.statistic, 1.0);
  return r;
}

std::string_view to_string(ComparisonKind kind) {
  switch (kind) {
  case ComparisonKind::WaldVarianceBoundary:
    return "wald_variance_boundary";
  case ComparisonKind::LrBoundary:
    return "lr_boundary";
  case ComparisonKind::LrInterior:
    return "lr_interior";
  }
  return "lr_boundary";
}

ComparisonKind comparison_kind_from_string(std::string_view name) {
  if (name == "wald_variance_boundary") return ComparisonKind::WaldVarianceBoundary;
  if (name == "lr_boundary") return ComparisonKind::LrBoundary;
  if (name == "lr_interior") return ComparisonKind::LrInterior;
  throw ValidationError("unknown comparison kind '" + std::string(name) + "'");
}

std::vector<Comparison> compare_models(const std::vector<std::pair<std::string, FitResult>>& fits,
                                       const std::vector<Nesting>& nesting) {
  auto find = [&](const std::string& label) -> const FitResult& {
    for (const auto& [l, f] : fits) {
      if (l == label) return f;
    }
    throw ValidationError("no fitted model labelled '" + label + "'");
  };
  std::vector<Comparison> rows;
  for (const auto& nest : nesting) {
    const FitResult& null_fit = find(nest.null_label);
    const FitResult& alt_fit = find(nest.alt_label);
    if (!(null_fit.data == alt_fit.data)) {
      throw ValidationError("models '" + nest.null_label + "' and '" + nest.alt_label +
                            "' were fitted to different data");
    }
    Comparison c;
    c.null_label = nest.null_label;
    c.alt_label = nest.alt_label;
    c.kind = nest.kind;
    std::vector<int> boundary_idx;
    for (std::size_t i = 0; i < alt_fit.names.size(); ++i) {
      const std::string& n = alt_fit.names[i];
      if (null_fit.index(n) >= 0) continue;
      if (is_boundary_name(n)) {
        ++c.boundary_params;
        boundary_idx.push_back(static_cast<int>(i));
        c.tested.push_back(n);
      } else if (!is_derived_name(n)) {
        ++c.interior_params;
        c.tested.push_back(n);
      }
    }
    switch (nest.kind) {
    case ComparisonKind::LrInterior: {
      const double w = 2.0 * (alt_fit.loglik - null_fit.loglik);
      if (w < -1e-6) throw ValidationError("nesting violation between '" + c.null_label + "' and '" + c.alt_label + "'");
      c.statistic = std::max(w, 0.0);
      const int df = static_cast<int>(alt_fit.packed_estimates.size() - null_fit.packed_estimates.size());
      if (df < 0) throw ValidationError("alternative model has fewer parameters than the null");
      c.interior_params = df;
      c.p = df == 0 ? 1.0 : chi2_sf(c.statistic, df);
      break;
    }
    case ComparisonKind::LrBoundary: {
      const double w = 2.0 * (alt_fit.loglik - null_fit.loglik);
      if (w < -1e-6) throw ValidationError("nesting violation between '" + c.null_label + "' and '" + c.alt_label + "'");
      c.statistic = std::max(w, 0.0);
      const int k = c.boundary_params == 0 && c.interior_params == 0 ? 1 : c.boundary_params;
      c.p = chibar_sf(c.statistic, k, c.interior_params);
      break;
    }
    case ComparisonKind::WaldVarianceBoundary: {
      const int k = static_cast<int>(boundary_idx.size());
      if (k == 0) {
        c.statistic = 0.0;
        c.p = 0.5;
        break;
      }
      Eigen::VectorXd est(k);
      Eigen::MatrixXd V(k, k);
      for (int a = 0; a < k; ++a) {
        est(a) = alt_fit.estimates(boundary_idx[a]);
        for (int b = 0; b < k; ++b) V(a, b) = alt_fit.vcov_natural(boundary_idx[a], boundary_idx[b]);
      }
      if (!V.allFinite()) throw NumericError("covariance of the tested parameters is unavailable");
      Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
        throw NumericError("covariance of the tested parameters is singular");
      }
      c.statistic = est.dot(ldlt.solve(est));
      c.p = chibar_sf(c.statistic, k, 0);
      break;
    }
    }
    rows.push_back(std::move(c));
  }
  return rows;
}

} // namespace conmix
