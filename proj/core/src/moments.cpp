#include "conmix/moments.hpp"

#include "conmix/errors.hpp"
#include "conmix/likelihood.hpp"
#include "conmix/special_fns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>

namespace conmix {

namespace {

double profile_value(const std::string& name, const Profile& profile, double t) {
  if (name == kIntercept) return 1.0;
  if (name == profile.time_name || name == "occasion") return t;
  const auto it = profile.values.find(name);
  if (it != profile.values.end()) return it->second;
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    return profile_value(name.substr(0, colon), profile, t) *
           profile_value(name.substr(colon + 1), profile, t);
  }
  throw ValidationError("profile has no value for covariate '" + name + "'");
}

struct ThetaMoments {
  double mean = 1.0;
  double second = 1.0; // E(theta^2)
  double cross = 1.0;  // E(theta_j theta_k), j != k
};

ThetaMoments theta_moments(const ModelSpec& spec, const Params& p, int group) {
  ThetaMoments m;
  if (spec.gamma_effects()) {
    const int g = std::min<int>(group, static_cast<int>(p.alpha.size()) - 1);
    const double a = p.alpha[g], b = p.beta[g];
    if (std::isinf(a)) return m;
    m.mean = a * b;
    m.second = a * b * b + m.mean * m.mean;
  } else if (spec.beta_effects()) {
    m.mean = p.pi0;
    m.second = spec.overdispersion == Overdispersion::Shared ? p.pi0 * (p.pi0 * p.nu + 1.0) / (p.nu + 1.0)
                                                             : p.pi0 * p.pi0;
  }
  m.cross = spec.overdispersion == Overdispersion::Shared ? m.second : m.mean * m.mean;
  return m;
}

int row_group(const ModelSpec& spec, int row) {
  if (spec.per_occasion_overdispersion && spec.overdispersion == Overdispersion::Independent) {
    return std::min(row, std::max(spec.overdispersion_groups, 1) - 1);
  }
  return 0;
}

void check_rows(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, const Eigen::VectorXd& xi,
                const Eigen::MatrixXd& D) {
  if (X.cols() != xi.size()) throw ValidationError("X columns do not match xi");
  if (Z.rows() != X.rows()) throw ValidationError("X and Z row counts differ");
  if (D.rows() != Z.cols() || D.cols() != Z.cols()) throw ValidationError("D does not match Z");
  psd_factor(D); // validates PSD
}

// E_b prod_i Phi(a_i + z_i'b) by Gauss-Hermite product quadrature.
double probit_product_quadrature(const Eigen::VectorXd& a, const Eigen::MatrixXd& Z,
                                 const Eigen::MatrixXd& D) {
  const int q = static_cast<int>(Z.cols());
  const Eigen::MatrixXd L = psd_factor(D);
  auto integrand = [&](const Eigen::VectorXd& u) {
    const Eigen::VectorXd eta = a + Z * (L * u);
    double log_prod = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) log_prod += log_std_normal_cdf(eta(i));
    return std::exp(log_prod);
  };
  if (q == 0) return integrand(Eigen::VectorXd::Zero(0));
  if (q > 2) throw UnsupportedError("at most two normal random effects are supported");
  const int order = q == 1 ? 80 : 48;
  const NodeSet gh = gh_nodes(order);
  const double norm = std::pow(std::numbers::pi, -0.5 * q);
  double sum = 0.0;
  Eigen::VectorXd u(q);
  if (q == 1) {
    for (int i = 0; i < order; ++i) {
      u(0) = std::numbers::sqrt2 * gh.nodes[i];
      sum += gh.weights[i] * integrand(u);
    }
  } else {
    for (int i = 0; i < order; ++i) {
      for (int j = 0; j < order; ++j) {
        u(0) = std::numbers::sqrt2 * gh.nodes[i];
        u(1) = std::numbers::sqrt2 * gh.nodes[j];
        sum += gh.weights[i] * gh.weights[j] * integrand(u);
      }
    }
  }
  return norm * sum;
}

double inv_link_d1(FamilyKind f, double eta) {
  switch (f) {
  case FamilyKind::Normal:
    return 1.0;
  case FamilyKind::Poisson:
  case FamilyKind::Weibull:
    return std::exp(eta);
  case FamilyKind::BernoulliLogit: {
    const double s = inverse_link(f, eta);
    return s * (1.0 - s);
  }
  case FamilyKind::BernoulliProbit:
    return std_normal_pdf(eta);
  }
  return 0.0;
}

double inv_link_d2(FamilyKind f, double eta) {
  switch (f) {
  case FamilyKind::Normal:
    return 0.0;
  case FamilyKind::Poisson:
  case FamilyKind::Weibull:
    return std::exp(eta);
  case FamilyKind::BernoulliLogit: {
    const double s = inverse_link(f, eta);
    return s * (1.0 - s) * (1.0 - 2.0 * s);
  }
  case FamilyKind::BernoulliProbit:
    return -eta * std_normal_pdf(eta);
  }
  return 0.0;
}

MomentSet probit_moments(const Eigen::VectorXd& a, const Eigen::MatrixXd& Z, const Eigen::MatrixXd& D,
                         const ThetaMoments& th, bool means_only) {
  const Eigen::Index n = a.size();
  const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) + Z * D * Z.transpose();
  MomentSet m;
  m.mean.resize(n);
  Eigen::VectorXd h(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    h(j) = a(j) / std::sqrt(S(j, j));
    m.mean(j) = th.mean * std_normal_cdf(h(j));
  }
  if (means_only) return m;
  m.cov.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    m.cov(j, j) = m.mean(j) * (1.0 - m.mean(j));
    for (Eigen::Index k = 0; k < j; ++k) {
      const double r = S(j, k) / std::sqrt(S(j, j) * S(k, k));
      const double both = th.cross * bvn_cdf(h(j), h(k), std::clamp(r, -1.0, 1.0));
      m.cov(j, k) = m.cov(k, j) = both - m.mean(j) * m.mean(k);
    }
  }
  return m;
}

MomentSet poisson_moments(const Eigen::VectorXd& a, const Eigen::MatrixXd& S, const Eigen::VectorXd& tm,
                          const Eigen::VectorXd& tv, bool shared, bool means_only) {
  const Eigen::Index n = a.size();
  MomentSet m;
  m.mean.resize(n);
  Eigen::VectorXd ek(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    ek(j) = std::exp(a(j) + 0.5 * S(j, j));
    m.mean(j) = tm(j) * ek(j);
  }
  if (means_only) return m;
  m.cov.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double ek2 = std::exp(2.0 * a(j) + 2.0 * S(j, j));
    m.cov(j, j) = m.mean(j) + (tv(j) + tm(j) * tm(j)) * ek2 - m.mean(j) * m.mean(j);
    for (Eigen::Index k = 0; k < j; ++k) {
      const double ejk = std::exp(a(j) + a(k) + 0.5 * (S(j, j) + S(k, k)) + S(j, k));
      const double cross = shared ? tv(j) + tm(j) * tm(k) : tm(j) * tm(k);
      m.cov(j, k) = m.cov(k, j) = cross * ejk - tm(j) * tm(k) * ek(j) * ek(k);
    }
  }
  return m;
}

MomentSet moments_impl(const ModelSpec& spec, const Params& p, const Eigen::MatrixXd& X,
                       const Eigen::MatrixXd& Z, bool means_only) {
  check_rows(X, Z, p.xi, p.D);
  const Eigen::Index n = X.rows();
  const Eigen::VectorXd a = X * p.xi;
  switch (spec.family) {
  case FamilyKind::Poisson: {
    Eigen::VectorXd tm(n), tv(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const ThetaMoments th = theta_moments(spec, p, row_group(spec, static_cast<int>(j)));
      tm(j) = th.mean;
      tv(j) = th.second - th.mean * th.mean;
    }
    return poisson_moments(a, Z * p.D * Z.transpose(), tm, tv,
                           spec.overdispersion == Overdispersion::Shared, means_only);
  }
  case FamilyKind::Normal: {
    MomentSet m;
    m.mean = a;
    if (means_only) return m;
    m.cov = Z * p.D * Z.transpose();
    m.cov.diagonal().array() += p.sigma * p.sigma;
    return m;
  }
  case FamilyKind::BernoulliProbit:
    return probit_moments(a, Z, p.D, theta_moments(spec, p, 0), means_only);
  case FamilyKind::BernoulliLogit: {
    const ThetaMoments th = theta_moments(spec, p, 0);
    if (Z.cols() == 0 || p.D.isZero(0.0)) {
      MomentSet m;
      m.mean.resize(n);
      Eigen::VectorXd kap(n);
      for (Eigen::Index j = 0; j < n; ++j) {
        kap(j) = inverse_link(spec.family, a(j));
        m.mean(j) = th.mean * kap(j);
      }
      if (means_only) return m;
      m.cov.resize(n, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        m.cov(j, j) = m.mean(j) * (1.0 - m.mean(j));
        for (Eigen::Index k = 0; k < j; ++k) {
          m.cov(j, k) = m.cov(k, j) = (th.cross - th.mean * th.mean) * kap(j) * kap(k);
        }
      }
      return m;
    }
    const double c = logit_probit_constant();
    MomentSet m = probit_moments(c * a, c * Z, p.D, th, means_only);
    m.approximate = true;
    return m;
  }
  case FamilyKind::Weibull:
    break;
  }
  throw UnsupportedError("closed-form marginal moments are not available for the Weibull family; use simulation");
}

} // namespace

MomentSet poisson_combined_moments(const Eigen::VectorXd& xi, const Eigen::MatrixXd& D, double var_theta,
                                   const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, bool shared_theta,
                                   double theta_mean) {
  if (!(var_theta >= 0.0)) throw DomainError("var_theta must be >= 0");
  if (!(theta_mean > 0.0)) throw DomainError("theta_mean must be positive");
  check_rows(X, Z, xi, D);
  const Eigen::Index n = X.rows();
  return poisson_moments(X * xi, Z * D * Z.transpose(), Eigen::VectorXd::Constant(n, theta_mean),
                         Eigen::VectorXd::Constant(n, var_theta), shared_theta, false);
}

double poisson_marginal_moment(int k, double alpha, double beta, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& xi, const Eigen::VectorXd& z,
                               const Eigen::MatrixXd& D) {
  if (k < 1) throw DomainError("moment order must be >= 1");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("alpha and beta must be positive");
  if (x.size() != xi.size() || z.size() != D.rows() || D.rows() != D.cols()) {
    throw ValidationError("dimension mismatch in poisson_marginal_moment");
  }
  const double a = x.dot(xi);
  const double s = z.dot(D * z);
  const bool degenerate = std::isinf(alpha);
  const double lg_alpha = degenerate ? 0.0 : log_gamma(alpha);
  double total = 0.0;
  for (int l = 1; l <= k; ++l) {
    const double st = stirling2_value(k, l); // throws past k = 30
    double lt = std::log(st) + l * a + 0.5 * l * l * s;
    if (!degenerate) lt += l * std::log(beta) + log_gamma(alpha + l) - lg_alpha;
    if (lt > 709.0) throw OverflowError("E(Y^k) overflows double precision");
    total += std::exp(lt);
  }
  return total;
}

Eigen::MatrixXd profile_design(const std::vector<std::string>& names, const Profile& profile,
                               std::span<const double> times) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < times.size(); ++r) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = profile_value(names[c], profile, times[r]);
    }
  }
  return M;
}

MomentSet model_moments(const ModelSpec& spec, const Params& params, const Eigen::MatrixXd& X,
                        const Eigen::MatrixXd& Z) {
  return moments_impl(spec, params, X, Z, false);
}

double marginal_correlation(const ModelSpec& spec, const Params& params, const Profile& profile, double t,
                            double s) {
  const double times[2] = {t, s};
  const MomentSet m = model_moments(spec, params, profile_design(spec.fixed_effects, profile, times),
                                    profile_design(spec.random_effects, profile, times));
  const double v = m.cov(0, 0) * m.cov(1, 1);
  if (!(v > 0.0)) throw DomainError("zero marginal variance");
  return m.cov(0, 1) / std::sqrt(v);
}

CorrelationSummary marginal_correlation(const ModelSpec& spec, const Params& params, const Profile& profile,
                                        std::span<const double> times) {
  if (times.size() < 2) throw ValidationError("correlation grid needs at least two time points");
  const MomentSet m = model_moments(spec, params, profile_design(spec.fixed_effects, profile, times),
                                    profile_design(spec.random_effects, profile, times));
  CorrelationSummary out;
  out.times.assign(times.begin(), times.end());
  out.approximate = m.approximate;
  const Eigen::Index n = m.cov.rows();
  out.corr.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(m.cov(j, j) > 0.0)) throw DomainError("zero marginal variance");
  }
  out.max = -std::numeric_limits<double>::infinity();
  out.min = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    out.corr(j, j) = 1.0;
    for (Eigen::Index k = j + 1; k < n; ++k) {
      const double r = m.cov(j, k) / std::sqrt(m.cov(j, j) * m.cov(k, k));
      out.corr(j, k) = out.corr(k, j) = r;
      if (r > out.max) {
        out.max = r;
        out.argmax = {times[j], times[k]};
      }
      if (r < out.min) {
        out.min = r;
        out.argmin = {times[j], times[k]};
      }
    }
  }
  return out;
}

double probit_all_ones(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, const Eigen::VectorXd& xi,
                       const Eigen::MatrixXd& D, double tol) {
  check_rows(X, Z, xi, D);
  const Eigen::Index n = X.rows();
  if (n == 0) return 1.0;
  const Eigen::VectorXd a = X * xi;
  if (n > kMvnMaxDimension) return probit_product_quadrature(a, Z, D);
  const Eigen::MatrixXd S = Eigen::MatrixXd::Identity(n, n) + Z * D * Z.transpose();
  std::vector<double> upper(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) upper[j] = a(j) / std::sqrt(S(j, j));
  const CorrelationMatrix corr = CorrelationMatrix::from_covariance(S);
  return mvn_cdf(upper, corr, tol).probability;
}

double probit_joint_prob(std::span<const int> pattern, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                         const Eigen::VectorXd& xi, const Eigen::MatrixXd& D, double pi0, double tol) {
  const int n = static_cast<int>(pattern.size());
  if (n != X.rows()) throw ValidationError("pattern length does not match the design");
  if (n > 15) throw UnsupportedError("probit pattern probabilities support at most 15 occasions");
  if (!(pi0 > 0.0 && pi0 <= 1.0)) throw DomainError("pi0 must lie in (0, 1]");
  check_rows(X, Z, xi, D);
  std::vector<int> ones, zeros;
  for (int j = 0; j < n; ++j) {
    if (pattern[j] == 1) {
      ones.push_back(j);
    } else if (pattern[j] == 0) {
      zeros.push_back(j);
    } else {
      throw DomainError("pattern entries must be 0 or 1");
    }
  }
  auto term = [&](const std::vector<int>& rows) {
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd Xs(m, X.cols()), Zs(m, Z.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
      Xs.row(i) = X.row(rows[i]);
      Zs.row(i) = Z.row(rows[i]);
    }
    return std::pow(pi0, static_cast<double>(m)) * probit_all_ones(Xs, Zs, xi, D, tol);
  };
  double total = 0.0;
  const std::size_t subsets = std::size_t{1} << zeros.size();
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    std::vector<int> rows = ones;
    int extra = 0;
    for (std::size_t b = 0; b < zeros.size(); ++b) {
      if (mask & (std::size_t{1} << b)) {
        rows.push_back(zeros[b]);
        ++extra;
      }
    }
    std::sort(rows.begin(), rows.end());
    total += (extra % 2 ? -1.0 : 1.0) * term(rows);
  }
  return total;
}

double logit_probit_constant() { return 16.0 * std::sqrt(3.0) / (15.0 * std::numbers::pi); }

MomentSet logit_moments_via_probit(const Eigen::VectorXd& xi, const Eigen::MatrixXd& D, double pi0,
                                   const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
  if (!(pi0 > 0.0 && pi0 <= 1.0)) throw DomainError("pi0 must lie in (0, 1]");
  check_rows(X, Z, xi, D);
  const double c = logit_probit_constant();
  ThetaMoments th;
  th.mean = pi0;
  th.second = th.cross = pi0 * pi0;
  MomentSet m = probit_moments(c * (X * xi), c * Z, D, th, false);
  m.approximate = true;
  return m;
}

double logit_pattern_prob_via_probit(std::span<const int> pattern, const Eigen::MatrixXd& X,
                                     const Eigen::MatrixXd& Z, const Eigen::VectorXd& xi,
                                     const Eigen::MatrixXd& D, double pi0) {
  const double c = logit_probit_constant();
  return probit_joint_prob(pattern, c * X, c * Z, xi, D, pi0);
}

MomentSet bernoulli_beta_moments(std::span<const double> kappa, double alpha, double beta,
                                 std::optional<double> rho_shared) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("alpha and beta must be positive");
  const double rho = rho_shared.value_or(0.0);
  if (!(rho >= -1.0 && rho <= 1.0)) throw DomainError("theta correlation must lie in [-1, 1]");
  const Eigen::Index n = static_cast<Eigen::Index>(kappa.size());
  const double pi0 = alpha / (alpha + beta);
  const double s = alpha + beta;
  const double var_theta = alpha * beta / (s * s * (s + 1.0));
  MomentSet m;
  m.mean.resize(n);
  m.cov.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(kappa[j] > 0.0 && kappa[j] <= 1.0)) throw DomainError("kappa must lie in (0, 1]");
    m.mean(j) = pi0 * kappa[j];
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    m.cov(j, j) = m.mean(j) * (1.0 - m.mean(j));
    for (Eigen::Index k = 0; k < j; ++k) m.cov(j, k) = m.cov(k, j) = rho * var_theta * kappa[j] * kappa[k];
  }
  return m;
}

MeanVariance betabinomial_aggregate(int n, double pi, double rho) {
  if (n < 1) throw DomainError("n must be >= 1");
  if (!(pi >= 0.0 && pi <= 1.0)) throw DomainError("pi must lie in [0, 1]");
  if (!(rho <= 1.0) || (n > 1 && rho < -1.0 / (n - 1) - 1e-15)) {
    throw DomainError("correlation outside [-1/(n-1), 1]");
  }
  const double var = n * pi * (1.0 - pi) * (1.0 + (n - 1) * rho);
  if (var < 0.0) throw DomainError("negative variance");
  return {n * pi, std::max(var, 0.0)};
}

MomentSet approx_moments_delta(const ModelSpec& spec, const Params& params, const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& Z) {
  if (spec.family == FamilyKind::Weibull) {
    throw UnsupportedError("delta-method moments are not provided for the Weibull family");
  }
  check_rows(X, Z, params.xi, params.D);
  const Eigen::Index n = X.rows();
  const Eigen::VectorXd eta = X * params.xi;
  const Eigen::MatrixXd S = Z * params.D * Z.transpose();
  Eigen::VectorXd ek(n), g1(n), ek2(n), tm(n), t2(n);
  MomentSet m;
  m.approximate = true;
  m.mean.resize(n);
  m.cov.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double g = inverse_link(spec.family, eta(j));
    g1(j) = inv_link_d1(spec.family, eta(j));
    ek(j) = g + 0.5 * inv_link_d2(spec.family, eta(j)) * S(j, j);
    ek2(j) = g1(j) * g1(j) * S(j, j) + ek(j) * ek(j);
    const ThetaMoments th = theta_moments(spec, params, row_group(spec, static_cast<int>(j)));
    tm(j) = th.mean;
    t2(j) = th.second;
    m.mean(j) = th.mean * ek(j);
  }
  const bool shared = spec.overdispersion == Overdispersion::Shared;
  for (Eigen::Index j = 0; j < n; ++j) {
    double family_var = 0.0;
    switch (spec.family) {
    case FamilyKind::Poisson:
      family_var = m.mean(j);
      break;
    case FamilyKind::Normal:
      family_var = params.sigma * params.sigma;
      break;
    default: // Bernoulli: E[theta kappa (1 - theta kappa)]
      family_var = m.mean(j) - t2(j) * ek2(j);
      break;
    }
    m.cov(j, j) = family_var + t2(j) * ek2(j) - m.mean(j) * m.mean(j);
    for (Eigen::Index k = 0; k < j; ++k) {
      const double cov_k = g1(j) * g1(k) * S(j, k);
      const double cross = shared ? t2(j) : tm(j) * tm(k);
      m.cov(j, k) = m.cov(k, j) = cross * (cov_k + ek(j) * ek(k)) - tm(j) * tm(k) * ek(j) * ek(k);
    }
  }
  if (spec.family == FamilyKind::Normal) m.approximate = false;
  return m;
}

MarginalContrast marginal_fixed_effect(const ModelSpec& spec, const Eigen::VectorXd& packed,
                                       const Eigen::MatrixXd& vcov, const Profile& profile0,
                                       const Profile& profile1, std::span<const double> times) {
  if (times.empty()) throw ValidationError("marginal contrast needs at least one time point");
  if (vcov.rows() != packed.size() || vcov.cols() != packed.size()) {
    throw ValidationError("covariance does not match the packed estimates");
  }
  const Eigen::MatrixXd X0 = profile_design(spec.fixed_effects, profile0, times);
  const Eigen::MatrixXd Z0 = profile_design(spec.random_effects, profile0, times);
  const Eigen::MatrixXd X1 = profile_design(spec.fixed_effects, profile1, times);
  const Eigen::MatrixXd Z1 = profile_design(spec.random_effects, profile1, times);
  bool approximate = false;
  auto contrast = [&](const Eigen::VectorXd& x) {
    const Params p = unpack(spec, x);
    const MomentSet m0 = moments_impl(spec, p, X0, Z0, true);
    const MomentSet m1 = moments_impl(spec, p, X1, Z1, true);
    approximate = approximate || m0.approximate || m1.approximate;
    return (m1.mean - m0.mean).mean();
  };
  MarginalContrast out;
  out.contrast = contrast(packed);
  Eigen::VectorXd grad(packed.size());
  Eigen::VectorXd xp = packed;
  for (Eigen::Index i = 0; i < packed.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(packed(i)));
    xp(i) = packed(i) + h;
    const double up = contrast(xp);
    xp(i) = packed(i) - h;
    const double dn = contrast(xp);
    xp(i) = packed(i);
    grad(i) = (up - dn) / (2.0 * h);
  }
  out.se = std::sqrt(std::max(grad.dot(vcov * grad), 0.0));
  out.approximate = approximate;
  return out;
}

MarginalContrast marginal_fixed_effect(const FitResult& fit, const Profile& profile0, const Profile& profile1,
                                       std::span<const double> times) {
  return marginal_fixed_effect(fit.spec, fit.packed_estimates, fit.vcov, profile0, profile1, times);
}

} // namespace conmix
