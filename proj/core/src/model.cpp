#include "conmix/model.hpp"

#include "conmix/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace conmix {

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }
double expit(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

int od_groups(const ModelSpec& spec) {
  if (!spec.gamma_effects()) return 0;
  if (spec.per_occasion_overdispersion && spec.overdispersion == Overdispersion::Independent) {
    return std::max(1, spec.overdispersion_groups);
  }
  return 1;
}

std::string suffix(int g, int groups) {
  return groups > 1 ? "[" + std::to_string(g + 1) + "]" : std::string();
}

bool has_column(const Dataset& data, const std::string& name) {
  if (name == kIntercept || name == "occasion" || data.column_index(name) >= 0) return true;
  const auto colon = name.find(':');
  if (colon == std::string::npos) return false;
  return has_column(data, name.substr(0, colon)) && has_column(data, name.substr(colon + 1));
}

// Orders row indices by (subject, occasion) with the subject ordering used
// throughout the library.
std::vector<std::size_t> canonical_order(const Dataset& data) {
  std::vector<std::size_t> idx(data.rows());
  std::iota(idx.begin(), idx.end(), 0);
  bool numeric = true;
  std::vector<long long> num(data.rows(), 0);
  for (std::size_t r = 0; r < data.rows() && numeric; ++r) numeric = parse_int(data.id[r], num[r]);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (numeric) {
      if (num[a] != num[b]) return num[a] < num[b];
    }
    if (data.id[a] != data.id[b]) {
      return data.id[a] < data.id[b];
    }
    return data.occasion[a] < data.occasion[b];
  });
  return idx;
}

} // namespace

std::string_view to_string(Overdispersion od) {
  switch (od) {
  case Overdispersion::None:
    return "none";
  case Overdispersion::Independent:
    return "independent";
  case Overdispersion::Shared:
    return "shared";
  }
  return "none";
}

std::string_view to_string(GammaConstraint c) {
  switch (c) {
  case GammaConstraint::MeanOne:
    return "mean_one";
  case GammaConstraint::Exponential:
    return "exponential";
  case GammaConstraint::FixedBeta:
    return "fixed_beta";
  case GammaConstraint::Unconstrained:
    return "unconstrained";
  }
  return "mean_one";
}

Overdispersion overdispersion_from_string(std::string_view name) {
  if (name == "none") return Overdispersion::None;
  if (name == "independent") return Overdispersion::Independent;
  if (name == "shared") return Overdispersion::Shared;
  throw ValidationError("unknown overdispersion structure '" + std::string(name) + "'");
}

GammaConstraint constraint_from_string(std::string_view name) {
  if (name == "mean_one") return GammaConstraint::MeanOne;
  if (name == "exponential") return GammaConstraint::Exponential;
  if (name == "fixed_beta") return GammaConstraint::FixedBeta;
  if (name == "unconstrained") return GammaConstraint::Unconstrained;
  throw ValidationError("unknown gamma constraint '" + std::string(name) + "'");
}

int Dataset::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < covariate_names.size(); ++i) {
    if (covariate_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

void Dataset::add_column(const std::string& name, std::vector<double> values) {
  if (values.size() != rows()) throw ValidationError("column '" + name + "' has wrong length");
  const int at = column_index(name);
  if (at >= 0) {
    covariates[at] = std::move(values);
  } else {
    covariate_names.push_back(name);
    covariates.push_back(std::move(values));
  }
}

double Params::var_theta(int group) const {
  if (!alpha.empty()) {
    const double a = alpha.at(group);
    const double b = beta.at(group);
    return a * b * b;
  }
  return pi0 * (1.0 - pi0) / (nu + 1.0);
}

double design_value(const Dataset& data, const std::string& name, std::size_t row) {
  if (name == kIntercept) return 1.0;
  const int col = data.column_index(name);
  if (col >= 0) return data.covariates[col][row];
  if (name == "occasion") return data.occasion[row];
  const auto colon = name.find(':');
  if (colon != std::string::npos) {
    return design_value(data, name.substr(0, colon), row) *
           design_value(data, name.substr(colon + 1), row);
  }
  throw ValidationError("missing covariate column '" + name + "'");
}

std::vector<Subject> build_designs(const ModelSpec& spec, const Dataset& data) {
  const auto order = canonical_order(data);
  std::map<int, int> occasion_group;
  if (od_groups(spec) > 1) {
    std::set<int> occ(data.occasion.begin(), data.occasion.end());
    int g = 0;
    for (int o : occ) occasion_group[o] = g++;
  }
  std::vector<Subject> subjects;
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k;
    while (end < order.size() && data.id[order[end]] == data.id[order[k]]) ++end;
    Subject s;
    s.id = data.id[order[k]];
    const int n = static_cast<int>(end - k);
    s.y.resize(n);
    s.X.resize(n, spec.p());
    s.Z.resize(n, spec.q());
    for (int j = 0; j < n; ++j) {
      const std::size_t r = order[k + j];
      s.occasions.push_back(data.occasion[r]);
      s.group.push_back(occasion_group.empty() ? 0 : occasion_group.at(data.occasion[r]));
      s.y(j) = data.y[r];
      for (int c = 0; c < spec.p(); ++c) s.X(j, c) = design_value(data, spec.fixed_effects[c], r);
      for (int c = 0; c < spec.q(); ++c) s.Z(j, c) = design_value(data, spec.random_effects[c], r);
    }
    if (!s.X.allFinite() || !s.Z.allFinite() || !s.y.allFinite()) {
      throw ValidationError("non-finite design value for subject " + s.id);
    }
    subjects.push_back(std::move(s));
    k = end;
  }
  return subjects;
}

int packed_size(const ModelSpec& spec) { return static_cast<int>(packed_names(spec).size()); }

std::vector<std::string> packed_names(const ModelSpec& spec) {
  std::vector<std::string> names = spec.fixed_effects;
  const int q = spec.q();
  if (q == 1) {
    names.push_back("ln_sqrt_d");
  } else {
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j <= i; ++j) {
        const std::string idx = "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]";
        names.push_back(i == j ? "ln_L" + idx : "L" + idx);
      }
    }
  }
  const int groups = od_groups(spec);
  for (int g = 0; g < groups; ++g) {
    const std::string s = suffix(g, groups);
    switch (spec.constraint) {
    case GammaConstraint::MeanOne:
    case GammaConstraint::FixedBeta:
      names.push_back("ln_alpha" + s);
      break;
    case GammaConstraint::Exponential:
      names.push_back("ln_beta" + s);
      break;
    case GammaConstraint::Unconstrained:
      names.push_back("ln_alpha" + s);
      names.push_back("ln_beta" + s);
      break;
    }
  }
  if (spec.beta_effects()) {
    names.push_back("logit_pi0");
    if (spec.overdispersion == Overdispersion::Shared) names.push_back("ln_nu");
  }
  if (spec.family == FamilyKind::Weibull && spec.weibull_shape_free) names.push_back("ln_rho");
  if (spec.family == FamilyKind::Normal) names.push_back("ln_sigma");
  return names;
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& D) {
  const Eigen::Index q = D.rows();
  if (D.cols() != q) throw DomainError("covariance matrix must be square");
  if (q == 0) return D;
  if (!D.isApprox(D.transpose(), 1e-12) && (D - D.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("covariance matrix must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(D);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw DomainError("covariance matrix is not positive semi-definite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::VectorXd pack(const ModelSpec& spec, const Params& params) {
  const int p = spec.p();
  const int q = spec.q();
  if (params.xi.size() != p) throw ValidationError("pack: xi has wrong length");
  if (params.D.rows() != q || params.D.cols() != q) throw ValidationError("pack: D has wrong shape");
  Eigen::VectorXd v(packed_size(spec));
  int k = 0;
  for (int i = 0; i < p; ++i) v(k++) = params.xi(i);
  if (q > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(params.D);
    if (llt.info() != Eigen::Success) {
      throw DomainError("pack: D must be positive definite (boundary values cannot be packed)");
    }
    const Eigen::MatrixXd L = llt.matrixL();
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j <= i; ++j) v(k++) = i == j ? std::log(L(i, i)) : L(i, j);
    }
  }
  const int groups = od_groups(spec);
  if (groups > 0 && (static_cast<int>(params.alpha.size()) != groups ||
                     static_cast<int>(params.beta.size()) != groups)) {
    throw ValidationError("pack: expected " + std::to_string(groups) + " gamma effect(s)");
  }
  for (int g = 0; g < groups; ++g) {
    switch (spec.constraint) {
    case GammaConstraint::MeanOne:
    case GammaConstraint::FixedBeta:
      v(k++) = std::log(params.alpha[g]);
      break;
    case GammaConstraint::Exponential:
      v(k++) = std::log(params.beta[g]);
      break;
    case GammaConstraint::Unconstrained:
      v(k++) = std::log(params.alpha[g]);
      v(k++) = std::log(params.beta[g]);
      break;
    }
  }
  if (spec.beta_effects()) {
    v(k++) = logit(params.pi0);
    if (spec.overdispersion == Overdispersion::Shared) v(k++) = std::log(params.nu);
  }
  if (spec.family == FamilyKind::Weibull && spec.weibull_shape_free) v(k++) = std::log(params.rho);
  if (spec.family == FamilyKind::Normal) v(k++) = std::log(params.sigma);
  return v;
}

Params unpack(const ModelSpec& spec, const Eigen::VectorXd& v) {
  if (v.size() != packed_size(spec)) {
    throw ValidationError("unpack: expected " + std::to_string(packed_size(spec)) +
                          " entries, got " + std::to_string(v.size()));
  }
  const int p = spec.p();
  const int q = spec.q();
  Params out;
  int k = 0;
  out.xi = v.head(p);
  k = p;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j <= i; ++j) L(i, j) = i == j ? std::exp(v(k++)) : v(k++);
  }
  out.D = L * L.transpose();
  const int groups = od_groups(spec);
  for (int g = 0; g < groups; ++g) {
    double a = 1.0;
    double b = 1.0;
    switch (spec.constraint) {
    case GammaConstraint::MeanOne:
      a = std::exp(v(k++));
      b = 1.0 / a;
      break;
    case GammaConstraint::FixedBeta:
      a = std::exp(v(k++));
      b = spec.fixed_beta;
      break;
    case GammaConstraint::Exponential:
      a = 1.0;
      b = std::exp(v(k++));
      break;
    case GammaConstraint::Unconstrained:
      a = std::exp(v(k++));
      b = std::exp(v(k++));
      break;
    }
    out.alpha.push_back(a);
    out.beta.push_back(b);
  }
  out.nu = spec.beta_precision;
  if (spec.beta_effects()) {
    out.pi0 = expit(v(k++));
    if (spec.overdispersion == Overdispersion::Shared) out.nu = std::exp(v(k++));
  }
  out.rho = spec.weibull_shape;
  if (spec.family == FamilyKind::Weibull && spec.weibull_shape_free) out.rho = std::exp(v(k++));
  if (spec.family == FamilyKind::Normal) out.sigma = std::exp(v(k++));
  return out;
}

Params default_params(const ModelSpec& spec) {
  Params out;
  out.xi = Eigen::VectorXd::Zero(spec.p());
  out.D = 0.1 * Eigen::MatrixXd::Identity(spec.q(), spec.q());
  const int groups = od_groups(spec);
  for (int g = 0; g < groups; ++g) {
    out.alpha.push_back(1.0);
    out.beta.push_back(spec.constraint == GammaConstraint::FixedBeta ? spec.fixed_beta : 1.0);
  }
  out.pi0 = spec.beta_effects() ? 0.8 : 1.0;
  out.nu = spec.beta_precision;
  out.rho = spec.weibull_shape;
  out.sigma = 1.0;
  return out;
}

std::vector<std::string> natural_names(const ModelSpec& spec) {
  std::vector<std::string> names = spec.fixed_effects;
  const int q = spec.q();
  if (q == 1) {
    names.push_back("d");
  } else {
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j <= i; ++j) {
        names.push_back("d[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
      }
    }
  }
  const int groups = od_groups(spec);
  for (int g = 0; g < groups; ++g) {
    const std::string s = suffix(g, groups);
    names.push_back("alpha" + s);
    names.push_back("beta" + s);
    names.push_back("var_theta" + s);
  }
  if (spec.beta_effects()) {
    names.push_back("pi0");
    if (spec.overdispersion == Overdispersion::Independent) {
      names.push_back("alpha_over_beta");
      names.push_back("one_minus_pi0");
    } else {
      names.push_back("nu");
      names.push_back("alpha");
      names.push_back("beta");
      names.push_back("var_theta");
    }
  }
  if (spec.family == FamilyKind::Weibull && spec.weibull_shape_free) names.push_back("rho");
  if (spec.family == FamilyKind::Normal) names.push_back("sigma");
  return names;
}

Eigen::VectorXd natural_values(const ModelSpec& spec, const Params& params) {
  std::vector<double> vals(params.xi.data(), params.xi.data() + params.xi.size());
  const int q = spec.q();
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j <= i; ++j) vals.push_back(params.D(i, j));
  }
  const int groups = od_groups(spec);
  for (int g = 0; g < groups; ++g) {
    vals.push_back(params.alpha[g]);
    vals.push_back(params.beta[g]);
    vals.push_back(params.var_theta(g));
  }
  if (spec.beta_effects()) {
    vals.push_back(params.pi0);
    if (spec.overdispersion == Overdispersion::Independent) {
      vals.push_back(params.pi0 < 1.0 ? params.pi0 / (1.0 - params.pi0)
                                      : std::numeric_limits<double>::infinity());
      vals.push_back(1.0 - params.pi0);
    } else {
      vals.push_back(params.nu);
      vals.push_back(params.pi0 * params.nu);
      vals.push_back((1.0 - params.pi0) * params.nu);
      vals.push_back(params.var_theta());
    }
  }
  if (spec.family == FamilyKind::Weibull && spec.weibull_shape_free) vals.push_back(params.rho);
  if (spec.family == FamilyKind::Normal) vals.push_back(params.sigma);
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

bool ValidationReport::ok() const {
  return std::none_of(issues.begin(), issues.end(),
                      [](const ValidationIssue& i) { return i.severity == Severity::Error; });
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (const auto& i : issues) {
    out << (i.severity == Severity::Error ? "error: " : "warning: ") << i.message << '\n';
  }
  return out.str();
}

ValidationReport validate(const ModelSpec& spec) {
  ValidationReport rep;
  auto error = [&](std::string m) { rep.issues.push_back({Severity::Error, std::move(m)}); };
  auto warn = [&](std::string m) { rep.issues.push_back({Severity::Warning, std::move(m)}); };

  if (spec.q() > 2) error("at most two normal random effects are supported (got " + std::to_string(spec.q()) + ")");
  std::set<std::string> seen;
  for (const auto& n : spec.fixed_effects) {
    if (!seen.insert(n).second) error("fixed effect '" + n + "' listed twice");
  }
  seen.clear();
  for (const auto& n : spec.random_effects) {
    if (!seen.insert(n).second) error("random effect '" + n + "' listed twice");
  }
  if (spec.family == FamilyKind::Normal && spec.overdispersion != Overdispersion::None) {
    error("the normal family takes no conjugate overdispersion effect");
  }
  if (spec.per_occasion_overdispersion && spec.overdispersion == Overdispersion::Shared) {
    error("per-occasion overdispersion requires independent effects");
  }
  if (spec.per_occasion_overdispersion && spec.overdispersion_groups < 1) {
    error("overdispersion_groups must be at least 1");
  }
  if (!(spec.weibull_shape > 0.0)) error("weibull_shape must be positive");
  if (!(spec.fixed_beta > 0.0)) error("fixed_beta must be positive");
  if (!(spec.beta_precision > 0.0)) error("beta_precision must be positive");
  const bool intercept = std::find(spec.fixed_effects.begin(), spec.fixed_effects.end(),
                                   std::string(kIntercept)) != spec.fixed_effects.end();
  if (spec.gamma_effects() && intercept) {
    if (spec.constraint == GammaConstraint::Unconstrained) {
      warn("free alpha and beta alias with the intercept: only alpha*beta*exp(intercept) is identified");
    } else if (spec.constraint == GammaConstraint::FixedBeta) {
      warn("alpha with fixed beta is partially aliased with the intercept (E(theta) = alpha*beta)");
    }
  }
  return rep;
}

ValidationReport validate(const ModelSpec& spec, const Dataset& data) {
  ValidationReport rep = validate(spec);
  auto error = [&](std::string m) { rep.issues.push_back({Severity::Error, std::move(m)}); };

  const std::size_t n = data.rows();
  if (data.id.size() != n || data.occasion.size() != n) {
    error("dataset columns have inconsistent lengths");
    return rep;
  }
  for (std::size_t c = 0; c < data.covariates.size(); ++c) {
    if (data.covariates[c].size() != n) error("covariate '" + data.covariate_names[c] + "' has wrong length");
  }
  if (!rep.ok()) return rep;
  if (n == 0) error("dataset is empty");

  std::vector<std::string> used = spec.fixed_effects;
  used.insert(used.end(), spec.random_effects.begin(), spec.random_effects.end());
  bool columns_ok = true;
  for (const auto& name : used) {
    if (!has_column(data, name)) {
      error("missing covariate column '" + name + "'");
      columns_ok = false;
    }
  }
  if (columns_ok) {
    for (const auto& name : used) {
      for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(design_value(data, name, r))) {
          error("non-finite value in column '" + name + "' at row " + std::to_string(r + 1));
          break;
        }
      }
    }
  }

  const FamilyMember member{spec.family, 1.0};
  std::size_t bad = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!in_support(member, data.y[r])) {
      if (bad++ < 5) {
        error("outcome " + std::to_string(data.y[r]) + " at row " + std::to_string(r + 1) +
              " outside the support of the " + std::string(to_string(spec.family)) + " family");
      }
    }
    if (data.occasion[r] < 1) error("occasion must be >= 1 at row " + std::to_string(r + 1));
  }
  if (bad > 5) error(std::to_string(bad - 5) + " further support violations");

  std::set<std::pair<std::string, int>> keys;
  std::map<std::string, int> per_subject;
  for (std::size_t r = 0; r < n; ++r) {
    if (!keys.insert({data.id[r], data.occasion[r]}).second) {
      error("duplicate (id, occasion) = (" + data.id[r] + ", " + std::to_string(data.occasion[r]) +
            ") at row " + std::to_string(r + 1));
    }
    ++per_subject[data.id[r]];
  }
  if (spec.overdispersion == Overdispersion::Shared) {
    const bool any_repeated = std::any_of(per_subject.begin(), per_subject.end(),
                                          [](const auto& kv) { return kv.second >= 2; });
    if (!any_repeated) error("shared overdispersion needs subjects with at least two occasions");
  }
  if (spec.per_occasion_overdispersion && spec.gamma_effects()) {
    std::set<int> occ(data.occasion.begin(), data.occasion.end());
    if (static_cast<int>(occ.size()) != spec.overdispersion_groups) {
      error("per-occasion overdispersion expects " + std::to_string(spec.overdispersion_groups) +
            " distinct occasions, data has " + std::to_string(occ.size()));
    }
  }
  return rep;
}

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void mix(const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  }
  void row(const std::string& id, int occasion, double y) {
    mix(id.data(), id.size());
    mix(&occasion, sizeof occasion);
    if (y == 0.0) y = 0.0; // fold -0
    std::uint64_t bits;
    std::memcpy(&bits, &y, sizeof bits);
    mix(&bits, sizeof bits);
  }
};

} // namespace

DataFingerprint fingerprint(const Dataset& data) {
  DataFingerprint fp;
  fp.rows = data.rows();
  std::set<std::string> ids(data.id.begin(), data.id.end());
  fp.subjects = ids.size();
  Fnv h;
  for (std::size_t r : canonical_order(data)) h.row(data.id[r], data.occasion[r], data.y[r]);
  fp.y_hash = h.h;
  return fp;
}

DataFingerprint fingerprint(const std::vector<Subject>& subjects) {
  DataFingerprint fp;
  fp.subjects = subjects.size();
  Fnv h;
  for (const auto& s : subjects) {
    fp.rows += static_cast<std::size_t>(s.n());
    for (int j = 0; j < s.n(); ++j) h.row(s.id, s.occasions[j], s.y(j));
  }
  fp.y_hash = h.h;
  return fp;
}

} // namespace conmix
