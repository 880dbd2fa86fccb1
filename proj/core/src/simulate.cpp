#include "conmix/simulate.hpp"

#include "conmix/errors.hpp"
#include "conmix/likelihood.hpp"
#include "conmix/parallel.hpp"

#include <cmath>
#include <random>

namespace conmix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct SubjectDraw {
  std::vector<std::vector<double>> cov; // [generator][row]
  std::vector<double> y;
};

double draw_gamma(std::mt19937_64& rng, double shape, double scale) {
  if (std::isinf(shape)) return 1.0;
  return std::gamma_distribution<double>(shape, scale)(rng);
}

double draw_beta(std::mt19937_64& rng, double a, double b) {
  if (b <= 0.0) return 1.0;
  const double x = std::gamma_distribution<double>(a, 1.0)(rng);
  const double z = std::gamma_distribution<double>(b, 1.0)(rng);
  return x + z > 0.0 ? x / (x + z) : (a >= b ? 1.0 : 0.0);
}

} // namespace

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

std::vector<int> SimDesign::occasion_numbers() const {
  if (!schedule.empty()) return schedule;
  std::vector<int> occ(static_cast<std::size_t>(std::max(occasions, 0)));
  for (std::size_t j = 0; j < occ.size(); ++j) occ[j] = static_cast<int>(j) + 1;
  return occ;
}

Dataset simulate(const ModelSpec& spec, const Params& params, const SimDesign& design) {
  const ValidationReport report = validate(spec);
  if (!report.ok()) throw ValidationError(report.summary());
  if (design.subjects < 1) throw ValidationError("simulation needs at least one subject");
  const std::vector<int> occ = design.occasion_numbers();
  if (occ.empty()) throw ValidationError("simulation needs at least one occasion");
  for (std::size_t j = 1; j < occ.size(); ++j) {
    if (occ[j] <= occ[j - 1]) throw ValidationError("occasion schedule must be strictly increasing");
  }
  if (params.xi.size() != spec.p()) throw ValidationError("xi does not match the fixed effects");
  if (params.D.rows() != spec.q() || params.D.cols() != spec.q()) {
    throw ValidationError("D does not match the random effects");
  }
  const Eigen::MatrixXd L = psd_factor(params.D);
  const int groups = spec.per_occasion_overdispersion ? std::max(spec.overdispersion_groups, 1) : 1;
  if (spec.gamma_effects()) {
    if (static_cast<int>(params.alpha.size()) < groups || static_cast<int>(params.beta.size()) < groups) {
      throw ValidationError("missing gamma effect parameters");
    }
    for (int g = 0; g < groups; ++g) {
      if (!(params.alpha[g] > 0.0) || !(params.beta[g] > 0.0)) throw DomainError("gamma parameters must be positive");
    }
  }
  if (spec.beta_effects() && (!(params.pi0 > 0.0 && params.pi0 <= 1.0) || !(params.nu > 0.0))) {
    throw DomainError("beta effects need pi0 in (0, 1] and nu > 0");
  }
  if (spec.family == FamilyKind::Weibull && !(params.rho > 0.0)) throw DomainError("Weibull shape must be positive");
  if (spec.family == FamilyKind::Normal && !(params.sigma > 0.0)) throw DomainError("sigma must be positive");
  for (const auto& g : design.covariates) {
    if (g.kind == CovariateGenerator::Kind::Bernoulli && !(g.value >= 0.0 && g.value <= 1.0)) {
      throw DomainError("Bernoulli covariate probability must lie in [0, 1]");
    }
    if (g.kind == CovariateGenerator::Kind::Column && g.column.empty()) {
      throw ValidationError("covariate column '" + g.name + "' is empty");
    }
  }

  const int n = static_cast<int>(occ.size());
  const std::size_t N = static_cast<std::size_t>(design.subjects);
  const std::size_t G = design.covariates.size();

  // Occasion-level design columns are needed to evaluate X and Z, so build a
  // one-subject Dataset per draw and reuse design_value.
  std::vector<SubjectDraw> draws(N);
  parallel_for(N, [&](std::size_t i) {
    std::mt19937_64 rng(split_seed(design.seed, i));
    std::normal_distribution<double> normal(0.0, 1.0);
    SubjectDraw& d = draws[i];
    Dataset local;
    local.id.assign(static_cast<std::size_t>(n), "s");
    local.occasion = occ;
    local.y.assign(static_cast<std::size_t>(n), 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      const auto& gen = design.covariates[g];
      std::vector<double> col(static_cast<std::size_t>(n));
      switch (gen.kind) {
      case CovariateGenerator::Kind::Constant:
        std::fill(col.begin(), col.end(), gen.value);
        break;
      case CovariateGenerator::Kind::Time:
        for (int j = 0; j < n; ++j) col[j] = occ[j];
        break;
      case CovariateGenerator::Kind::Bernoulli: {
        const double v = std::bernoulli_distribution(gen.value)(rng) ? 1.0 : 0.0;
        std::fill(col.begin(), col.end(), v);
        break;
      }
      case CovariateGenerator::Kind::Column:
        for (int j = 0; j < n; ++j) col[j] = gen.column[(i * n + j) % gen.column.size()];
        break;
      }
      local.add_column(gen.name, col);
    }
    Eigen::VectorXd u(spec.q());
    for (int c = 0; c < spec.q(); ++c) u(c) = normal(rng);
    const Eigen::VectorXd b = L * u;

    double shared_theta = 1.0;
    if (spec.overdispersion == Overdispersion::Shared) {
      shared_theta = spec.gamma_effects() ? draw_gamma(rng, params.alpha[0], params.beta[0])
                                          : draw_beta(rng, params.pi0 * params.nu, (1.0 - params.pi0) * params.nu);
    }
    d.y.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      double eta = 0.0;
      for (int c = 0; c < spec.p(); ++c) eta += design_value(local, spec.fixed_effects[c], j) * params.xi(c);
      for (int c = 0; c < spec.q(); ++c) eta += design_value(local, spec.random_effects[c], j) * b(c);
      double theta = shared_theta;
      if (spec.overdispersion == Overdispersion::Independent) {
        const int g = std::min(j, groups - 1);
        theta = spec.gamma_effects() ? draw_gamma(rng, params.alpha[g], params.beta[g])
                                     : draw_beta(rng, params.pi0 * params.nu, (1.0 - params.pi0) * params.nu);
      }
      double y = 0.0;
      switch (spec.family) {
      case FamilyKind::Normal:
        y = eta + params.sigma * normal(rng);
        break;
      case FamilyKind::Poisson: {
        const double mu = theta * std::exp(eta);
        if (!std::isfinite(mu)) throw NumericError("Poisson mean overflows");
        y = mu > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(mu)(rng)) : 0.0;
        break;
      }
      case FamilyKind::BernoulliLogit:
      case FamilyKind::BernoulliProbit: {
        const double pr = theta * inverse_link(spec.family, eta);
        if (pr > 1.0) throw DomainError("success probability theta*kappa exceeds 1");
        y = std::bernoulli_distribution(pr)(rng) ? 1.0 : 0.0;
        break;
      }
      case FamilyKind::Weibull: {
        const double rate = theta * std::exp(eta);
        const double e = std::exponential_distribution<double>(1.0)(rng);
        y = std::pow(e / rate, 1.0 / params.rho);
        if (!(y > 0.0) || !std::isfinite(y)) throw NumericError("Weibull draw outside (0, inf)");
        break;
      }
      }
      d.y[j] = y;
    }
    d.cov = std::move(local.covariates);
  });

  Dataset out;
  out.id.reserve(N * n);
  for (std::size_t i = 0; i < N; ++i) {
    for (int j = 0; j < n; ++j) {
      out.id.push_back(std::to_string(i + 1));
      out.occasion.push_back(occ[j]);
      out.y.push_back(draws[i].y[j]);
    }
  }
  for (std::size_t g = 0; g < G; ++g) {
    std::vector<double> col;
    col.reserve(N * n);
    for (std::size_t i = 0; i < N; ++i) col.insert(col.end(), draws[i].cov[g].begin(), draws[i].cov[g].end());
    out.add_column(design.covariates[g].name, std::move(col));
  }
  if (spec.family == FamilyKind::Weibull && out.column_index("status") < 0) {
    out.add_column("status", std::vector<double>(out.rows(), 1.0));
  }
  return out;
}

} // namespace conmix
