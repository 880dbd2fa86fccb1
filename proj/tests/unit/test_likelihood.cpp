#include <conmix/errors.hpp>
#include <conmix/family.hpp>
#include <conmix/likelihood.hpp>
#include <conmix/simulate.hpp>

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace conmix;

namespace {

ModelSpec make_spec(FamilyKind family, Overdispersion od, std::vector<std::string> random = {"intercept"}) {
  ModelSpec s;
  s.family = family;
  s.fixed_effects = {"intercept", "time"};
  s.random_effects = std::move(random);
  s.overdispersion = od;
  return s;
}

Subject make_subject(const std::vector<double>& y, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z) {
  Subject s;
  s.id = "s";
  s.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  s.X = X;
  s.Z = Z;
  for (int j = 0; j < s.n(); ++j) {
    s.occasions.push_back(j + 1);
    s.group.push_back(0);
  }
  return s;
}

Eigen::MatrixXd time_design(int n, int cols) {
  Eigen::MatrixXd X(n, cols);
  for (int j = 0; j < n; ++j) {
    X(j, 0) = 1.0;
    if (cols > 1) X(j, 1) = 0.3 * (j + 1);
  }
  return X;
}

oracle::ObsModel oracle_for(const ModelSpec& s, const Params& p) {
  oracle::ObsModel m{s.family, s.overdispersion};
  if (s.gamma_effects()) {
    m.alpha = p.alpha[0];
    m.beta = p.beta[0];
  }
  if (s.beta_effects()) m.pi0 = p.pi0;
  m.rho = p.rho;
  m.sigma = p.sigma;
  return m;
}

Dataset simulated(const ModelSpec& s, const Params& p, int subjects, int occasions, std::uint64_t seed) {
  SimDesign d;
  d.subjects = subjects;
  d.occasions = occasions;
  d.seed = seed;
  d.covariates = {CovariateGenerator::time("time")};
  return simulate(s, p, d);
}

} // namespace

TEST_SUITE("likelihood") {

TEST_CASE("Poisson-gamma conditional density at y = 0") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent);
  Params p = default_params(s);
  p.alpha = {2.5};
  p.beta = {0.7};
  for (double kappa : {0.1, 1.0, 3.7}) {
    CHECK(cond_density(s, p, 0.0, kappa) == doctest::Approx(std::pow(1.0 / (1.0 + kappa * 0.7), 2.5)).epsilon(1e-13));
    for (double y : {0.0, 1.0, 4.0, 11.0}) {
      const double numeric = oracle::integrate_gamma([&](double t) { return oracle::poisson_pmf(y, t * kappa); }, 2.5, 0.7);
      CHECK(std::abs(cond_density(s, p, y, kappa) - numeric) < 1e-10);
    }
  }
  CHECK_THROWS_AS(cond_density(s, p, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(cond_density(s, p, 1.0, -1.0), DomainError);
}

TEST_CASE("logit conditional density is normalized") {
  ModelSpec s = make_spec(FamilyKind::BernoulliLogit, Overdispersion::Independent);
  Params p = default_params(s);
  for (double pi0 : {0.05, 0.5, 0.93, 1.0}) {
    p.pi0 = pi0;
    for (double kappa : {1e-6, 0.2, 0.5, 0.999}) {
      CHECK(cond_density(s, p, 1.0, kappa) + cond_density(s, p, 0.0, kappa) == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(cond_density(s, p, 1.0, kappa) == doctest::Approx(pi0 * kappa).epsilon(1e-13));
    }
  }
}

TEST_CASE("Weibull-gamma tends to the exponential density as alpha grows") {
  ModelSpec s = make_spec(FamilyKind::Weibull, Overdispersion::Independent);
  Params p = default_params(s);
  p.alpha = {1e6};
  p.beta = {1e-6};
  p.rho = 1.0;
  for (double kappa : {0.3, 1.0, 2.0}) {
    for (double y : {0.01, 0.5, 2.0}) {
      const double exact = kappa * std::exp(-kappa * y);
      CHECK(std::abs(cond_density(s, p, y, kappa) - exact) / exact < 1e-4);
    }
  }
}

TEST_CASE("conditional densities match theta integration over a parameter grid") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double a = 0.3 + 4.0 * U(rng);
    const double b = 0.2 + 2.0 * U(rng);
    const double kappa = 0.1 + 3.0 * U(rng);
    {
      ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent);
      s.constraint = GammaConstraint::Unconstrained;
      Params p = default_params(s);
      p.alpha = {a};
      p.beta = {b};
      const double y = std::floor(6.0 * U(rng));
      const double numeric = oracle::integrate_gamma([&](double t) { return oracle::poisson_pmf(y, t * kappa); }, a, b);
      CHECK(std::abs(cond_density(s, p, y, kappa) - numeric) < 1e-8);
    }
    {
      ModelSpec s = make_spec(FamilyKind::Weibull, Overdispersion::Independent);
      s.constraint = GammaConstraint::Unconstrained;
      Params p = default_params(s);
      p.alpha = {a};
      p.beta = {b};
      p.rho = 0.5 + 2.0 * U(rng);
      const double y = 0.05 + 2.0 * U(rng);
      const double numeric = oracle::integrate_gamma([&](double t) { return oracle::weibull_pdf(y, t * kappa, p.rho); }, a, b);
      CHECK(std::abs(cond_density(s, p, y, kappa) - numeric) < 1e-8 * std::max(1.0, numeric));
    }
    for (FamilyKind fam : {FamilyKind::BernoulliLogit, FamilyKind::BernoulliProbit}) {
      ModelSpec s = make_spec(fam, Overdispersion::Independent);
      Params p = default_params(s);
      p.pi0 = a / (a + b);
      const double k = std::min(kappa / 3.2, 0.999);
      for (double y : {0.0, 1.0}) {
        const double numeric = oracle::integrate_beta([&](double t) { return y == 1.0 ? t * k : 1.0 - t * k; }, a, b);
        CHECK(std::abs(cond_density(s, p, y, k) - numeric) < 1e-8);
      }
    }
  }
}

TEST_CASE("shared conditional densities") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Shared);
  Params p = default_params(s);
  p.alpha = {1.7};
  p.beta = {0.6};
  const std::vector<double> y0{0.0, 0.0};
  const std::vector<double> k{0.8, 1.9};
  CHECK(cond_density_shared(s, p, y0, k) == doctest::Approx(std::pow(1.0 / (1.0 + 2.7 * 0.6), 1.7)).epsilon(1e-13));
  const std::vector<double> y{3.0, 1.0};
  const double numeric = oracle::integrate_gamma(
      [&](double t) { return oracle::poisson_pmf(3.0, t * 0.8) * oracle::poisson_pmf(1.0, t * 1.9); }, 1.7, 0.6);
  CHECK(std::abs(cond_density_shared(s, p, y, k) - numeric) < 1e-10);
  CHECK(cond_log_density_shared(s, p, y, k) == doctest::Approx(oracle::shared_nb_log_pmf(y, k, 1.7, 0.6)).epsilon(1e-12));

  ModelSpec ind = s;
  ind.overdispersion = Overdispersion::Independent;
  const std::vector<double> one{2.0};
  const std::vector<double> k1{1.3};
  CHECK(cond_density_shared(s, p, one, k1) == doctest::Approx(cond_density(ind, p, 2.0, 1.3)).epsilon(1e-13));

  ModelSpec bern = make_spec(FamilyKind::BernoulliLogit, Overdispersion::Shared);
  Params pb = default_params(bern);
  const double a = 2.0, b = 3.0;
  pb.pi0 = a / (a + b);
  pb.nu = a + b;
  const std::vector<double> ones{1.0, 1.0};
  const std::vector<double> near_one{1.0 - 1e-15, 1.0 - 1e-15};
  CHECK(cond_density_shared(bern, pb, ones, near_one) ==
        doctest::Approx(a * (a + 1) / ((a + b) * (a + b + 1))).epsilon(1e-12));

  ModelSpec wei = make_spec(FamilyKind::Weibull, Overdispersion::Shared);
  Params pw = default_params(wei);
  pw.alpha = {2.2};
  pw.beta = {0.4};
  pw.rho = 1.4;
  const std::vector<double> yw{0.7, 1.6};
  const double nw = oracle::integrate_gamma(
      [&](double t) { return oracle::weibull_pdf(0.7, t * 0.8, 1.4) * oracle::weibull_pdf(1.6, t * 1.9, 1.4); }, 2.2, 0.4);
  CHECK(std::abs(cond_density_shared(wei, pw, yw, k) - nw) < 1e-10);

  CHECK_THROWS_AS(cond_density_shared(ind, p, y, k), UnsupportedError);
}

TEST_CASE("no random effects needs no quadrature") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent, {});
  Params p = default_params(s);
  p.xi << 0.2, 0.4;
  p.alpha = {1.3};
  p.beta = {1.0 / 1.3};
  const Subject sub = make_subject({0, 2, 5}, time_design(3, 2), Eigen::MatrixXd(3, 0));
  double expect = 0.0;
  for (int j = 0; j < 3; ++j) {
    expect += oracle::nb_log_pmf(sub.y(j), std::exp(sub.X.row(j).dot(p.xi)), 1.3, 1.0 / 1.3);
  }
  CHECK(subject_loglik(s, p, sub) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("normal family uses the exact marginal") {
  for (int q : {1, 2}) {
    ModelSpec s = make_spec(FamilyKind::Normal, Overdispersion::None,
                            q == 1 ? std::vector<std::string>{"intercept"} : std::vector<std::string>{"intercept", "time"});
    Params p = default_params(s);
    p.xi << 1.0, -0.5;
    p.sigma = 0.7;
    if (q == 1) {
      p.D(0, 0) = 1.3;
    } else {
      p.D << 1.3, 0.2, 0.2, 0.4;
    }
    const Eigen::MatrixXd X = time_design(4, 2);
    const Eigen::MatrixXd Z = X.leftCols(q);
    const Subject sub = make_subject({1.2, 0.3, -0.4, 2.0}, X, Z);
    const Eigen::MatrixXd V = Z * p.D * Z.transpose() + 0.49 * Eigen::MatrixXd::Identity(4, 4);
    CHECK(std::abs(subject_loglik(s, p, sub) - oracle::mvn_log_pdf(sub.y, X * p.xi, V)) < 1e-10);
  }
}

TEST_CASE("quadrature agrees with a dense trapezoid rule") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  struct Case {
    FamilyKind family;
    Overdispersion od;
  };
  const Case cases[] = {{FamilyKind::Poisson, Overdispersion::Independent},
                        {FamilyKind::Poisson, Overdispersion::None},
                        {FamilyKind::Weibull, Overdispersion::Independent},
                        {FamilyKind::BernoulliLogit, Overdispersion::Independent},
                        {FamilyKind::BernoulliProbit, Overdispersion::None}};
  for (int i = 0; i < 20; ++i) {
    const Case c = cases[i % 5];
    ModelSpec s = make_spec(c.family, c.od);
    Params p = default_params(s);
    p.xi << -0.3 + 0.8 * U(rng), 0.3 * (U(rng) - 0.5);
    p.D(0, 0) = 0.2 + 1.8 * U(rng);
    if (s.gamma_effects()) {
      p.alpha = {0.5 + 3.0 * U(rng)};
      p.beta = {1.0 / p.alpha[0]};
    }
    p.pi0 = 0.6 + 0.4 * U(rng);
    p.rho = 0.7 + U(rng);
    const int n = 2 + i % 5;
    std::vector<double> y;
    for (int j = 0; j < n; ++j) {
      switch (c.family) {
      case FamilyKind::Poisson: y.push_back(std::floor(5.0 * U(rng))); break;
      case FamilyKind::Weibull: y.push_back(0.1 + 2.0 * U(rng)); break;
      default: y.push_back(U(rng) < 0.5 ? 0.0 : 1.0); break;
      }
    }
    const Eigen::MatrixXd X = time_design(n, 2);
    const Subject sub = make_subject(y, X, X.leftCols(1));
    const double quad = subject_loglik(s, p, sub);
    const double trap = oracle::trapezoid_subject_loglik(oracle_for(s, p), sub, p.xi, p.D);
    CHECK(std::abs(quad - trap) < 1e-8);
  }
}

TEST_CASE("two random effects agree with a tensor trapezoid rule") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent, {"intercept", "time"});
  Params p = default_params(s);
  p.xi << 0.4, 0.1;
  p.D << 0.8, 0.1, 0.1, 0.3;
  p.alpha = {2.0};
  p.beta = {0.5};
  const Eigen::MatrixXd X = time_design(5, 2);
  const Subject sub = make_subject({1, 0, 3, 2, 4}, X, X);
  const double trap = oracle::trapezoid_subject_loglik(oracle_for(s, p), sub, p.xi, p.D, 801, 9.0);
  CHECK(std::abs(subject_loglik(s, p, sub) - trap) < 1e-6);
  QuadratureRule fine;
  fine.order_2d = 25;
  CHECK(std::abs(subject_loglik(s, p, sub, fine) - trap) < 1e-8);
}

TEST_CASE("order 21 and order 41 agree") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent);
  Params p = default_params(s);
  p.xi << 0.5, -0.05;
  p.alpha = {2.0};
  p.beta = {0.5};
  for (double d : {0.3, 1.2, 2.0}) {
    p.D(0, 0) = d;
    const Dataset data = simulated(s, p, 60, 6, 17);
    QuadratureRule q41;
    q41.order = 41;
    const double diff = std::abs(total_loglik(s, p, data) - total_loglik(s, p, data, q41));
    CHECK(diff / 60.0 <= 1e-6);
  }
}

TEST_CASE("degenerate gamma effect reproduces the plain model") {
  ModelSpec plain = make_spec(FamilyKind::Poisson, Overdispersion::None);
  ModelSpec od = plain;
  od.overdispersion = Overdispersion::Independent;
  Params p = default_params(od);
  p.xi << 0.3, 0.05;
  p.D(0, 0) = 0.9;
  p.alpha = {std::numeric_limits<double>::infinity()};
  p.beta = {1.0};
  const Dataset data = simulated(plain, p, 40, 5, 23);
  CHECK(std::abs(total_loglik(plain, p, data) - total_loglik(od, p, data)) <= 1e-12 * std::abs(total_loglik(plain, p, data)));
}

TEST_CASE("zero random-effect variance gives the closed-form marginal") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent);
  Params p = default_params(s);
  p.xi << 0.3, 0.05;
  p.D(0, 0) = 0.0;
  p.alpha = {1.6};
  p.beta = {1.0 / 1.6};
  const Dataset data = simulated(s, p, 30, 4, 29);
  double expect = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    expect += oracle::nb_log_pmf(data.y[r], std::exp(0.3 + 0.05 * data.occasion[r]), 1.6, 1.0 / 1.6);
  }
  CHECK(std::abs(total_loglik(s, p, data) - expect) < 1e-8);
}

TEST_CASE("total log-likelihood structure") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent);
  Params p = default_params(s);
  p.xi << 0.3, 0.05;
  p.D(0, 0) = 0.7;
  p.alpha = {2.0};
  p.beta = {0.5};
  const Dataset data = simulated(s, p, 25, 4, 31);
  const auto subjects = build_designs(s, data);
  const std::vector<Subject> first{subjects[0]};
  CHECK(total_loglik(s, p, first) == subject_loglik(s, p, subjects[0]));

  std::vector<Subject> doubled = subjects;
  for (auto sub : subjects) {
    sub.id += "b";
    doubled.push_back(sub);
  }
  const double base = total_loglik(s, p, subjects);
  CHECK(std::abs(total_loglik(s, p, doubled) - 2.0 * base) <= 1e-12 * std::abs(base));

  std::vector<Subject> shuffled = subjects;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(2));
  CHECK(std::abs(total_loglik(s, p, shuffled) - base) <= 1e-12 * std::abs(base));
  CHECK(total_loglik(s, p, subjects) == base);
}

TEST_CASE("conditional densities sum or integrate to one") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::Independent);
  Params p = default_params(s);
  p.alpha = {1.5};
  p.beta = {0.8};
  double total = 0.0;
  for (int y = 0; y < 2000; ++y) total += cond_density(s, p, y, 1.7);
  CHECK(std::abs(total - 1.0) < 1e-8);

  ModelSpec w = make_spec(FamilyKind::Weibull, Overdispersion::Independent);
  Params pw = default_params(w);
  pw.alpha = {3.0};
  pw.beta = {0.4};
  pw.rho = 1.3;
  boost::math::quadrature::tanh_sinh<double> ts(15);
  boost::math::quadrature::exp_sinh<double> es(15);
  auto f = [&](double y) { return cond_density(w, pw, y, 0.9); };
  CHECK(std::abs(ts.integrate(f, 0.0, 1.0, 1e-14) + es.integrate(f, 1.0, INFINITY, 1e-14) - 1.0) < 1e-8);
}

TEST_CASE("argument errors") {
  ModelSpec s = make_spec(FamilyKind::Poisson, Overdispersion::None, {"intercept", "time", "trt"});
  s.fixed_effects = {"intercept"};
  Params p;
  p.xi = Eigen::VectorXd::Zero(1);
  p.D = Eigen::MatrixXd::Identity(3, 3);
  const Subject sub = make_subject({1.0}, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 3));
  CHECK_THROWS_AS(subject_loglik(s, p, sub), UnsupportedError);
  ModelSpec ok = make_spec(FamilyKind::Poisson, Overdispersion::None, {});
  Params bad = default_params(ok);
  QuadratureRule zero;
  zero.order = 0;
  CHECK_THROWS_AS(total_loglik(ok, bad, std::vector<Subject>{}, zero), DomainError);
  bad.xi = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(total_loglik(ok, bad, std::vector<Subject>{}), ValidationError);
}

}
