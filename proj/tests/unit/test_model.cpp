#include <conmix/errors.hpp>
#include <conmix/model.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace conmix;

namespace {

Dataset toy(int subjects, int occasions, std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> pois(2.0);
  std::bernoulli_distribution coin(0.5);
  Dataset d;
  std::vector<double> time, trt;
  for (int i = 0; i < subjects; ++i) {
    const double t = coin(rng) ? 1.0 : 0.0;
    for (int j = 1; j <= occasions; ++j) {
      d.id.push_back(std::to_string(i + 1));
      d.occasion.push_back(j);
      d.y.push_back(pois(rng));
      time.push_back(j);
      trt.push_back(t);
    }
  }
  d.add_column("time", time);
  d.add_column("trt", trt);
  return d;
}

ModelSpec poisson_spec(std::vector<std::string> fixed, std::vector<std::string> random,
                       Overdispersion od = Overdispersion::None) {
  ModelSpec s;
  s.family = FamilyKind::Poisson;
  s.fixed_effects = std::move(fixed);
  s.random_effects = std::move(random);
  s.overdispersion = od;
  return s;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("design matrices") {
  const Dataset d = toy(4, 3);
  const auto subjects = build_designs(poisson_spec({"intercept", "time"}, {"intercept"}), d);
  REQUIRE(subjects.size() == 4);
  CHECK(subjects[0].X.rows() == 3);
  CHECK(subjects[0].X.cols() == 2);
  CHECK(subjects[0].X.col(0).isOnes());
  CHECK(subjects[0].X(2, 1) == 3.0);
  CHECK(subjects[0].Z.cols() == 1);
}

TEST_CASE("interaction columns and arm indicators") {
  Dataset d = toy(6, 4);
  std::vector<double> placebo, treated;
  for (double v : d.covariates[1]) {
    treated.push_back(v);
    placebo.push_back(1.0 - v);
  }
  d.add_column("placebo", placebo);
  d.add_column("treated", treated);
  const ModelSpec s = poisson_spec({"placebo", "placebo:time", "treated", "treated:time"}, {"intercept"});
  const auto subjects = build_designs(s, d);
  CHECK(subjects[0].X.cols() == 4);
  CHECK(subjects[0].Z.cols() == 1);
  for (const auto& sub : subjects) {
    for (int j = 0; j < sub.n(); ++j) {
      CHECK(sub.X(j, 1) == sub.X(j, 0) * sub.occasions[j]);
      CHECK(sub.X(j, 0) + sub.X(j, 2) == 1.0);
    }
  }
  const auto asthma = build_designs(poisson_spec({"intercept", "trt"}, {"intercept"}), d);
  CHECK(asthma[0].X.cols() == 2);
}

TEST_CASE("designs do not depend on input row order") {
  const Dataset d = toy(7, 5);
  Dataset shuffled;
  std::vector<std::size_t> perm(d.rows());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  shuffled.covariate_names = d.covariate_names;
  shuffled.covariates.resize(d.covariates.size());
  for (std::size_t r : perm) {
    shuffled.id.push_back(d.id[r]);
    shuffled.occasion.push_back(d.occasion[r]);
    shuffled.y.push_back(d.y[r]);
    for (std::size_t c = 0; c < d.covariates.size(); ++c) shuffled.covariates[c].push_back(d.covariates[c][r]);
  }
  const ModelSpec s = poisson_spec({"intercept", "time", "trt"}, {"intercept", "time"});
  const auto a = build_designs(s, d);
  const auto b = build_designs(s, shuffled);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].X == b[i].X);
    CHECK(a[i].Z == b[i].Z);
    CHECK(a[i].y == b[i].y);
  }
  CHECK(fingerprint(d) == fingerprint(shuffled));
  CHECK(fingerprint(a) == fingerprint(d));
}

TEST_CASE("numeric ids sort numerically") {
  Dataset d;
  for (const char* id : {"10", "2", "1"}) {
    d.id.push_back(id);
    d.occasion.push_back(1);
    d.y.push_back(0);
  }
  const auto s = build_designs(poisson_spec({"intercept"}, {}), d);
  CHECK(s[0].id == "1");
  CHECK(s[1].id == "2");
  CHECK(s[2].id == "10");
}

TEST_CASE("packing examples") {
  ModelSpec s = poisson_spec({"intercept", "time"}, {"intercept"}, Overdispersion::Independent);
  Params p = default_params(s);
  p.xi << 0.8, -0.01;
  p.D(0, 0) = 1.1568;
  p.alpha = {2.4640};
  p.beta = {1.0 / 2.4640};
  const Eigen::VectorXd v = pack(s, p);
  REQUIRE(v.size() == 4);
  CHECK(v(2) == doctest::Approx(std::log(std::sqrt(1.1568))).epsilon(1e-15));
  CHECK(v(3) == doctest::Approx(std::log(2.4640)).epsilon(1e-15));
  const Params back = unpack(s, v);
  CHECK(std::abs(back.D(0, 0) - 1.1568) < 1e-14);
  CHECK(back.beta[0] == doctest::Approx(0.4059).epsilon(1e-4));
  CHECK(packed_names(s) == std::vector<std::string>{"intercept", "time", "ln_sqrt_d", "ln_alpha"});
  CHECK(natural_names(s) == std::vector<std::string>{"intercept", "time", "d", "alpha", "beta", "var_theta"});

  const ModelSpec glm = poisson_spec({"intercept"}, {});
  CHECK(packed_size(glm) == 1);
  CHECK_THROWS_AS(pack(glm, Params{Eigen::VectorXd::Zero(2), Eigen::MatrixXd(0, 0), {}, {}}), ValidationError);
}

TEST_CASE("packed layouts per constraint and family") {
  ModelSpec s = poisson_spec({"intercept"}, {"intercept", "time"}, Overdispersion::Independent);
  s.constraint = GammaConstraint::Exponential;
  CHECK(packed_names(s) == std::vector<std::string>{"intercept", "ln_L[1,1]", "L[2,1]", "ln_L[2,2]", "ln_beta"});
  s.constraint = GammaConstraint::Unconstrained;
  CHECK(packed_size(s) == 6);
  s.family = FamilyKind::Weibull;
  s.weibull_shape_free = true;
  s.constraint = GammaConstraint::MeanOne;
  s.per_occasion_overdispersion = true;
  s.overdispersion_groups = 3;
  CHECK(packed_names(s).back() == "ln_rho");
  CHECK(packed_size(s) == 1 + 3 + 3 + 1);
  ModelSpec b = s;
  b.family = FamilyKind::BernoulliLogit;
  b.per_occasion_overdispersion = false;
  b.overdispersion = Overdispersion::Shared;
  CHECK(packed_names(b) == std::vector<std::string>{"intercept", "ln_L[1,1]", "L[2,1]", "ln_L[2,2]", "logit_pi0", "ln_nu"});
  ModelSpec n = poisson_spec({"intercept"}, {});
  n.family = FamilyKind::Normal;
  CHECK(packed_names(n).back() == "ln_sigma");
}

TEST_CASE("fixed beta and exponential constraints reconstruct the other shape") {
  ModelSpec s = poisson_spec({"x"}, {}, Overdispersion::Independent);
  s.constraint = GammaConstraint::FixedBeta;
  s.fixed_beta = 0.25;
  Eigen::VectorXd v(2);
  v << 0.1, std::log(3.0);
  Params p = unpack(s, v);
  CHECK(p.beta[0] == 0.25);
  CHECK(p.alpha[0] == doctest::Approx(3.0));
  s.constraint = GammaConstraint::Exponential;
  p = unpack(s, v);
  CHECK(p.alpha[0] == 1.0);
  CHECK(p.beta[0] == doctest::Approx(3.0));
}

TEST_CASE("unpacked D is symmetric positive semi-definite") {
  ModelSpec s = poisson_spec({"intercept"}, {"intercept", "time"});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0, 2);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd v(4);
    for (int k = 0; k < 4; ++k) v(k) = N(rng);
    const Params p = unpack(s, v);
    CHECK((p.D - p.D.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.D);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()));
  }
}

TEST_CASE("psd_factor") {
  Eigen::Matrix2d D;
  D << 2.0, 0.5, 0.5, 1.0;
  const Eigen::MatrixXd L = psd_factor(D);
  CHECK((L * L.transpose() - D).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::Matrix2d singular;
  singular << 1, 1, 1, 1;
  const Eigen::MatrixXd Ls = psd_factor(singular);
  CHECK((Ls * Ls.transpose() - singular).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  CHECK_THROWS_AS(psd_factor(bad), DomainError);
  CHECK(psd_factor(Eigen::MatrixXd::Zero(1, 1))(0, 0) == 0.0);
}

TEST_CASE("validation reports") {
  Dataset d = toy(5, 3);
  CHECK(validate(poisson_spec({"intercept", "time"}, {"intercept"}), d).issues.empty());

  ModelSpec bern = poisson_spec({"intercept"}, {});
  bern.family = FamilyKind::BernoulliLogit;
  Dataset b = d;
  b.y.assign(b.rows(), 0.0);
  b.y[3] = 2.0;
  const auto rb = validate(bern, b);
  CHECK_FALSE(rb.ok());
  CHECK(rb.summary().find("support") != std::string::npos);

  ModelSpec alias = poisson_spec({"intercept"}, {}, Overdispersion::Independent);
  alias.constraint = GammaConstraint::Unconstrained;
  const auto ra = validate(alias, d);
  CHECK(ra.ok());
  REQUIRE(ra.issues.size() == 1);
  CHECK(ra.issues[0].severity == Severity::Warning);
  CHECK(ra.issues[0].message.find("alias") != std::string::npos);

  CHECK_FALSE(validate(poisson_spec({"intercept", "dose"}, {}), d).ok());
  Dataset dup = d;
  dup.occasion[1] = 1;
  CHECK(validate(poisson_spec({"intercept"}, {}), dup).summary().find("duplicate") != std::string::npos);
  CHECK_FALSE(validate(poisson_spec({"intercept"}, {"intercept", "time", "trt"}), d).ok());
  ModelSpec normal_od = poisson_spec({"intercept"}, {}, Overdispersion::Independent);
  normal_od.family = FamilyKind::Normal;
  CHECK_FALSE(validate(normal_od).ok());

  Dataset single = toy(5, 1);
  CHECK_FALSE(validate(poisson_spec({"intercept"}, {}, Overdispersion::Shared), single).ok());
  Dataset nonfinite = d;
  nonfinite.covariates[0][2] = NAN;
  CHECK_FALSE(validate(poisson_spec({"intercept", "time"}, {}), nonfinite).ok());
}

TEST_CASE("natural values") {
  ModelSpec s = poisson_spec({"intercept"}, {}, Overdispersion::Independent);
  s.family = FamilyKind::BernoulliLogit;
  Params p = default_params(s);
  p.pi0 = 0.8;
  const Eigen::VectorXd v = natural_values(s, p);
  CHECK(natural_names(s) == std::vector<std::string>{"intercept", "pi0", "alpha_over_beta", "one_minus_pi0"});
  CHECK(v(2) == doctest::Approx(4.0));
  CHECK(v(3) == doctest::Approx(0.2));
  s.overdispersion = Overdispersion::Shared;
  p.nu = 3.0;
  const Eigen::VectorXd w = natural_values(s, p);
  CHECK(w(3) == doctest::Approx(2.4));
  CHECK(w(5) == doctest::Approx(0.8 * 0.2 / 4.0));
}

}
