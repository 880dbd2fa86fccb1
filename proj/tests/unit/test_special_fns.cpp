#include <conmix/errors.hpp>
#include <conmix/special_fns.hpp>

#include "oracles.hpp"

#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

using namespace conmix;

namespace {

// S(k, l) by enumerating restricted growth strings.
std::uint64_t count_partitions(int k, int l) {
  std::uint64_t count = 0;
  std::vector<int> a(static_cast<std::size_t>(k), 0);
  std::function<void(int, int)> rec = [&](int i, int maxv) {
    if (i == k) {
      if (maxv + 1 == l) ++count;
      return;
    }
    for (int v = 0; v <= maxv + 1 && v < l; ++v) {
      a[i] = v;
      rec(i + 1, std::max(maxv, v));
    }
  };
  if (k == 0) return l == 0 ? 1 : 0;
  a[0] = 0;
  rec(1, 0);
  return count;
}

} // namespace

TEST_SUITE("special_fns") {

TEST_CASE("log_gamma at known points") {
  CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(log_gamma(5.0) - std::log(24.0)) < 1e-13);
  CHECK(std::abs(log_gamma(0.5) - 0.5 * std::log(std::numbers::pi)) < 1e-13);
  CHECK_THROWS_AS(log_gamma(0.0), DomainError);
  CHECK_THROWS_AS(log_gamma(-1.5), DomainError);
  CHECK_THROWS_AS(log_gamma(INFINITY), DomainError);
}

TEST_CASE("log_gamma relative accuracy and recurrence") {
  for (double x = 1e-3; x < 1e6; x *= 1.37) {
    const double ref = boost::math::lgamma(x);
    CHECK(std::abs(log_gamma(x) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
  }
  for (double x = 0.5; x <= 100.0; x += 0.173) {
    CHECK(std::abs(log_gamma(x + 1.0) - log_gamma(x) - std::log(x)) < 1e-12 * std::max(1.0, log_gamma(x + 1.0)));
  }
}

TEST_CASE("stirling2 values and errors") {
  CHECK(stirling2(1, 1) == 1);
  CHECK(stirling2(3, 2) == 3);
  CHECK(stirling2(4, 2) == 7);
  CHECK(stirling2(0, 0) == 1);
  CHECK(stirling2(5, 0) == 0);
  CHECK_THROWS_AS(stirling2(2, 3), DomainError);
  CHECK_THROWS_AS(stirling2(31, 2), OverflowError);
  // recurrence oracle up to the guard
  std::vector<std::vector<long double>> S(31, std::vector<long double>(31, 0.0L));
  S[0][0] = 1;
  for (int n = 1; n <= 30; ++n) {
    for (int k = 1; k <= n; ++k) S[n][k] = k * S[n - 1][k] + S[n - 1][k - 1];
  }
  for (int n = 0; n <= 30; ++n) {
    for (int k = 0; k <= n; ++k) {
      CHECK(stirling2_value(n, k) == doctest::Approx(static_cast<double>(S[n][k])).epsilon(1e-15));
    }
  }
}

TEST_CASE("stirling2 matches exhaustive enumeration") {
  for (int k = 0; k <= 8; ++k) {
    for (int l = 0; l <= k; ++l) CHECK(static_cast<std::uint64_t>(stirling2(k, l)) == count_partitions(k, l));
  }
}

TEST_CASE("std_normal_cdf") {
  CHECK(std_normal_cdf(0.0) == 0.5);
  CHECK(std::abs(std_normal_cdf(40.0) - 1.0) < 1e-15);
  CHECK(std_normal_cdf(-40.0) >= 0.0);
  // quadrature of the density
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  const double q = 0.5 + gk.integrate([](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2 * std::numbers::pi); },
                                      0.0, 1.959964, 8, 1e-15);
  CHECK(std::abs(std_normal_cdf(1.959964) - q) < 1e-12);
  CHECK(std::abs(std_normal_cdf(1.959964) - 0.975) < 1e-6);
  double prev = 0.0;
  for (double x = -10; x <= 10; x += 0.01) {
    const double v = std_normal_cdf(x);
    CHECK(v >= prev);
    prev = v;
    CHECK(std::abs(v - oracle::Phi(x)) < 1e-12);
  }
}

TEST_CASE("log_std_normal_cdf in the far tail") {
  // asymptotic series of the Mills ratio
  const double x = -40.0, x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) + 105.0 / (x2 * x2 * x2 * x2);
  const double expect = -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
  CHECK(std::abs(log_std_normal_cdf(x) - expect) < 1e-10);
  CHECK(std::abs(log_std_normal_cdf(1.0) - std::log(oracle::Phi(1.0))) < 1e-14);
}

TEST_CASE("std_normal_quantile inverts the cdf") {
  for (double p = 1e-12; p < 1.0; p = p < 0.5 ? p * 3.1 : 1.0 - (1.0 - p) / 3.1) {
    if (p >= 1.0 - 1e-12) break;
    CHECK(std::abs(std_normal_cdf(std_normal_quantile(p)) - p) < 1e-12 * std::max(1.0, p / (1 - p)));
  }
}

TEST_CASE("correlation matrix validation") {
  Eigen::Matrix2d ok;
  ok << 1, 0.3, 0.3, 1;
  CHECK_NOTHROW(CorrelationMatrix{ok});
  Eigen::Matrix2d diag = ok;
  diag(0, 0) = 2;
  CHECK_THROWS_AS(CorrelationMatrix{diag}, DomainError);
  Eigen::Matrix3d nonpsd;
  nonpsd << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
  CHECK_THROWS_AS(CorrelationMatrix{nonpsd}, DomainError);
  Eigen::Matrix2d singular;
  singular << 1, 1, 1, 1;
  CHECK(CorrelationMatrix{singular}.rank_deficient());
}

TEST_CASE("bivariate orthant formula") {
  for (double r = -0.95; r <= 0.95; r += 0.05) {
    const double expected = 0.25 + std::asin(r) / (2 * std::numbers::pi);
    CHECK(std::abs(bvn_cdf(0.0, 0.0, r) - expected) < 1e-14);
    Eigen::Matrix2d c;
    c << 1, r, r, 1;
    const double up[2] = {0.0, 0.0};
    CHECK(std::abs(mvn_cdf(up, CorrelationMatrix{c}).probability - expected) < 1e-12);
  }
  const double up[2] = {0.0, 0.0};
  CHECK(mvn_cdf(up, CorrelationMatrix{Eigen::Matrix2d::Identity()}).probability == doctest::Approx(0.25));
}

TEST_CASE("bivariate cdf against one-dimensional quadrature") {
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-2.5, 2.5), R(-0.99, 0.99);
  for (int i = 0; i < 50; ++i) {
    const double a = U(rng), b = U(rng), r = R(rng);
    const double s = std::sqrt(1 - r * r);
    const double ref = gk.integrate(
        [&](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi) * oracle::Phi((b - r * x) / s); },
        -40.0, a, 15, 1e-15);
    CHECK(std::abs(bvn_cdf(a, b, r) - ref) < 1e-12);
  }
}

TEST_CASE("trivariate cdf against a dense product rule") {
  Eigen::Matrix3d c;
  c << 1, 0.4, 0.2, 0.4, 1, -0.3, 0.2, -0.3, 1;
  const double up[3] = {0.5, 0.3, -0.2};
  const MvnResult r = mvn_cdf(up, CorrelationMatrix{c}, 1e-7);
  // P = int_{x1 <= u1} phi(x1) P(X2 <= u2, X3 <= u3 | x1) with the bivariate
  // conditional evaluated exactly
  const double s12 = c(0, 1), s13 = c(0, 2);
  const double v2 = 1 - s12 * s12, v3 = 1 - s13 * s13;
  const double rc = (c(1, 2) - s12 * s13) / std::sqrt(v2 * v3);
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  const double ref = gk.integrate(
      [&](double x) {
        return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi) *
               bvn_cdf((up[1] - s12 * x) / std::sqrt(v2), (up[2] - s13 * x) / std::sqrt(v3), rc);
      },
      -40.0, up[0], 15, 1e-14);
  CHECK(std::abs(r.probability - ref) < 1e-5);
  CHECK(r.error <= 1e-7);
}

TEST_CASE("orthant probabilities over all sign patterns sum to one") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> N(0, 1);
  for (int n = 1; n <= 4; ++n) {
    Eigen::MatrixXd A(n, n + 2);
    for (int i = 0; i < A.size(); ++i) A.data()[i] = N(rng);
    const Eigen::MatrixXd cov = A * A.transpose();
    const CorrelationMatrix corr = CorrelationMatrix::from_covariance(cov);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = N(rng);
    double total = 0.0;
    for (int mask = 0; mask < (1 << n); ++mask) {
      // flip the sign of the coordinates in mask
      Eigen::MatrixXd c = corr.entries();
      std::vector<double> u(x);
      for (int i = 0; i < n; ++i) {
        if (mask & (1 << i)) {
          u[i] = -u[i];
          c.row(i) *= -1;
          c.col(i) *= -1;
        }
      }
      total += mvn_cdf(u, CorrelationMatrix{c}, 1e-6).probability;
    }
    CHECK(std::abs(total - 1.0) <= n * 1e-6);
  }
}

TEST_CASE("mvn_cdf is deterministic and guards its dimension") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(6, 6, 0.5);
  c.diagonal().setOnes();
  std::vector<double> up{0.1, -0.2, 0.3, 0.0, 0.5, -0.1};
  const auto a = mvn_cdf(up, CorrelationMatrix{c});
  const auto b = mvn_cdf(up, CorrelationMatrix{c});
  CHECK(a.probability == b.probability);
  // equicorrelated orthant probability: int phi(z) prod Phi((u_i + sqrt(r) z)/sqrt(1-r)) dz
  boost::math::quadrature::gauss_kronrod<double, 61> gk;
  const double ref = gk.integrate(
      [&](double z) {
        double p = std::exp(-0.5 * z * z) / std::sqrt(2 * std::numbers::pi);
        for (double u : up) p *= oracle::Phi((u + std::sqrt(0.5) * z) / std::sqrt(0.5));
        return p;
      },
      -40.0, 40.0, 15, 1e-14);
  CHECK(std::abs(a.probability - ref) < 1e-6);
  Eigen::MatrixXd big = Eigen::MatrixXd::Identity(13, 13);
  std::vector<double> up13(13, 0.0);
  CHECK_THROWS_AS(mvn_cdf(up13, CorrelationMatrix{big}), UnsupportedError);
  std::vector<double> up1{0.7};
  CHECK(mvn_cdf(up1, CorrelationMatrix{Eigen::MatrixXd::Identity(1, 1)}).probability == std_normal_cdf(0.7));
}

TEST_CASE("Gauss-Hermite rules") {
  const NodeSet one = gh_nodes(1);
  CHECK(one.nodes[0] == 0.0);
  CHECK(std::abs(one.weights[0] - std::sqrt(std::numbers::pi)) < 1e-14);
  const NodeSet two = gh_nodes(2);
  CHECK(std::abs(std::abs(two.nodes[0]) - 1.0 / std::sqrt(2.0)) < 1e-14);
  CHECK(std::abs(two.weights[0] - std::sqrt(std::numbers::pi) / 2) < 1e-14);
  CHECK_THROWS_AS(gh_nodes(0), DomainError);
  CHECK_THROWS_AS(gh_nodes(101), DomainError);
  for (int order : {3, 10, 21, 41, 64, 100}) {
    const NodeSet r = gh_nodes(order);
    double sw = 0;
    for (double w : r.weights) sw += w;
    CHECK(std::abs(sw - std::sqrt(std::numbers::pi)) < 1e-12);
    for (int i = 0; i < order; ++i) CHECK(std::abs(r.nodes[i] + r.nodes[order - 1 - i]) < 1e-12);
    // exact moments int x^{2m} e^{-x^2} = Gamma(m + 1/2)
    for (int m = 0; 2 * m <= 2 * order - 1 && m <= 30; ++m) {
      double s = 0;
      for (int i = 0; i < order; ++i) s += r.weights[i] * std::pow(r.nodes[i], 2 * m);
      const double ref = std::tgamma(m + 0.5);
      CHECK(std::abs(s - ref) <= 1e-10 * ref);
    }
  }
  const NodeSet r21 = gh_nodes(21);
  double s = 0;
  for (int i = 0; i < 21; ++i) s += r21.weights[i] * r21.nodes[i] * r21.nodes[i];
  CHECK(std::abs(s - std::sqrt(std::numbers::pi) / 2) < 1e-12);
}

TEST_CASE("Gauss-Legendre integrates polynomials") {
  const NodeSet r = gauss_legendre(20);
  for (int m = 0; m < 40; m += 2) {
    double s = 0;
    for (int i = 0; i < 20; ++i) s += r.weights[i] * std::pow(r.nodes[i], m);
    CHECK(std::abs(s - 2.0 / (m + 1)) < 1e-13);
  }
}

}
