#include "conmix/special_fns.hpp"

#include "conmix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <math.h>

namespace conmix {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
constexpr double kLogSqrt2Pi = 0.9189385332046727417803297;

} // namespace

double log_gamma(double x) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError("log_gamma: argument must be positive and finite, got " +
                      std::to_string(x));
  }
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

uint128 stirling2(int k, int l) {
  if (k < 0 || l < 0) throw DomainError("stirling2: negative argument");
  if (l > k) throw DomainError("stirling2: l > k");
  if (k > 30) throw OverflowError("stirling2: k > 30 exceeds the exact-integer guard");
  // row-by-row recurrence S(n,j) = j S(n-1,j) + S(n-1,j-1)
  std::vector<uint128> row(static_cast<std::size_t>(k) + 1, 0);
  row[0] = 1;
  for (int n = 1; n <= k; ++n) {
    for (int j = n; j >= 1; --j) {
      row[j] = static_cast<uint128>(j) * row[j] + row[j - 1];
    }
    row[0] = 0;
  }
  return row[l];
}

double stirling2_value(int k, int l) { return static_cast<double>(stirling2(k, l)); }

double std_normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_cdf(double x) {
  if (std::isnan(x)) throw DomainError("std_normal_cdf: NaN argument");
  return 0.5 * std::erfc(-x / kSqrt2);
}

double log_std_normal_cdf(double x) {
  if (x > -30.0) return std::log(std_normal_cdf(x));
  // asymptotic Mills-ratio series in the far lower tail
  const double z2 = 1.0 / (x * x);
  const double series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
  return -0.5 * x * x - kLogSqrt2Pi - std::log(-x) + std::log(series);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("std_normal_quantile: p outside [0,1]");
  }
  // Wichura, AS241
  const double q = p - 0.5;
  double val;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    val = q *
          (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
                67265.770927008700853) * r + 45921.953931549871457) * r +
              13731.693765509461125) * r + 1971.5909503065514427) * r +
            133.14166789178437745) * r + 3.387132872796366608) /
          (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
                39307.89580009271061) * r + 21213.794301586595867) * r +
              5394.1960214247511077) * r + 687.1870074920579083) * r +
            42.313330701600911252) * r + 1.0);
  } else {
    double r = q < 0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      val = (((((((r * 7.7454501427834140764e-4 + .0227238449892691845833) * r +
                  .24178072517745061177) * r + 1.27045825245236838258) * r +
                3.64784832476320460504) * r + 5.7694972214606914055) * r +
              4.6303378461565452959) * r + 1.42343711074968357734) /
            (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                  .0151986665636164571966) * r + .14810397642748007459) * r +
                .68976733498510000455) * r + 1.6763848301838038494) * r +
              2.05319162663775882187) * r + 1.0);
    } else {
      r -= 5.0;
      val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                  .0012426609473880784386) * r + .026532189526576123093) * r +
                .29656057182850489123) * r + 1.7848265399172913358) * r +
              5.4637849111641143699) * r + 6.6579046435011037772) /
            (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                  1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
                .0148753612908506148525) * r + .13692988092273580531) * r +
              .59983220655588793769) * r + 1.0);
    }
    if (q < 0.0) val = -val;
  }
  return val;
}

// ---------------------------------------------------------------------------
// Correlation matrices

CorrelationMatrix::CorrelationMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {
  const auto n = entries_.rows();
  if (n == 0 || entries_.cols() != n) {
    throw DomainError("CorrelationMatrix: matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::fabs(entries_(i, i) - 1.0) > 1e-12) {
      throw DomainError("CorrelationMatrix: diagonal entries must equal 1");
    }
    entries_(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double a = entries_(i, j);
      const double b = entries_(j, i);
      if (!std::isfinite(a) || std::fabs(a - b) > 1e-12) {
        throw DomainError("CorrelationMatrix: matrix must be symmetric and finite");
      }
      if (std::fabs(a) > 1.0 + 1e-12) {
        throw DomainError("CorrelationMatrix: off-diagonal entry outside [-1,1]");
      }
      entries_(j, i) = a;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries_, Eigen::EigenvaluesOnly);
  const double min_ev = eig.eigenvalues().minCoeff();
  if (min_ev < -1e-10) {
    throw DomainError("CorrelationMatrix: matrix is not positive semi-definite (min eigenvalue " +
                      std::to_string(min_ev) + ")");
  }
  rank_deficient_ = min_ev < 1e-10;
}

CorrelationMatrix CorrelationMatrix::from_covariance(const Eigen::MatrixXd& cov) {
  const Eigen::VectorXd sd = cov.diagonal().array().sqrt();
  if ((sd.array() <= 0.0).any() || !sd.allFinite()) {
    throw DomainError("CorrelationMatrix::from_covariance: non-positive variance");
  }
  Eigen::MatrixXd r = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  r.diagonal().setOnes();
  return CorrelationMatrix(0.5 * (r + r.transpose()));
}

// ---------------------------------------------------------------------------
// Quadrature rules

NodeSet gauss_legendre(int order) {
  if (order < 1 || order > 200) throw DomainError("gauss_legendre: order out of range");
  NodeSet rule;
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= order; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = order * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-16) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[order - 1 - i] = z;
    rule.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.weights[order - 1 - i] = rule.weights[i];
  }
  return rule;
}

NodeSet gh_nodes(int order) {
  if (order < 1 || order > 100) {
    throw DomainError("gh_nodes: order must lie in [1, 100], got " + std::to_string(order));
  }
  NodeSet rule;
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);
  const double pim4 = 0.7511255444649425; // pi^(-1/4)
  const int n = order;
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[1];
    } else {
      z = 2.0 * z - rule.nodes[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-15 * std::max(1.0, std::fabs(z))) break;
    }
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  if (n % 2 == 1) rule.nodes[m - 1] = 0.0;
  // ascending order
  std::reverse(rule.nodes.begin(), rule.nodes.end());
  std::reverse(rule.weights.begin(), rule.weights.end());
  return rule;
}

// ---------------------------------------------------------------------------
// Bivariate normal (Drezner-Wesolowsky / Genz)

namespace {

struct GlTables {
  NodeSet g6 = gauss_legendre(6);
  NodeSet g12 = gauss_legendre(12);
  NodeSet g20 = gauss_legendre(20);
};

const GlTables& gl_tables() {
  static const GlTables tables;
  return tables;
}

// P(X > dh, Y > dk) for a standard bivariate normal with correlation r.
double bvn_upper(double dh, double dk, double r) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const auto& t = gl_tables();
  const NodeSet* rule = &t.g20;
  if (std::fabs(r) < 0.3) {
    rule = &t.g6;
  } else if (std::fabs(r) < 0.75) {
    rule = &t.g12;
  }
  double h = dh;
  double k = dk;
  double hk = h * k;
  double bvn = 0.0;
  if (std::fabs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r);
    for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
      const double sn = std::sin(asr * (rule->nodes[i] + 1.0) / 2.0);
      bvn += rule->weights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    // the symmetric rule covers both halves of the Genz double loop
    bvn = bvn * asr / (2.0 * two_pi) + std_normal_cdf(-h) * std_normal_cdf(-k);
    return bvn;
  }
  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::fabs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 16.0;
    double asr = -(bs / as + hk) / 2.0;
    if (asr > -100.0) {
      bvn = a * std::exp(asr) *
            (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
    }
    if (-hk < 100.0) {
      const double b = std::sqrt(bs);
      bvn -= std::exp(-hk / 2.0) * std::sqrt(two_pi) * std_normal_cdf(-b / a) * b *
             (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for (std::size_t i = 0; i < rule->nodes.size(); ++i) {
      const double xs = std::pow(a * (rule->nodes[i] + 1.0), 2);
      const double rs = std::sqrt(1.0 - xs);
      asr = -(bs / xs + hk) / 2.0;
      if (asr > -100.0) {
        bvn += a * rule->weights[i] * std::exp(asr) *
               (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                (1.0 + c * xs * (1.0 + d * xs)));
      }
    }
    bvn = -bvn / two_pi;
  }
  if (r > 0.0) {
    bvn += std_normal_cdf(-std::max(h, k));
  } else {
    bvn = -bvn;
    if (k > h) {
      if (h < 0.0) {
        bvn += std_normal_cdf(k) - std_normal_cdf(h);
      } else {
        bvn += std_normal_cdf(-h) - std_normal_cdf(-k);
      }
    }
  }
  return bvn;
}

} // namespace

double bvn_cdf(double a, double b, double r) {
  if (std::isnan(a) || std::isnan(b) || !(r >= -1.0 && r <= 1.0)) {
    throw DomainError("bvn_cdf: invalid arguments");
  }
  if (a == -std::numeric_limits<double>::infinity() || b == -std::numeric_limits<double>::infinity()) {
    return 0.0;
  }
  if (a == std::numeric_limits<double>::infinity()) return std_normal_cdf(b);
  if (b == std::numeric_limits<double>::infinity()) return std_normal_cdf(a);
  const double p = bvn_upper(-a, -b, r);
  return std::clamp(p, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Multivariate normal, separation of variables with randomized lattice rules

namespace {

struct SovFactor {
  Eigen::MatrixXd chol;      // lower triangular, reordered
  std::vector<double> upper; // reordered limits
};

SovFactor prioritized_cholesky(const Eigen::MatrixXd& sigma, std::vector<double> upper) {
  const int n = static_cast<int>(sigma.rows());
  Eigen::MatrixXd cov = sigma;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    // pick the remaining variable with the smallest conditional probability
    int best = i;
    double best_prob = 2.0;
    for (int j = i; j < n; ++j) {
      double s = 0.0, v = cov(j, j);
      for (int k = 0; k < i; ++k) {
        s += c(j, k) * y[k];
        v -= c(j, k) * c(j, k);
      }
      const double sd = v > 1e-14 ? std::sqrt(v) : 1e-7;
      const double prob = std_normal_cdf((upper[j] - s) / sd);
      if (prob < best_prob) {
        best_prob = prob;
        best = j;
      }
    }
    if (best != i) {
      cov.row(i).swap(cov.row(best));
      cov.col(i).swap(cov.col(best));
      c.row(i).swap(c.row(best));
      std::swap(upper[i], upper[best]);
    }
    double v = cov(i, i);
    for (int k = 0; k < i; ++k) v -= c(i, k) * c(i, k);
    if (v > 1e-12) {
      const double cii = std::sqrt(v);
      c(i, i) = cii;
      for (int l = i + 1; l < n; ++l) {
        double s = cov(l, i);
        for (int k = 0; k < i; ++k) s -= c(i, k) * c(l, k);
        c(l, i) = s / cii;
      }
      double s = 0.0;
      for (int k = 0; k < i; ++k) s += c(i, k) * y[k];
      const double bt = (upper[i] - s) / cii;
      const double pb = std_normal_cdf(bt);
      y[i] = pb > 1e-300 ? -std_normal_pdf(bt) / pb : bt;
    } else {
      c(i, i) = 0.0;
      for (int l = i + 1; l < n; ++l) c(l, i) = 0.0;
      y[i] = 0.0;
    }
  }
  return {c, upper};
}

double sov_integrand(const SovFactor& f, const double* w, std::vector<double>& y) {
  const int n = static_cast<int>(f.upper.size());
  double prob = 1.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < i; ++k) s += f.chol(i, k) * y[k];
    const double cii = f.chol(i, i);
    double e;
    if (cii > 0.0) {
      e = std_normal_cdf((f.upper[i] - s) / cii);
    } else {
      e = s <= f.upper[i] ? 1.0 : 0.0;
    }
    prob *= e;
    if (prob <= 0.0) return 0.0;
    if (i + 1 < n) {
      const double u = std::clamp(w[i] * e, 1e-300, 1.0 - 1e-16);
      y[i] = std_normal_quantile(u);
    }
  }
  return prob;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47};

} // namespace

MvnResult mvn_cdf(std::span<const double> upper, const CorrelationMatrix& corr, double tol,
                  std::uint64_t seed) {
  const int n = corr.dimension();
  if (static_cast<int>(upper.size()) != n) {
    throw DomainError("mvn_cdf: limit vector and correlation matrix dimensions differ");
  }
  if (n > kMvnMaxDimension) {
    throw UnsupportedError("mvn_cdf: dimension " + std::to_string(n) + " exceeds the maximum of " +
                           std::to_string(kMvnMaxDimension));
  }
  if (!(tol > 0.0)) throw DomainError("mvn_cdf: tolerance must be positive");

  // drop +inf limits, short-circuit -inf
  std::vector<int> keep;
  for (int i = 0; i < n; ++i) {
    if (std::isnan(upper[i])) throw DomainError("mvn_cdf: NaN limit");
    if (upper[i] == -std::numeric_limits<double>::infinity()) return {0.0, 0.0};
    if (upper[i] != std::numeric_limits<double>::infinity()) keep.push_back(i);
  }
  const int m = static_cast<int>(keep.size());
  if (m == 0) return {1.0, 0.0};
  if (m == 1) return {std_normal_cdf(upper[keep[0]]), 0.0};
  if (m == 2) {
    return {bvn_cdf(upper[keep[0]], upper[keep[1]], corr(keep[0], keep[1])), 0.0};
  }

  Eigen::MatrixXd sub(m, m);
  std::vector<double> lim(m);
  for (int i = 0; i < m; ++i) {
    lim[i] = upper[keep[i]];
    for (int j = 0; j < m; ++j) sub(i, j) = corr(keep[i], keep[j]);
  }
  const SovFactor factor = prioritized_cholesky(sub, lim);

  const int dim = m - 1;
  std::vector<double> gen(dim);
  for (int i = 0; i < dim; ++i) gen[i] = std::sqrt(static_cast<double>(kPrimes[i]));

  constexpr int kShifts = 12;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<double>> shifts(kShifts, std::vector<double>(dim));
  for (auto& s : shifts) {
    for (auto& v : s) v = unif(rng);
  }

  std::vector<double> sums(kShifts, 0.0);
  std::vector<double> w(dim), wa(dim), y(m);
  long long points = 0;
  long long next = 256;
  constexpr long long kMaxPoints = 1LL << 21;
  MvnResult result;
  while (true) {
    for (int s = 0; s < kShifts; ++s) {
      for (long long k = points + 1; k <= next; ++k) {
        for (int d = 0; d < dim; ++d) {
          double frac = std::fmod(static_cast<double>(k) * gen[d] + shifts[s][d], 1.0);
          frac = std::fabs(2.0 * frac - 1.0); // tent periodization
          w[d] = frac;
          wa[d] = 1.0 - frac;
        }
        sums[s] += 0.5 * (sov_integrand(factor, w.data(), y) + sov_integrand(factor, wa.data(), y));
      }
    }
    points = next;
    double mean = 0.0;
    for (double v : sums) mean += v / static_cast<double>(points);
    mean /= kShifts;
    double var = 0.0;
    for (double v : sums) {
      const double d = v / static_cast<double>(points) - mean;
      var += d * d;
    }
    var /= (kShifts - 1.0) * kShifts;
    result.probability = std::clamp(mean, 0.0, 1.0);
    result.error = 3.0 * std::sqrt(var);
    if (result.error <= tol) break;
    if (points >= kMaxPoints) {
      throw NumericError("mvn_cdf: could not reach tolerance " + std::to_string(tol) +
                         " (error estimate " + std::to_string(result.error) + ")");
    }
    next = points * 2;
  }
  return result;
}

} // namespace conmix
