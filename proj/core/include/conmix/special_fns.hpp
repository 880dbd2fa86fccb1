#ifndef CONMIX_SPECIAL_FNS_HPP
#define CONMIX_SPECIAL_FNS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace conmix {

__extension__ using uint128 = unsigned __int128;

double log_gamma(double x);

/// Stirling number of the second kind S(k, l), exact for k <= 30.
uint128 stirling2(int k, int l);
double stirling2_value(int k, int l);

double std_normal_pdf(double x);
double std_normal_cdf(double x);
/// log Phi(x), accurate far into the lower tail.
double log_std_normal_cdf(double x);
/// Inverse of the standard normal CDF for p in (0,1).
double std_normal_quantile(double p);

/// Symmetric PSD matrix with unit diagonal. Construction validates the
/// invariants and throws DomainError otherwise.
class CorrelationMatrix {
public:
  explicit CorrelationMatrix(Eigen::MatrixXd entries);

  /// Rescales a covariance matrix to correlation form.
  static CorrelationMatrix from_covariance(const Eigen::MatrixXd& cov);

  int dimension() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }
  bool rank_deficient() const { return rank_deficient_; }

private:
  Eigen::MatrixXd entries_;
  bool rank_deficient_ = false;
};

struct MvnResult {
  double probability = 0.0;
  double error = 0.0;
};

inline constexpr int kMvnMaxDimension = 12;
inline constexpr std::uint64_t kMvnDefaultSeed = 0x6d766e63646621ULL;

/// Bivariate normal orthant probability P(X <= a, Y <= b) with correlation r.
double bvn_cdf(double a, double b, double r);

/// P(X <= upper) for X ~ N(0, corr). Dimensions 1 and 2 are exact;
/// higher dimensions use randomized lattice rules over the
/// separation-of-variables transform.
MvnResult mvn_cdf(std::span<const double> upper, const CorrelationMatrix& corr,
                  double tol = 1e-6, std::uint64_t seed = kMvnDefaultSeed);

struct NodeSet {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule for the weight exp(-x^2), 1 <= order <= 100.
NodeSet gh_nodes(int order);

/// Gauss-Legendre rule on [-1, 1].
NodeSet gauss_legendre(int order);

} // namespace conmix

#endif
