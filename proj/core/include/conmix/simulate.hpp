#ifndef CONMIX_SIMULATE_HPP
#define CONMIX_SIMULATE_HPP

#include "conmix/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace conmix {

struct CovariateGenerator {
  enum class Kind {
    Constant,  // `value` on every row
    Time,      // the occasion number
    Bernoulli, // one Bernoulli(`value`) draw per subject
    Column     // `column`, row-aligned with the output and recycled
  };
  std::string name;
  Kind kind = Kind::Constant;
  double value = 0.0;
  std::vector<double> column;

  static CovariateGenerator constant(std::string name, double v) { return {std::move(name), Kind::Constant, v, {}}; }
  static CovariateGenerator time(std::string name) { return {std::move(name), Kind::Time, 0.0, {}}; }
  static CovariateGenerator bernoulli(std::string name, double p) { return {std::move(name), Kind::Bernoulli, p, {}}; }
  static CovariateGenerator from_column(std::string name, std::vector<double> values) {
    return {std::move(name), Kind::Column, 0.0, std::move(values)};
  }
};

struct SimDesign {
  int subjects = 100;
  int occasions = 1;
  std::vector<int> schedule; // explicit occasion numbers; overrides `occasions`
  std::vector<CovariateGenerator> covariates;
  std::uint64_t seed = 1;

  std::vector<int> occasion_numbers() const;
};

/// Draws b ~ N(0, D) per subject, the conjugate effects per the
/// overdispersion structure, then y from the conditional family. Each
/// subject has its own stream split from the seed, so the output does not
/// depend on the number of threads.
Dataset simulate(const ModelSpec& spec, const Params& params, const SimDesign& design);

/// 64-bit stream seed for subject `index`.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

} // namespace conmix

#endif
