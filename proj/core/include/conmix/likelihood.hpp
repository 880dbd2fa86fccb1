#ifndef CONMIX_LIKELIHOOD_HPP
#define CONMIX_LIKELIHOOD_HPP

#include "conmix/model.hpp"

#include <span>
#include <vector>

namespace conmix {

struct QuadratureRule {
  int order = 21;    // nodes for a single random effect
  int order_2d = 13; // nodes per dimension when q = 2
  bool adaptive = true;
};

/// f(y | b) with any conjugate effect integrated out, as a function of the
/// mean-scale predictor kappa = g(x'xi + z'b). For the normal family kappa
/// is the conditional mean. `group` selects the overdispersion group.
double cond_density(const ModelSpec& spec, const Params& params, double y, double kappa,
                    int group = 0);
double cond_log_density(const ModelSpec& spec, const Params& params, double y, double kappa,
                        int group = 0);

/// Joint f(y_i | b_i) when one effect is shared by all occasions of a subject.
double cond_density_shared(const ModelSpec& spec, const Params& params, std::span<const double> y,
                           std::span<const double> kappa);
double cond_log_density_shared(const ModelSpec& spec, const Params& params,
                               std::span<const double> y, std::span<const double> kappa);

/// Same as cond_log_density but on the linear-predictor scale, which avoids
/// round-off when kappa saturates.
double cond_log_density_eta(const ModelSpec& spec, const Params& params, double y, double eta,
                            int group = 0);

/// log of the integral over b of prod_j f(y_ij | b) phi(b; 0, D).
double subject_loglik(const ModelSpec& spec, const Params& params, const Subject& subject,
                      const QuadratureRule& quad = {});

/// Sum of subject contributions, reduced in subject order with compensated
/// summation; repeated calls are bit-identical whatever the thread count.
double total_loglik(const ModelSpec& spec, const Params& params,
                    const std::vector<Subject>& subjects, const QuadratureRule& quad = {});
double total_loglik(const ModelSpec& spec, const Params& params, const Dataset& data,
                    const QuadratureRule& quad = {});

/// Per-subject contributions in subject order.
std::vector<double> subject_logliks(const ModelSpec& spec, const Params& params,
                                    const std::vector<Subject>& subjects,
                                    const QuadratureRule& quad = {});

/// Inverse link mapping eta to kappa for a family.
double inverse_link(FamilyKind family, double eta);
double link(FamilyKind family, double kappa);

} // namespace conmix

#endif
