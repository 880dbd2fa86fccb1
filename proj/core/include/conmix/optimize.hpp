#ifndef CONMIX_OPTIMIZE_HPP
#define CONMIX_OPTIMIZE_HPP

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace conmix {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Central differences with step rel*(1+|x_i|).
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double rel = 1e-5);
Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, double rel = 1e-4);

struct OptimizerOptions {
  int max_iter = 500;
  double tol = 1e-6; // on the infinity norm of the gradient
  double max_step = 10.0;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace; // objective after each accepted iteration
  std::string message;
};

/// Quasi-Newton (BFGS) maximization with numerical gradients and a
/// backtracking line search with cubic interpolation. Every accepted step
/// satisfies the Armijo condition, so `trace` never decreases.
OptimizerResult bfgs_maximize(const Objective& f, const Eigen::VectorXd& x0,
                              const OptimizerOptions& opts = {});

} // namespace conmix

#endif
