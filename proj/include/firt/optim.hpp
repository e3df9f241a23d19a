#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace firt::optim {

// Objective returning f(x); when grad is non-null it must also be filled.
// Returning a non-finite value marks x as infeasible and the line search
// backtracks.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct LbfgsOptions {
  int memory = 8;
  int max_iterations = 500;
  // Converged when the infinity norm of the accepted step falls below
  // step_tolerance * max(1, |x|_inf).
  double step_tolerance = 1e-6;
  // Converged when |g|_inf <= gradient_tolerance * max(1, |f|).
  double gradient_tolerance = 1e-8;
  int max_line_search = 60;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

LbfgsResult minimize_lbfgs(const Objective& objective, const Eigen::VectorXd& x0,
                           const LbfgsOptions& options = {});

// Wraps a value-only function with a central finite-difference gradient.
// The step for coordinate k is h * max(1, |x_k|).
Objective with_central_differences(std::function<double(const Eigen::VectorXd&)> f,
                                   double h = 1e-5);

Eigen::VectorXd central_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-5);

Eigen::MatrixXd central_difference_hessian(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-4);

}  // namespace firt::optim
