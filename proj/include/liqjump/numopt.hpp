#pragma once

#include <functional>

#include <Eigen/Dense>

namespace liqjump::numopt {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct MinimizeOptions {
  int max_iterations = 300;
  double grad_tol = 1e-7;       // on the infinity norm of the gradient
  double rel_f_tol = 1e-14;     // stall test on successive objective values
  double fd_step = 1e-6;        // relative finite-difference step
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Finite-difference gradient; forward differences reuse f(x).
Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double fx,
                                 double rel_step, bool central, int* evaluations = nullptr);

// Quasi-Newton (BFGS, inverse-Hessian form) with Armijo backtracking. Starts on
// forward differences and switches to central differences near the optimum.
// Non-finite objective values are treated as +infinity.
MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& opts = {});

}  // namespace liqjump::numopt
