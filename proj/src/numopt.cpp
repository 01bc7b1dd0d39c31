#include "liqjump/numopt.hpp"

#include <cmath>
#include <limits>

namespace liqjump::numopt {

namespace {

double safe_eval(const Objective& f, const Eigen::VectorXd& x, int& evals) {
  ++evals;
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x, double fx,
                                 double rel_step, bool central, int* evaluations) {
  int evals = 0;
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::fabs(x[i]));
    xp[i] = x[i] + h;
    const double fp = safe_eval(f, xp, evals);
    if (central) {
      xp[i] = x[i] - h;
      const double fm = safe_eval(f, xp, evals);
      g[i] = (fp - fm) / (2.0 * h);
    } else {
      g[i] = (fp - fx) / h;
    }
    xp[i] = x[i];
  }
  if (evaluations) *evaluations += evals;
  return g;
}

MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& opts) {
  const Eigen::Index n = x0.size();
  MinimizeResult res;
  res.x = std::move(x0);
  int evals = 0;
  res.f = safe_eval(f, res.x, evals);
  if (!std::isfinite(res.f)) {
    res.evaluations = evals;
    return res;
  }

  bool central = false;
  // Central differences need a larger step to balance truncation and rounding.
  const double central_step = std::cbrt(opts.fd_step * opts.fd_step) * 0.1;
  auto gradient = [&](const Eigen::VectorXd& x, double fx) {
    return numeric_gradient(f, x, fx, central ? central_step : opts.fd_step, central, &evals);
  };

  Eigen::VectorXd g = gradient(res.x, res.f);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool fresh_h = true;
  int stalls = 0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (!central && gnorm < 1e-3) {
      central = true;
      g = gradient(res.x, res.f);
      continue;
    }
    if (central && gnorm < opts.grad_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd p = -H * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      H.setIdentity();
      fresh_h = true;
      p = -g;
      slope = -g.squaredNorm();
    }
    double alpha = 1.0;
    if (fresh_h) alpha = std::min(1.0, 1.0 / std::max(gnorm, 1e-12));

    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = res.x + alpha * p;
      f_new = safe_eval(f, x_new, evals);
      if (f_new <= res.f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= (std::isfinite(f_new) ? 0.5 : 0.1);
    }
    if (!accepted) {
      if (!central) {
        central = true;
        g = gradient(res.x, res.f);
        H.setIdentity();
        fresh_h = true;
        continue;
      }
      if (!fresh_h) {
        H.setIdentity();
        fresh_h = true;
        continue;
      }
      // No descent possible at the current gradient accuracy.
      res.converged = gnorm < std::sqrt(opts.grad_tol);
      break;
    }

    const Eigen::VectorXd g_new = gradient(x_new, f_new);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh_h) {
        H *= sy / y.squaredNorm();
        fresh_h = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) -
           rho * (Hy * s.transpose() + s * Hy.transpose());
    }

    const double df = std::fabs(res.f - f_new);
    res.x = x_new;
    res.f = f_new;
    g = g_new;
    if (df <= opts.rel_f_tol * (std::fabs(f_new) + 1e-300)) {
      if (central && ++stalls >= 3) {
        res.converged = true;
        break;
      }
    } else {
      stalls = 0;
    }
  }
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  res.evaluations = evals;
  return res;
}

}  // namespace liqjump::numopt
