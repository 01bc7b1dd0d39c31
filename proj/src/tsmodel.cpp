#include "liqjump/tsmodel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <thread>

#include <Eigen/Dense>

#include "liqjump/error.hpp"
#include "liqjump/numopt.hpp"
#include "liqjump/rng.hpp"
#include "liqjump/stats.hpp"

namespace liqjump {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr int kMaxState = 5;  // max(p, q + 1) with p, q <= 4
constexpr double kMaxPartial = 0.9999;

using StateMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxState, kMaxState>;
using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxState, 1>;
using LyapMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxState * kMaxState,
                              kMaxState * kMaxState>;
using LyapVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxState * kMaxState, 1>;

struct Standardized {
  std::vector<double> z;
  double center = 0.0;
  double scale = 1.0;
};

Standardized standardize(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::data, "series contains non-finite values");
  }
  Standardized s;
  s.center = stats::mean(x);
  s.scale = stats::sample_std(x);
  if (!(s.scale > 0.0)) throw Error(ErrorKind::numeric, "series has zero variance");
  s.z.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) s.z[i] = (x[i] - s.center) / s.scale;
  return s;
}

// Partial autocorrelations (via tanh) to the coefficients of a stationary
// polynomial 1 - sum c_i B^i (Durbin-Levinson).
void partials_to_coeffs(const double* u, int k, double* out) {
  double work[kMaxState];
  for (int j = 0; j < k; ++j) {
    const double pi = std::tanh(u[j]) * kMaxPartial;
    for (int i = 0; i < j; ++i) work[i] = out[i] - pi * out[j - 1 - i];
    for (int i = 0; i < j; ++i) out[i] = work[i];
    out[j] = pi;
  }
}

// Inverse map; coefficients outside the stationary region are pulled inside.
std::vector<double> coeffs_to_partials(std::span<const double> c) {
  const int k = static_cast<int>(c.size());
  std::vector<double> cur(c.begin(), c.end());
  std::vector<double> u(k, 0.0);
  for (int j = k - 1; j >= 0; --j) {
    const double pi = std::clamp(cur[j], -0.99 * kMaxPartial, 0.99 * kMaxPartial);
    u[j] = std::atanh(pi / kMaxPartial);
    std::vector<double> prev(j);
    for (int i = 0; i < j; ++i) prev[i] = (cur[i] + pi * cur[j - 1 - i]) / (1.0 - pi * pi);
    for (int i = 0; i < j; ++i) cur[i] = prev[i];
  }
  return u;
}

struct ArmaParams {
  double mu = 0.0;
  double ar[kMaxState] = {};
  double ma[kMaxState] = {};  // theta, entering with a minus sign
};

ArmaParams unpack(const Eigen::VectorXd& x, int p, int q) {
  ArmaParams a;
  a.mu = x[0];
  if (p > 0) partials_to_coeffs(x.data() + 1, p, a.ar);
  if (q > 0) partials_to_coeffs(x.data() + 1 + p, q, a.ma);
  return a;
}

// Concentrated conditional-sum-of-squares log-likelihood.
double css_loglik(std::span<const double> z, int p, int q, const ArmaParams& a) {
  const std::size_t n = z.size();
  std::vector<double> e(n, 0.0);
  double ssq = 0.0;
  for (std::size_t t = static_cast<std::size_t>(p); t < n; ++t) {
    double v = z[t] - a.mu;
    for (int i = 1; i <= p; ++i) v -= a.ar[i - 1] * (z[t - i] - a.mu);
    for (int j = 1; j <= q && static_cast<std::size_t>(j) <= t; ++j) v += a.ma[j - 1] * e[t - j];
    e[t] = v;
    ssq += v * v;
  }
  const double m = static_cast<double>(n - static_cast<std::size_t>(p));
  if (!(ssq > 0.0)) return -kInf;
  return -0.5 * m * (kLog2Pi + std::log(ssq / m) + 1.0);
}

// Exact Gaussian log-likelihood by the Kalman filter on the Harvey state-space
// form, innovation variance concentrated out.
double exact_loglik(std::span<const double> z, int p, int q, const ArmaParams& a,
                    double* sigma2_out = nullptr) {
  const int d = std::max(p, q + 1);
  StateMat T = StateMat::Zero(d, d);
  for (int i = 0; i < p; ++i) T(i, 0) = a.ar[i];
  for (int i = 0; i + 1 < d; ++i) T(i, i + 1) = 1.0;
  StateVec R = StateVec::Zero(d);
  R[0] = 1.0;
  for (int j = 1; j <= q; ++j) R[j] = -a.ma[j - 1];
  const StateMat RR = R * R.transpose();

  // Stationary state covariance: vec(P) = (I - T (x) T)^{-1} vec(R R').
  StateMat P(d, d);
  if (p == 0) {
    // Pure MA: P = sum_k T^k RR' T'^k terminates after d steps.
    P = RR;
    StateMat Tk = T;
    for (int k = 1; k < d; ++k) {
      P += Tk * RR * Tk.transpose();
      Tk = Tk * T;
    }
  } else {
    const int dd = d * d;
    LyapMat A = LyapMat::Identity(dd, dd);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) A(i + d * j, k + d * l) -= T(i, k) * T(j, l);
    LyapVec b(dd);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) b[i + d * j] = RR(i, j);
    const LyapVec vp = A.partialPivLu().solve(b);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) P(i, j) = vp[i + d * j];
    P = 0.5 * (P + P.transpose()).eval();
  }
  if (!std::isfinite(P(0, 0)) || !(P(0, 0) > 0.0)) return -kInf;

  StateVec state = StateVec::Zero(d);
  StateVec K(d);
  double F = 0.0;
  bool steady = false;
  double sum_log_f = 0.0;
  double ssq = 0.0;
  const std::size_t n = z.size();
  for (std::size_t t = 0; t < n; ++t) {
    if (!steady) {
      F = P(0, 0);
      if (!(F > 0.0)) return -kInf;
      K = T * P.col(0) / F;
    }
    const double v = (z[t] - a.mu) - state[0];
    sum_log_f += std::log(F);
    ssq += v * v / F;
    state = T * state + K * v;
    if (!steady) {
      StateMat next = T * P * T.transpose() + RR - K * K.transpose() * F;
      steady = (next - P).cwiseAbs().maxCoeff() < 1e-14 * (1.0 + P.cwiseAbs().maxCoeff());
      P = next;
    }
  }
  const double nn = static_cast<double>(n);
  const double sigma2 = ssq / nn;
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) return -kInf;
  if (sigma2_out) *sigma2_out = sigma2;
  return -0.5 * nn * (kLog2Pi + std::log(sigma2) + 1.0) - 0.5 * sum_log_f;
}

Eigen::VectorXd pack_from_fit(const ArmaFit& fit, const Standardized& s) {
  Eigen::VectorXd x(1 + fit.p + fit.q);
  x[0] = (fit.process_mean() - s.center) / s.scale;
  if (!std::isfinite(x[0])) x[0] = 0.0;
  const auto ua = coeffs_to_partials(fit.ar);
  const auto um = coeffs_to_partials(fit.ma);
  for (int i = 0; i < fit.p; ++i) x[1 + i] = ua[i];
  for (int j = 0; j < fit.q; ++j) x[1 + fit.p + j] = um[j];
  return x;
}

ArmaFit finish_fit(std::span<const double> series, const Standardized& s, int p, int q,
                   const ArmaParams& a, bool converged) {
  ArmaFit fit;
  fit.p = p;
  fit.q = q;
  fit.nobs = static_cast<int>(series.size());
  fit.ar.assign(a.ar, a.ar + p);
  fit.ma.assign(a.ma, a.ma + q);
  const double mean = s.center + s.scale * a.mu;
  const double ar_sum = std::accumulate(fit.ar.begin(), fit.ar.end(), 0.0);
  fit.intercept = mean * (1.0 - ar_sum);
  double sigma2_z = 0.0;
  const double ll_z = exact_loglik(s.z, p, q, a, &sigma2_z);
  fit.sigma2 = sigma2_z * s.scale * s.scale;
  fit.loglik = ll_z - static_cast<double>(series.size()) * std::log(s.scale);
  fit.aic = 2.0 * fit.free_parameters() - 2.0 * fit.loglik;
  fit.converged = converged && std::isfinite(fit.loglik);
  fit.residuals = arma_residuals(series, fit.intercept, fit.ar, fit.ma);
  return fit;
}

}  // namespace

double ArmaFit::process_mean() const {
  const double ar_sum = std::accumulate(ar.begin(), ar.end(), 0.0);
  return intercept / (1.0 - ar_sum);
}

AdfResult adf_stationarity(std::span<const double> y, double critical_value) {
  const int n = static_cast<int>(y.size());
  if (n < 30) throw Error(ErrorKind::data, "ADF test needs at least 30 observations");
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); })) {
    throw Error(ErrorKind::numeric, "ADF test on a constant series");
  }
  const int k = static_cast<int>(std::floor(12.0 * std::pow(n / 100.0, 0.25)));
  std::vector<double> dy(n - 1);
  for (int t = 1; t < n; ++t) dy[t - 1] = y[t] - y[t - 1];
  // Rows are dy[t] for t = k .. n-2 with regressors 1, y[t], dy[t-1..t-k].
  const int rows = n - 1 - k;
  const int cols = k + 2;
  if (rows <= cols) throw Error(ErrorKind::data, "ADF regression has too few rows");
  Eigen::MatrixXd X(rows, cols);
  Eigen::VectorXd Y(rows);
  for (int r = 0; r < rows; ++r) {
    const int t = k + r;
    Y[r] = dy[t];
    X(r, 0) = 1.0;
    X(r, 1) = y[t];
    for (int i = 1; i <= k; ++i) X(r, 1 + i) = dy[t - i];
  }
  const Eigen::MatrixXd XtX = X.transpose() * X;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX);
  const Eigen::VectorXd beta = ldlt.solve(X.transpose() * Y);
  const Eigen::VectorXd resid = Y - X * beta;
  const double s2 = resid.squaredNorm() / (rows - cols);
  if (!(s2 > 0.0)) throw Error(ErrorKind::numeric, "ADF regression has zero residual variance");
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(cols, cols)) * s2;
  AdfResult res;
  res.lags = k;
  res.critical_value = critical_value;
  res.statistic = beta[1] / std::sqrt(cov(1, 1));
  res.reject_unit_root = res.statistic < critical_value;
  return res;
}

std::vector<double> arma_residuals(std::span<const double> series, double intercept,
                                   std::span<const double> ar, std::span<const double> ma) {
  const double ar_sum = std::accumulate(ar.begin(), ar.end(), 0.0);
  const double mean = intercept / (1.0 - ar_sum);
  const std::size_t n = series.size();
  std::vector<double> e(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double v = series[t] - intercept;
    for (std::size_t i = 1; i <= ar.size(); ++i) v -= ar[i - 1] * (t >= i ? series[t - i] : mean);
    for (std::size_t j = 1; j <= ma.size() && j <= t; ++j) v += ma[j - 1] * e[t - j];
    e[t] = v;
  }
  return e;
}

ArmaFit fit_arma_order(std::span<const double> series, int p, int q, const ArmaFit* warm_start) {
  if (p < 0 || q < 0 || p > 4 || q > 4) throw Error(ErrorKind::config, "ARMA orders must lie in [0, 4]");
  if (series.size() < static_cast<std::size_t>(kMinArmaObservations)) {
    throw Error(ErrorKind::data, "ARMA fit needs at least 50 observations");
  }
  const Standardized s = standardize(series);
  const double n = static_cast<double>(series.size());

  Eigen::VectorXd x0;
  if (warm_start && warm_start->p == p && warm_start->q == q) {
    x0 = pack_from_fit(*warm_start, s);
  } else {
    numopt::MinimizeOptions css_opts;
    css_opts.grad_tol = 1e-6;
    const auto css = numopt::minimize_bfgs(
        [&](const Eigen::VectorXd& x) { return -css_loglik(s.z, p, q, unpack(x, p, q)) / n; },
        Eigen::VectorXd::Zero(1 + p + q), css_opts);
    x0 = css.x;
  }

  const auto ml = numopt::minimize_bfgs(
      [&](const Eigen::VectorXd& x) { return -exact_loglik(s.z, p, q, unpack(x, p, q)) / n; }, x0);
  if (!std::isfinite(ml.f)) {
    throw Error(ErrorKind::numeric, "ARMA(" + std::to_string(p) + "," + std::to_string(q) +
                                        ") likelihood is not finite");
  }
  return finish_fit(series, s, p, q, unpack(ml.x, p, q), ml.converged);
}

ArmaFit refresh_arma(const ArmaFit& fit, std::span<const double> series) {
  const Standardized s = standardize(series);
  const Eigen::VectorXd x = pack_from_fit(fit, s);
  ArmaFit out = finish_fit(series, s, fit.p, fit.q, unpack(x, fit.p, fit.q), fit.converged);
  // Keep the coefficients bit-identical to the source fit.
  out.intercept = fit.intercept;
  out.ar = fit.ar;
  out.ma = fit.ma;
  out.residuals = arma_residuals(series, out.intercept, out.ar, out.ma);
  return out;
}

std::vector<double> arma_scaled_gradient(std::span<const double> series, const ArmaFit& fit) {
  const Standardized s = standardize(series);
  const double n = static_cast<double>(series.size());
  const Eigen::VectorXd x = pack_from_fit(fit, s);
  const auto g = numopt::numeric_gradient(
      [&](const Eigen::VectorXd& v) { return exact_loglik(s.z, fit.p, fit.q, unpack(v, fit.p, fit.q)) / n; },
      x, 0.0, 1e-5, true);
  return {g.data(), g.data() + g.size()};
}

ArmaSelection fit_arma(std::span<const double> series, int max_p, int max_q) {
  ArmaSelection sel;
  std::optional<ArmaFit> best;
  const auto better = [](const ArmaFit& a, const ArmaFit& b) {
    const double tol = 1e-9 * std::max(1.0, std::fabs(b.aic));
    if (a.aic < b.aic - tol) return true;
    if (a.aic > b.aic + tol) return false;
    if (a.p + a.q != b.p + b.q) return a.p + a.q < b.p + b.q;
    return a.p < b.p;
  };
  for (int p = 0; p <= max_p; ++p) {
    for (int q = 0; q <= max_q; ++q) {
      if (p == 0 && q == 0) continue;
      try {
        ArmaFit fit = fit_arma_order(series, p, q);
        sel.candidates.push_back({p, q, fit.loglik, fit.aic, fit.converged});
        if (!fit.converged) {
          sel.warnings.push_back("ARMA(" + std::to_string(p) + "," + std::to_string(q) +
                                 ") did not converge; skipped");
          continue;
        }
        if (!best || better(fit, *best)) best = std::move(fit);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::data || e.kind() == ErrorKind::config) throw;
        sel.candidates.push_back({p, q, -kInf, kInf, false});
        sel.warnings.push_back(e.what());
      }
    }
  }
  if (!best) throw Error(ErrorKind::numeric, "no ARMA candidate converged");
  sel.best = std::move(*best);
  return sel;
}

double forecast_mean(const ArmaFit& fit, std::span<const double> obs_tail,
                     std::span<const double> resid_tail) {
  if (obs_tail.size() < static_cast<std::size_t>(fit.p) ||
      resid_tail.size() < static_cast<std::size_t>(fit.q)) {
    throw Error(ErrorKind::data, "forecast tail shorter than the model order");
  }
  double mu = fit.intercept;
  for (int i = 1; i <= fit.p; ++i) mu += fit.ar[i - 1] * obs_tail[obs_tail.size() - i];
  for (int j = 1; j <= fit.q; ++j) mu -= fit.ma[j - 1] * resid_tail[resid_tail.size() - j];
  return mu;
}

// ---------------------------------------------------------------------------
// Variance models

std::string to_string(VarianceKind kind) {
  switch (kind) {
    case VarianceKind::garch: return "GARCH";
    case VarianceKind::egarch: return "EGARCH";
    case VarianceKind::constant: return "CONSTANT";
  }
  return "?";
}

int VarianceFit::free_parameters() const {
  switch (kind) {
    case VarianceKind::garch: return 3;
    case VarianceKind::egarch: return 4;
    case VarianceKind::constant: return 1;
  }
  return 0;
}

std::vector<double> garch_variance_path(std::span<const double> e, double omega, double a,
                                        double b, double initial_variance) {
  std::vector<double> s2(e.size());
  double prev = std::max(initial_variance, kVarianceFloor);
  for (std::size_t t = 0; t < e.size(); ++t) {
    if (t > 0) prev = std::max(omega + a * e[t - 1] * e[t - 1] + b * prev, kVarianceFloor);
    s2[t] = prev;
  }
  return s2;
}

std::vector<double> egarch_variance_path(std::span<const double> e, double omega, double a,
                                         double theta, double lambda, double initial_variance) {
  const double lo = std::log(kVarianceFloor);
  constexpr double hi = 700.0;
  std::vector<double> s2(e.size());
  double lv = std::log(std::max(initial_variance, kVarianceFloor));
  for (std::size_t t = 0; t < e.size(); ++t) {
    if (t > 0) {
      const double z = e[t - 1] / std::sqrt(s2[t - 1]);
      lv = omega + theta * z + lambda * (std::fabs(z) - kExpectedAbsNormal) + a * lv;
      lv = std::clamp(lv, lo, hi);
    }
    s2[t] = std::max(std::exp(lv), kVarianceFloor);
  }
  return s2;
}

namespace {

double gaussian_loglik(std::span<const double> e, std::span<const double> s2) {
  double ll = 0.0;
  for (std::size_t t = 0; t < e.size(); ++t) ll -= 0.5 * (kLog2Pi + std::log(s2[t]) + e[t] * e[t] / s2[t]);
  return ll;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct GarchCoefs {
  double omega, a, b;
};

GarchCoefs garch_unpack(const Eigen::VectorXd& x) {
  const double persistence = logistic(x[1]);
  const double a = persistence * logistic(x[2]);
  return {std::exp(x[0]), a, persistence - a};
}

struct EgarchCoefs {
  double omega, a, theta, lambda;
};

EgarchCoefs egarch_unpack(const Eigen::VectorXd& x) {
  return {x[0], std::tanh(x[1]), x[2], x[3]};
}

constexpr std::uint64_t kRestartSeed = 0x6A52C0DEULL;
constexpr int kJitteredRestarts = 2;
constexpr double kRestartJitter = 0.5;

// Base start plus jittered restarts; keeps the best converged optimum.
numopt::MinimizeResult multistart(const numopt::Objective& f, const Eigen::VectorXd& x0,
                                  std::uint64_t stream) {
  Philox rng(kRestartSeed, stream);
  numopt::MinimizeResult best = numopt::minimize_bfgs(f, x0);
  for (int r = 0; r < kJitteredRestarts; ++r) {
    Eigen::VectorXd start = x0;
    for (Eigen::Index i = 0; i < start.size(); ++i) start[i] += kRestartJitter * rng.normal();
    auto res = numopt::minimize_bfgs(f, start);
    const bool take = (res.converged && !best.converged) ||
                      (res.converged == best.converged && res.f < best.f);
    if (take) best = std::move(res);
  }
  return best;
}

double mean_square(std::span<const double> e) {
  double s = 0.0;
  for (double v : e) s += v * v;
  return s / static_cast<double>(e.size());
}

void check_residuals(std::span<const double> e) {
  if (e.size() < static_cast<std::size_t>(kMinArmaObservations)) {
    throw Error(ErrorKind::data, "variance fit needs at least 50 residuals");
  }
  for (double v : e) {
    if (!std::isfinite(v)) throw Error(ErrorKind::data, "residuals contain non-finite values");
  }
}

}  // namespace

VarianceFit fit_garch(std::span<const double> e) {
  check_residuals(e);
  const double var = mean_square(e);
  if (!(var > 0.0)) throw Error(ErrorKind::numeric, "residuals have zero variance");
  const double scale = std::sqrt(var);
  std::vector<double> z(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) z[i] = e[i] / scale;

  const auto objective = [&](const Eigen::VectorXd& x) {
    const auto c = garch_unpack(x);
    return -gaussian_loglik(z, garch_variance_path(z, c.omega, c.a, c.b, 1.0)) /
           static_cast<double>(z.size());
  };
  Eigen::VectorXd x0(3);
  x0 << std::log(0.1), logit(0.95), logit(0.05 / 0.95);
  const auto best = multistart(objective, x0, 1);

  VarianceFit fit;
  fit.kind = VarianceKind::garch;
  const auto c = garch_unpack(best.x);
  fit.omega = c.omega * var;
  fit.a = c.a;
  fit.b = c.b;
  fit.initial_variance = var;
  fit.conditional_variance = garch_variance_path(e, fit.omega, fit.a, fit.b, var);
  fit.loglik = gaussian_loglik(e, fit.conditional_variance);
  fit.aic = 2.0 * fit.free_parameters() - 2.0 * fit.loglik;
  fit.converged = best.converged && std::isfinite(fit.loglik);
  return fit;
}

VarianceFit fit_egarch(std::span<const double> e) {
  check_residuals(e);
  const double var = mean_square(e);
  if (!(var > 0.0)) throw Error(ErrorKind::numeric, "residuals have zero variance");
  const double scale = std::sqrt(var);
  std::vector<double> z(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) z[i] = e[i] / scale;

  const auto objective = [&](const Eigen::VectorXd& x) {
    const auto c = egarch_unpack(x);
    return -gaussian_loglik(z, egarch_variance_path(z, c.omega, c.a, c.theta, c.lambda, 1.0)) /
           static_cast<double>(z.size());
  };
  Eigen::VectorXd x0(4);
  x0 << 0.0, std::atanh(0.9), 0.0, 0.1;
  const auto best = multistart(objective, x0, 2);

  VarianceFit fit;
  fit.kind = VarianceKind::egarch;
  const auto c = egarch_unpack(best.x);
  // Rescale: log s2 in original units is log s2_z + log var.
  fit.omega = c.omega + (1.0 - c.a) * std::log(var);
  fit.a = c.a;
  fit.b = 1.0;
  fit.theta = c.theta;
  fit.lambda = c.lambda;
  fit.initial_variance = var;
  fit.conditional_variance = egarch_variance_path(e, fit.omega, fit.a, fit.theta, fit.lambda, var);
  fit.loglik = gaussian_loglik(e, fit.conditional_variance);
  fit.aic = 2.0 * fit.free_parameters() - 2.0 * fit.loglik;
  fit.converged = best.converged && std::isfinite(fit.loglik);
  return fit;
}

VarianceFit fit_constant_variance(std::span<const double> e) {
  check_residuals(e);
  VarianceFit fit;
  fit.kind = VarianceKind::constant;
  const double var = std::max(stats::sample_variance(e), kVarianceFloor);
  fit.omega = var;
  fit.initial_variance = var;
  fit.conditional_variance.assign(e.size(), var);
  fit.loglik = gaussian_loglik(e, fit.conditional_variance);
  fit.aic = 2.0 * fit.free_parameters() - 2.0 * fit.loglik;
  fit.converged = true;
  return fit;
}

VarianceFit fit_variance(std::span<const double> e) {
  std::optional<VarianceFit> garch;
  std::optional<VarianceFit> egarch;
  try {
    garch = fit_garch(e);
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::data) throw;
  }
  try {
    egarch = fit_egarch(e);
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::data) throw;
  }
  const bool g_ok = garch && garch->converged;
  const bool e_ok = egarch && egarch->converged;
  if (g_ok && (!e_ok || garch->aic <= egarch->aic)) return *garch;
  if (e_ok) return *egarch;
  VarianceFit fallback = fit_constant_variance(e);
  fallback.warning = "GARCH and EGARCH fits failed; constant variance used";
  return fallback;
}

// ---------------------------------------------------------------------------
// Rolling forecasts

namespace {

std::vector<AssetForecast> rolling_for_asset(const std::vector<double>& series,
                                             const RollingOptions& opts) {
  const int n = static_cast<int>(series.size());
  const int rows = n - opts.window;
  std::vector<AssetForecast> out(static_cast<std::size_t>(rows));
  std::optional<ArmaFit> current;
  VarianceKind kind = VarianceKind::constant;
  std::optional<AssetForecast> last_valid;

  for (int k = 0; k < rows; ++k) {
    const int t = opts.window - 1 + k;  // last in-sample day
    const std::span<const double> window(series.data() + (t - opts.window + 1),
                                         static_cast<std::size_t>(opts.window));
    AssetForecast f;
    try {
      const bool select = !current || k % opts.order_refit_every == 0;
      const bool refit = select || k % opts.coef_refit_every == 0;
      if (select) {
        current = fit_arma(window, opts.max_p, opts.max_q).best;
      } else if (refit) {
        current = fit_arma_order(window, current->p, current->q, &*current);
      } else {
        current = refresh_arma(*current, window);
      }
      if (select || k % opts.variance_refit_every == 0) kind = fit_variance(current->residuals).kind;
      f.mu_hat = forecast_mean(*current, window, current->residuals);
      if (!std::isfinite(f.mu_hat)) throw Error(ErrorKind::numeric, "non-finite forecast");
      f.p = current->p;
      f.q = current->q;
      f.variance_kind = kind;
      f.converged = current->converged;
      last_valid = f;
    } catch (const Error&) {
      current.reset();
      if (last_valid) {
        f = *last_valid;
      } else {
        f.mu_hat = stats::mean(window);
      }
      f.converged = false;
      f.carried_forward = true;
    }
    out[static_cast<std::size_t>(k)] = f;
  }
  return out;
}

}  // namespace

std::vector<ForecastRow> rolling_forecasts(const std::vector<std::vector<double>>& series_by_asset,
                                           const RollingOptions& opts) {
  if (series_by_asset.empty()) throw Error(ErrorKind::data, "no series to forecast");
  if (opts.window < kMinArmaObservations) {
    throw Error(ErrorKind::config, "rolling window must be at least 50 days");
  }
  if (opts.order_refit_every < 1 || opts.coef_refit_every < 1 || opts.variance_refit_every < 1) {
    throw Error(ErrorKind::config, "refit cadence must be at least 1");
  }
  const std::size_t len = series_by_asset.front().size();
  for (const auto& s : series_by_asset) {
    if (s.size() != len) throw Error(ErrorKind::data, "series lengths differ across assets");
  }
  if (len < static_cast<std::size_t>(opts.window) + 1) {
    throw Error(ErrorKind::data, "series of length " + std::to_string(len) +
                                     " leaves no out-of-sample day for window " +
                                     std::to_string(opts.window));
  }

  const std::size_t assets = series_by_asset.size();
  std::vector<std::vector<AssetForecast>> per_asset(assets);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < assets; i = next++) {
      per_asset[i] = rolling_for_asset(series_by_asset[i], opts);
    }
  };
  const int threads = std::clamp(opts.threads, 1, static_cast<int>(assets));
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }

  const int rows = static_cast<int>(len) - opts.window;
  std::vector<ForecastRow> out(static_cast<std::size_t>(rows));
  for (int k = 0; k < rows; ++k) {
    out[k].date_index = opts.window + k;
    out[k].entries.resize(assets);
    for (std::size_t i = 0; i < assets; ++i) out[k].entries[i] = per_asset[i][k];
  }
  return out;
}

}  // namespace liqjump
