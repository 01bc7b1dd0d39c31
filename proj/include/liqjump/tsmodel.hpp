#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace liqjump {

struct AdfResult {
  double statistic = 0.0;
  int lags = 0;
  double critical_value = -2.86;
  bool reject_unit_root = false;
};

inline constexpr double kAdfCritical5pct = -2.86;

// Augmented Dickey-Fuller test with intercept; lag order floor(12 (n/100)^(1/4)).
AdfResult adf_stationarity(std::span<const double> series, double critical_value = kAdfCritical5pct);

// r_t = delta + sum phi_i r_{t-i} - sum theta_j e_{t-j} + e_t
struct ArmaFit {
  int p = 0;
  int q = 0;
  double intercept = 0.0;      // delta
  std::vector<double> ar;      // phi_1..phi_p
  std::vector<double> ma;      // theta_1..theta_q
  double sigma2 = 0.0;         // innovation variance
  double loglik = 0.0;         // exact Gaussian log-likelihood
  double aic = 0.0;
  int nobs = 0;
  bool converged = false;
  std::vector<double> residuals;  // conditional residuals over the sample

  int free_parameters() const { return p + q + 2; }
  double process_mean() const;
};

struct ArmaCandidate {
  int p = 0;
  int q = 0;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
};

struct ArmaSelection {
  ArmaFit best;
  std::vector<ArmaCandidate> candidates;
  std::vector<std::string> warnings;
};

inline constexpr int kMinArmaObservations = 50;

// Exact Gaussian maximum likelihood for one order, started from a
// conditional-sum-of-squares fit (or from `warm_start` when given).
ArmaFit fit_arma_order(std::span<const double> series, int p, int q,
                       const ArmaFit* warm_start = nullptr);

// Coefficient fit held fixed: rebuild the conditional residuals of `fit` on a
// new sample and refresh its likelihood.
ArmaFit refresh_arma(const ArmaFit& fit, std::span<const double> series);

// AIC search over (p, q) in [0, max_p] x [0, max_q] without (0, 0). Ties go to
// the smaller p + q, then the smaller p.
ArmaSelection fit_arma(std::span<const double> series, int max_p = 4, int max_q = 4);

// Gradient of loglik / n with respect to the optimizer's unconstrained
// parameters at the fitted point (central differences).
std::vector<double> arma_scaled_gradient(std::span<const double> series, const ArmaFit& fit);

// Conditional residuals for given coefficients; pre-sample observations sit
// at the process mean and pre-sample residuals at zero.
std::vector<double> arma_residuals(std::span<const double> series, double intercept,
                                   std::span<const double> ar, std::span<const double> ma);

// One-step conditional mean. Tails are ordered oldest to newest and must
// hold at least p observations and q residuals.
double forecast_mean(const ArmaFit& fit, std::span<const double> obs_tail,
                     std::span<const double> resid_tail);

enum class VarianceKind { garch, egarch, constant };

std::string to_string(VarianceKind kind);

inline constexpr double kVarianceFloor = 1e-12;
// E|Z| for a standard normal variable.
inline constexpr double kExpectedAbsNormal = 0.79788456080286535588;  // sqrt(2/pi)

// GARCH(1,1):  s2_t = omega + a e_{t-1}^2 + b s2_{t-1}
// EGARCH(1,1): log s2_t = omega + b g(Z_{t-1}) + a log s2_{t-1},
//              g(Z) = theta Z + lambda (|Z| - E|Z|), b normalized to 1.
struct VarianceFit {
  VarianceKind kind = VarianceKind::constant;
  double omega = 0.0;
  double a = 0.0;
  double b = 0.0;
  double theta = 0.0;
  double lambda = 0.0;
  double initial_variance = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
  std::vector<double> conditional_variance;
  std::string warning;

  int free_parameters() const;
};

VarianceFit fit_garch(std::span<const double> residuals);
VarianceFit fit_egarch(std::span<const double> residuals);
VarianceFit fit_constant_variance(std::span<const double> residuals);

// Lower-AIC of GARCH and EGARCH; constant variance when both fail.
VarianceFit fit_variance(std::span<const double> residuals);

// Conditional variance recursions for given coefficients.
std::vector<double> garch_variance_path(std::span<const double> residuals, double omega, double a,
                                        double b, double initial_variance);
std::vector<double> egarch_variance_path(std::span<const double> residuals, double omega,
                                         double a, double theta, double lambda,
                                         double initial_variance);

struct ArmaGarchFit {
  ArmaFit mean;
  VarianceFit variance;
};

struct RollingOptions {
  int window = 365;
  int order_refit_every = 30;  // rows between AIC order searches
  int coef_refit_every = 1;    // rows between coefficient refits
  int variance_refit_every = 30;  // rows between GARCH/EGARCH family selections
  int max_p = 4;
  int max_q = 4;
  int threads = 1;
};

struct AssetForecast {
  double mu_hat = 0.0;
  int p = 0;
  int q = 0;
  VarianceKind variance_kind = VarianceKind::constant;
  bool converged = false;
  bool carried_forward = false;
};

// Forecast for date_index, fitted on the window ending the day before.
struct ForecastRow {
  int date_index = 0;
  std::vector<AssetForecast> entries;
};

// series_by_asset[i] is asset i's daily series; all of equal length >= window+1.
std::vector<ForecastRow> rolling_forecasts(const std::vector<std::vector<double>>& series_by_asset,
                                           const RollingOptions& opts = {});

}  // namespace liqjump
