#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "liqjump/optimizer.hpp"
#include "liqjump/tsmodel.hpp"

namespace liqjump {

enum class PortfolioKind { equal, market, liquidity_weight, inverse_liquidity_weight, mv_standard, mv_forecast };
enum class TreatmentTag { with, without, none };
enum class ReturnBasis { regular, liquidity_adjusted };

std::string to_string(PortfolioKind kind);
std::string to_string(TreatmentTag tag);
std::string to_string(ReturnBasis basis);

struct PortfolioSpec {
  int id = 0;
  PortfolioKind kind = PortfolioKind::equal;
  TreatmentTag treatment = TreatmentTag::none;
  ReturnBasis basis = ReturnBasis::regular;
};

inline constexpr int kPortfolioCount = 12;

const std::array<PortfolioSpec, kPortfolioCount>& portfolio_catalog();
const PortfolioSpec& portfolio_spec(int id);

// Daily panel for the risky universe; rows are days, columns are assets.
struct UniverseData {
  Eigen::MatrixXd r;                  // regular daily returns
  Eigen::MatrixXd r_adj_treated;      // liquidity-adjusted, amounts treated
  Eigen::MatrixXd r_adj_untreated;
  Eigen::MatrixXd beta_jump_treated;
  Eigen::MatrixXd beta_jump_untreated;
  Eigen::MatrixXd amount;             // raw daily quote amount

  int days() const { return static_cast<int>(r.rows()); }
  int assets() const { return static_cast<int>(r.cols()); }
  void validate() const;
};

// One-step forecasts per return basis; rows cover dates window .. days-1.
struct ForecastSet {
  std::vector<ForecastRow> regular;
  std::vector<ForecastRow> adj_treated;
  std::vector<ForecastRow> adj_untreated;
};

ForecastSet compute_forecasts(const UniverseData& data, const RollingOptions& opts,
                              std::span<const int> portfolios);

struct DayInputs {
  std::span<const double> amount;     // day t, per asset
  std::span<const double> beta_jump;  // day t, per asset
};

struct BenchmarkWeights {
  WeightVector w;      // risky assets only
  bool floored = false;  // a zero beta was replaced in inverse mode
};

inline constexpr double kInverseBetaFloor = 1e-6;

BenchmarkWeights benchmark_weights(const PortfolioSpec& spec, const DayInputs& day);

struct BacktestOptions {
  int window = 365;
  double cap = 0.3;
  double lambda_floor = kLambdaFloor;
  std::vector<int> portfolios = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  bool annualize_volatility = false;
  int threads = 1;
  RollingOptions forecast;  // window is overridden by `window`
};

struct DayDecision {
  WeightVector w;  // index 0 is USDT, then the risky assets
  double volatility = 0.0;
  bool lambda_clamped = false;
  bool beta_floored = false;
  bool used_fallback = false;
  bool forecast_carried = false;
};

// W_t for decision day t; reads only rows <= t of `data` and the forecast row
// dated t + 1.
DayDecision decide_weights(const UniverseData& data, const ForecastSet* forecasts,
                           const PortfolioSpec& spec, int t, const BacktestOptions& opts);

struct PortfolioReport {
  PortfolioSpec spec;
  std::vector<int> date_index;   // realized day t + 1
  std::vector<double> returns;   // r^P_{t+1} on regular returns
  std::vector<double> volatility;  // sqrt(W' Sigma W) on the regular window
  std::vector<WeightVector> weights;
  double max_daily_return = 0.0;
  double max_daily_volatility = 0.0;
  double annual_return = 0.0;
  double annual_volatility = 0.0;
  std::optional<double> sharpe;  // empty when returns have zero dispersion
  int lambda_clamped_days = 0;
  int beta_floored_days = 0;
  int fallback_days = 0;
  int carried_forecast_days = 0;
};

struct BacktestReport {
  int window = 0;
  int out_of_sample_days = 0;
  bool annualized_volatility = false;
  std::vector<PortfolioReport> portfolios;

  const PortfolioReport* find(int id) const;
};

BacktestReport run_backtest(const UniverseData& data, const BacktestOptions& opts = {},
                            const ForecastSet* forecasts = nullptr);

inline constexpr double kDaysPerYear = 365.0;

double sharpe_annualized(std::span<const double> daily_returns);

// Performance summary as JSON text: panels A (max daily return), B (max daily
// volatility) and C (Sharpe ratio), each with the benchmark block and the
// TMV / LAMV grid, plus a flat per-portfolio list.
std::string performance_summary(const BacktestReport& report);

void write_daily_returns(std::ostream& out, const BacktestReport& report, bool header = true);
void write_report_weights(std::ostream& out, const BacktestReport& report, bool header = true);

struct BarrierAudit {
  int days_checked = 0;
  int portfolios_checked = 0;
  int violations = 0;
  double max_abs_difference = 0.0;
};

// Recomputes W_t after perturbing every input of day t + 1 (forecasts are
// rebuilt from the perturbed panel) and compares against the unperturbed
// weights, for decision days first_t .. first_t + days - 1.
BarrierAudit audit_information_barrier(const UniverseData& data, const BacktestOptions& opts,
                                       int first_t, int days, std::uint64_t seed);

}  // namespace liqjump
