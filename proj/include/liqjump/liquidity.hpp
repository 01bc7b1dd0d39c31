#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "liqjump/ingest.hpp"

namespace liqjump {

enum class DailyAggregation {
  first_order_sum,  // r_TT = sum of minute returns
  compounded,       // r_TT = prod(1 + r_t) - 1
};

struct LiquidityOptions {
  double cap = 10.0;
  DailyAggregation aggregation = DailyAggregation::first_order_sum;
};

// Per asset-day liquidity measures. Minute vectors are populated by
// minute_liquidity() and may be released once the daily fields are final.
struct DayLiquidityRecord {
  int day_index = 0;
  double eta = 1.0;
  std::vector<double> r;              // observed minute returns
  std::vector<double> r_adj;          // liquidity-adjusted minute returns
  std::vector<double> beta_minute;    // minute liquidity premium beta
  std::vector<double> premium_ratio;  // (|r|/mean|r|) / (A/mean A); 0 when not contributing
  std::vector<std::uint8_t> contributing;
  int contributing_count = 0;
  bool degenerate = false;  // no contributing minute
  double amount_daily = 0.0;

  double r_daily = 0.0;
  double r_daily_adj = 0.0;
  double sigma_daily = 0.0;
  double sigma_daily_adj = 0.0;
  double beta_jump = 1.0;
  double beta_diff = 1.0;

  void release_minute_detail();
};

// Minute-level measures on an arbitrary-length intraday series. A minute
// contributes when it traded, moved and carried positive amount; others keep
// r_adj = r and beta = 1.
DayLiquidityRecord minute_liquidity(std::span<const double> r, std::span<const double> amount,
                                    std::span<const int> trade_count, int day_index = 0);
DayLiquidityRecord minute_liquidity(const DayBars& day);

DayLiquidityRecord daily_aggregate(DayLiquidityRecord record,
                                   DailyAggregation aggregation = DailyAggregation::first_order_sum);

struct DailyBetas {
  double jump = 1.0;
  double diffusion = 1.0;
};

// Capped ratios; 0/0 gives 1 and x/0 gives the cap.
DailyBetas daily_betas(const DayLiquidityRecord& record, double cap = 10.0);
double capped_ratio(double numerator, double denominator, double cap);

// minute_liquidity -> daily_aggregate -> daily_betas.
DayLiquidityRecord compute_day(const DayBars& day, const LiquidityOptions& opts = {});

struct ExtremeThresholds {
  double jump = 4.0;
  double diffusion = 2.5;
};

struct ExtremeFlags {
  bool extreme_jump = false;
  bool extreme_diffusion = false;
};

ExtremeFlags classify_extreme(const DayLiquidityRecord& record, const ExtremeThresholds& t = {});

enum class BetaKind { jump, diffusion };

struct BetaStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
  double max = 0.0;
  std::size_t days_at_max = 0;
  double pct_days_at_max = 0.0;
  double weight_in_beta = 0.0;  // percent of the beta total carried by capped days
  std::size_t days_ge_mean = 0;
  double pct_days_ge_mean = 0.0;
  std::size_t days_ge_1 = 0;
  double pct_days_ge_1 = 0.0;
  std::size_t days_le_0_1 = 0;
  double pct_days_le_0_1 = 0.0;
};

BetaStats beta_stats(std::span<const double> betas, double cap = 10.0);
BetaStats beta_stats(std::span<const DayLiquidityRecord> records, BetaKind which, double cap = 10.0);

// Table rows in display order, labels as printed in the descriptive tables.
std::vector<std::pair<std::string, double>> beta_stats_rows(const BetaStats& s);

// One row per day behind the scatter and histogram figures.
struct BetaRow {
  int day = 0;
  double r_daily = 0.0;
  double r_daily_adj = 0.0;
  double sigma_daily = 0.0;
  double sigma_daily_adj = 0.0;
  double beta_jump = 0.0;
  double beta_diff = 0.0;
};

std::vector<BetaRow> export_beta_rows(std::span<const DayLiquidityRecord> records);
void write_beta_rows(std::ostream& out, std::span<const BetaRow> rows, bool header = true);
std::vector<BetaRow> read_beta_rows(std::istream& in);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

// Fixed-width bins over [0, cap]; the last bin is closed so capped days land in it.
std::vector<HistogramBin> beta_histogram(std::span<const double> betas, double bin_width = 0.5,
                                         double cap = 10.0);

}  // namespace liqjump
