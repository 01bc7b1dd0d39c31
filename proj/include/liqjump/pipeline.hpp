#pragma once

#include <span>
#include <string>
#include <vector>

#include "liqjump/backtest.hpp"
#include "liqjump/ingest.hpp"
#include "liqjump/liquidity.hpp"
#include "liqjump/synth.hpp"
#include "liqjump/tsmodel.hpp"

namespace liqjump {

struct Branches {
  bool untreated = true;
  bool treated = true;
};

struct PipelineOptions {
  LiquidityOptions liquidity;
  TreatmentSpec treatment;
  Branches branches;
  int threads = 1;
};

// Day records per asset; [asset][day]. Minute detail is released.
struct LiquidityPanel {
  std::vector<std::string> assets;
  int n_days = 0;
  std::vector<std::vector<DayLiquidityRecord>> untreated;
  std::vector<std::vector<DayLiquidityRecord>> treated;
  std::vector<std::string> warnings;
};

struct WashAccounting {
  double injected = 0.0;  // quote amount of injected trades
  double removed = 0.0;   // share of it cut by the treatment
};

struct AssetDayResult {
  DayLiquidityRecord untreated;
  DayLiquidityRecord treated;
  std::string warning;
  WashAccounting wash;
};

// Bars -> liquidity records for the requested branches.
AssetDayResult process_day(const DayBars& bars, const PipelineOptions& opts);

// Removed wash volume: each injected trade loses the treatment's reduction of
// its minute.
WashAccounting account_wash(const DayBars& raw, const DayBars& treated, std::span<const WashTruth> wash,
                            std::int64_t day_start_ms);

struct SynthPanel {
  LiquidityPanel panel;
  WashAccounting wash;
};

// Generates the synthetic market in memory and runs ingest and liquidity on it.
SynthPanel synth_panel(const SynthSpec& spec, const PipelineOptions& opts);

// Reads <data_dir>/<asset>/Dxxxx.csv for days [first_day, first_day + n_days).
// day_start_ms is the UTC start of first_day.
LiquidityPanel load_panel(const std::string& data_dir, const std::vector<std::string>& assets,
                          int first_day, int n_days, std::int64_t day_start_ms, const PipelineOptions& opts);

// Daily panel for the backtest; needs both branches.
UniverseData assemble_universe(const LiquidityPanel& panel);

struct AdfReport {
  std::string asset;
  std::string series;
  AdfResult result;
  std::string error;
};

// Stationarity check of each asset's regular and liquidity-adjusted daily series.
std::vector<AdfReport> stationarity_report(const LiquidityPanel& panel);

}  // namespace liqjump
