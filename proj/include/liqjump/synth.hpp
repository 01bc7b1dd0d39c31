#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "liqjump/ingest.hpp"

namespace liqjump {

enum class WashMode { none, hf_small, whale };

std::string to_string(WashMode mode);
WashMode wash_mode_from_string(const std::string& s);

struct SynthSpec {
  std::uint64_t seed = 1;
  int n_assets = 10;
  int n_days = 400;
  std::int64_t start_ms = 1'704'067'200'000;  // 2024-01-01 00:00 UTC

  // Per-asset lists; a shorter list repeats its last entry.
  std::vector<double> base_price = {100.0};
  std::vector<double> jump_intensity = {0.0};  // expected jumps per day
  std::vector<double> jump_mean = {0.0};       // log-return of a jump

  double minute_volatility = 0.0005;  // log-return sd per minute
  double drift_persistence = 0.0;     // AR(1) coefficient of the daily drift
  double drift_volatility = 0.0;      // innovation sd of the daily drift
  double jump_sd = 0.02;
  double jump_volume_multiple = 50.0;  // trade-rate multiple in a jump minute

  double trade_rate = 4.0;        // clean trades per minute at a quiet minute
  double rate_sensitivity = 1.0;  // rate scales with 1 + sensitivity * |move| / sd
  double size_log_mean = 0.0;     // base quantity is lognormal
  double size_log_sd = 0.3;
  double price_noise = 1e-5;      // relative noise on trades before the minute close

  WashMode wash_mode = WashMode::none;
  double burst_rate = 5.0;              // wash trades per minute at an average move
  double burst_volume_fraction = 0.95;  // expected wash share of total volume
  double burst_exponent = 1.1;          // wash volume grows with |move|^exponent
  double wash_jitter = 1e-5;            // relative price jitter of wash trades
  double whale_rate = 2.0;              // whale trades per day
  double whale_volume_multiple = 500.0; // whale amount over the mean clean minute amount

  void validate() const;
  double asset_value(const std::vector<double>& list, int asset) const;
};

struct WashTruth {
  std::int64_t timestamp_ms = 0;
  double quote_amount = 0.0;
  WashMode mode = WashMode::none;
};

struct SynthDay {
  int asset = 0;
  int day = 0;
  std::int64_t day_start_ms = 0;
  std::vector<TradeTick> ticks;  // timestamp-ordered
  std::vector<WashTruth> wash;
};

// Sequential day generator for one asset; carries price and drift across days.
class AssetGenerator {
 public:
  AssetGenerator(const SynthSpec& spec, int asset);

  // Clean ticks plus injected wash trades for the next day.
  SynthDay next_day();
  int day() const { return day_; }

 private:
  const SynthSpec& spec_;
  int asset_;
  int day_ = 0;
  double log_price_;
  double drift_ = 0.0;
};

// Clean trades only for (asset, day) given the opening log price and daily drift.
std::vector<TradeTick> generate_clean_day(const SynthSpec& spec, int asset, int day,
                                          double open_log_price, double daily_drift,
                                          double* close_log_price = nullptr);

// Adds wash trades to one asset-day. Wash trades never set a minute close.
// Returns the ticks merged in timestamp order; `truth` receives one entry per
// injected trade.
std::vector<TradeTick> inject_wash_trades(std::span<const TradeTick> ticks, const SynthSpec& spec,
                                          int asset, int day, std::int64_t day_start_ms,
                                          std::vector<WashTruth>* truth = nullptr);

std::string asset_name(int asset);
std::string tick_file_name(int asset, int day);

struct SynthOutput {
  std::vector<std::string> files;  // relative to the output directory
  std::size_t ticks = 0;
  std::size_t wash_trades = 0;
};

// Writes <out>/<asset>/<day>.csv tick files and, with wash injection,
// <out>/<asset>/wash_truth.csv. Assets run in parallel up to `threads`.
SynthOutput generate_market(const SynthSpec& spec, const std::string& out_dir, int threads = 1);

void write_wash_truth(std::ostream& out, std::span<const WashTruth> rows, bool header = true);

}  // namespace liqjump
