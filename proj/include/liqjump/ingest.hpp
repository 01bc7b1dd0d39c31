#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace liqjump {

inline constexpr int kMinutesPerDay = 1440;
inline constexpr std::int64_t kMillisPerMinute = 60'000;
inline constexpr std::int64_t kMillisPerDay = kMillisPerMinute * kMinutesPerDay;

// One raw exchange trade.
struct TradeTick {
  std::int64_t timestamp_ms = 0;  // UTC epoch milliseconds
  double price = 0.0;             // quote per base unit
  double base_qty = 0.0;
  double quote_amount = 0.0;      // price * base_qty, in quote currency

  friend bool operator==(const TradeTick&, const TradeTick&) = default;
};

enum class TickColumn { timestamp, price, qty, quote_amount };

// Column order and header flag of a tick file.
struct TickSchema {
  std::array<TickColumn, 4> columns{TickColumn::timestamp, TickColumn::price, TickColumn::qty,
                                    TickColumn::quote_amount};
  // nullopt: detect a header by a non-numeric first field.
  std::optional<bool> has_header;
  char delimiter = ',';
};

struct ParseResult {
  std::vector<TradeTick> ticks;
  std::size_t records = 0;   // data lines seen, header excluded
  std::size_t rejected = 0;
  std::vector<std::string> reject_reasons;  // first few, for the summary
  bool reordered = false;    // input was not timestamp-ordered
};

// Reject threshold: more than this fraction of bad lines is fatal.
inline constexpr double kMaxRejectFraction = 0.01;
// Relative tolerance on quote_amount versus price * base_qty.
inline constexpr double kReconcileTolerance = 1e-6;

ParseResult parse_ticks(std::istream& in, const TickSchema& schema = {});
ParseResult parse_tick_file(const std::string& path, const TickSchema& schema = {});

// Writes ticks in the canonical `timestamp_ms,price,qty,quote_amount` layout
// with shortest round-trip number formatting.
void write_ticks(std::ostream& out, std::span<const TradeTick> ticks, bool header = true);

struct MinuteBar {
  int day_index = 0;
  int minute_index = 0;
  double close_price = 0.0;
  double r = 0.0;       // simple return against the previous close
  double amount = 0.0;  // traded quote amount A_t
  int trade_count = 0;
};

// One asset-day: exactly kMinutesPerDay bars.
struct DayBars {
  int day_index = 0;
  std::vector<MinuteBar> bars;
  bool treated = false;

  double total_amount() const;
  double last_close() const;
};

// Aggregates one day of ticks into minute bars. Every tick must lie in
// [day_start_ms, day_start_ms + 24h). seed_price is the prior close; when
// absent the first trade's price seeds the first return.
DayBars build_minute_bars(std::span<const TradeTick> ticks, std::int64_t day_start_ms,
                          std::optional<double> seed_price, int day_index = 0);

void write_minute_bars(std::ostream& out, std::span<const DayBars> days, bool header = true);

// Quantile-based reduction of minute amounts. Multipliers apply to minutes in
// (P50, P75] and above P75 of the day's positive amounts.
struct TreatmentSpec {
  double q3_multiplier = 0.5;
  double q4_multiplier = 0.25;
  bool enabled = true;

  // "Reduce by 50% / 75%" read as a reduction of that size (the default).
  static TreatmentSpec reduction_of() { return {0.5, 0.25, true}; }
  // Complementary reading: Q4 keeps 75% of its amount.
  static TreatmentSpec reduction_to() { return {0.5, 0.75, true}; }

  void validate() const;
};

struct TreatmentOutcome {
  DayBars day;
  bool applied = false;
  std::string warning;  // set when the day had too few positive minutes
};

inline constexpr int kMinPositiveMinutesForTreatment = 4;

// Throws if the day has already been treated.
TreatmentOutcome apply_wash_treatment(const DayBars& day, const TreatmentSpec& spec);

}  // namespace liqjump
