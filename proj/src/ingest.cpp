#include "liqjump/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include "liqjump/error.hpp"
#include "liqjump/stats.hpp"

namespace liqjump {

namespace {

constexpr std::size_t kKeptReasons = 8;

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

bool parse_int64(std::string_view s, std::int64_t& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void append_number(std::string& buf, double v) {
  char tmp[64];
  const auto res = std::to_chars(tmp, tmp + sizeof(tmp), v);
  buf.append(tmp, res.ptr);
}

void append_number(std::string& buf, std::int64_t v) {
  char tmp[32];
  const auto res = std::to_chars(tmp, tmp + sizeof(tmp), v);
  buf.append(tmp, res.ptr);
}

}  // namespace

ParseResult parse_ticks(std::istream& in, const TickSchema& schema) {
  if (!in.good()) throw Error(ErrorKind::io, "tick stream is not readable");

  ParseResult result;
  auto reject = [&](std::size_t line_no, const std::string& why) {
    ++result.rejected;
    if (result.reject_reasons.size() < kKeptReasons) {
      result.reject_reasons.push_back("line " + std::to_string(line_no) + ": " + why);
    }
  };

  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, schema.delimiter);

    if (first_content) {
      first_content = false;
      bool header = false;
      if (schema.has_header) {
        header = *schema.has_header;
      } else {
        double probe;
        header = !parse_double(fields.front(), probe);
      }
      if (header) continue;
    }

    ++result.records;
    if (fields.size() != 4) {
      reject(line_no, "expected 4 fields, got " + std::to_string(fields.size()));
      continue;
    }
    TradeTick tick;
    bool ok = true;
    for (std::size_t i = 0; i < 4 && ok; ++i) {
      switch (schema.columns[i]) {
        case TickColumn::timestamp: ok = parse_int64(fields[i], tick.timestamp_ms); break;
        case TickColumn::price: ok = parse_double(fields[i], tick.price); break;
        case TickColumn::qty: ok = parse_double(fields[i], tick.base_qty); break;
        case TickColumn::quote_amount: ok = parse_double(fields[i], tick.quote_amount); break;
      }
    }
    if (!ok) {
      reject(line_no, "unparseable field");
      continue;
    }
    if (!(tick.price > 0.0) || !(tick.base_qty > 0.0) || !(tick.quote_amount > 0.0)) {
      reject(line_no, "non-positive price, quantity or amount");
      continue;
    }
    if (std::fabs(tick.quote_amount - tick.price * tick.base_qty) >
        kReconcileTolerance * tick.quote_amount) {
      reject(line_no, "quote amount does not reconcile with price * qty");
      continue;
    }
    result.ticks.push_back(tick);
  }
  if (in.bad()) throw Error(ErrorKind::io, "error while reading tick stream");

  if (result.records > 0 &&
      static_cast<double>(result.rejected) >
          kMaxRejectFraction * static_cast<double>(result.records)) {
    std::ostringstream msg;
    msg << "rejected " << result.rejected << " of " << result.records << " tick records";
    for (const auto& r : result.reject_reasons) msg << "; " << r;
    throw Error(ErrorKind::data, msg.str());
  }

  const auto by_time = [](const TradeTick& a, const TradeTick& b) {
    return a.timestamp_ms < b.timestamp_ms;
  };
  if (!std::is_sorted(result.ticks.begin(), result.ticks.end(), by_time)) {
    std::stable_sort(result.ticks.begin(), result.ticks.end(), by_time);
    result.reordered = true;
  }
  return result;
}

ParseResult parse_tick_file(const std::string& path, const TickSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open tick file: " + path);
  return parse_ticks(in, schema);
}

void write_ticks(std::ostream& out, std::span<const TradeTick> ticks, bool header) {
  std::string buf;
  buf.reserve(64 * (ticks.size() + 1));
  if (header) buf += "timestamp_ms,price,qty,quote_amount\n";
  for (const auto& t : ticks) {
    append_number(buf, t.timestamp_ms);
    buf += ',';
    append_number(buf, t.price);
    buf += ',';
    append_number(buf, t.base_qty);
    buf += ',';
    append_number(buf, t.quote_amount);
    buf += '\n';
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

double DayBars::total_amount() const {
  double total = 0.0;
  for (const auto& b : bars) total += b.amount;
  return total;
}

double DayBars::last_close() const { return bars.empty() ? 0.0 : bars.back().close_price; }

DayBars build_minute_bars(std::span<const TradeTick> ticks, std::int64_t day_start_ms,
                          std::optional<double> seed_price, int day_index) {
  if (ticks.empty() && !seed_price) {
    throw Error(ErrorKind::data,
                "day " + std::to_string(day_index) + " has no trades and no seed price");
  }
  if (seed_price && !(*seed_price > 0.0)) {
    throw Error(ErrorKind::data, "seed price must be positive");
  }

  DayBars day;
  day.day_index = day_index;
  day.bars.resize(kMinutesPerDay);
  std::vector<double> last_price(kMinutesPerDay, 0.0);
  std::vector<std::int64_t> last_ts(kMinutesPerDay, INT64_MIN);

  for (const auto& t : ticks) {
    const std::int64_t offset = t.timestamp_ms - day_start_ms;
    if (offset < 0 || offset >= kMillisPerDay) {
      throw Error(ErrorKind::data, "tick at " + std::to_string(t.timestamp_ms) +
                                       " lies outside day " + std::to_string(day_index));
    }
    const auto m = static_cast<std::size_t>(offset / kMillisPerMinute);
    auto& bar = day.bars[m];
    bar.amount += t.quote_amount;
    ++bar.trade_count;
    // Latest timestamp wins; equal timestamps keep input order.
    if (t.timestamp_ms >= last_ts[m]) {
      last_ts[m] = t.timestamp_ms;
      last_price[m] = t.price;
    }
  }

  double seed = 0.0;
  if (seed_price) {
    seed = *seed_price;
  } else {
    seed = std::min_element(ticks.begin(), ticks.end(), [](const TradeTick& a, const TradeTick& b) {
             return a.timestamp_ms < b.timestamp_ms;
           })->price;
  }
  // A day without a prior close reports 0 until its first trade.
  double close = seed_price ? seed : 0.0;
  double prev = seed;
  for (int m = 0; m < kMinutesPerDay; ++m) {
    auto& bar = day.bars[static_cast<std::size_t>(m)];
    bar.day_index = day_index;
    bar.minute_index = m;
    if (bar.trade_count > 0) {
      close = last_price[static_cast<std::size_t>(m)];
      bar.r = close / prev - 1.0;
      prev = close;
    } else {
      bar.r = 0.0;
    }
    bar.close_price = close;
  }
  return day;
}

void write_minute_bars(std::ostream& out, std::span<const DayBars> days, bool header) {
  std::string buf;
  if (header) buf += "day_index,minute_index,close,r,amount,trades\n";
  for (const auto& day : days) {
    for (const auto& b : day.bars) {
      append_number(buf, static_cast<std::int64_t>(b.day_index));
      buf += ',';
      append_number(buf, static_cast<std::int64_t>(b.minute_index));
      buf += ',';
      append_number(buf, b.close_price);
      buf += ',';
      append_number(buf, b.r);
      buf += ',';
      append_number(buf, b.amount);
      buf += ',';
      append_number(buf, static_cast<std::int64_t>(b.trade_count));
      buf += '\n';
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void TreatmentSpec::validate() const {
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(q3_multiplier) || !in_unit(q4_multiplier)) {
    throw Error(ErrorKind::config, "treatment multipliers must lie in [0, 1]");
  }
}

TreatmentOutcome apply_wash_treatment(const DayBars& day, const TreatmentSpec& spec) {
  if (day.treated) {
    throw Error(ErrorKind::data,
                "day " + std::to_string(day.day_index) + " has already been treated");
  }
  spec.validate();
  TreatmentOutcome out{day, false, {}};
  if (!spec.enabled) return out;

  std::vector<double> positive;
  positive.reserve(day.bars.size());
  for (const auto& b : day.bars) {
    if (b.amount > 0.0) positive.push_back(b.amount);
  }
  if (positive.size() < static_cast<std::size_t>(kMinPositiveMinutesForTreatment)) {
    out.warning = "day " + std::to_string(day.day_index) + ": only " +
                  std::to_string(positive.size()) +
                  " positive-amount minutes, treatment skipped";
    out.day.treated = true;
    return out;
  }
  std::sort(positive.begin(), positive.end());
  const double p50 = stats::percentile_sorted(positive, 0.50);
  const double p75 = stats::percentile_sorted(positive, 0.75);
  for (auto& b : out.day.bars) {
    if (b.amount > p75) {
      b.amount *= spec.q4_multiplier;
    } else if (b.amount > p50) {
      b.amount *= spec.q3_multiplier;
    }
  }
  out.day.treated = true;
  out.applied = true;
  return out;
}

}  // namespace liqjump
