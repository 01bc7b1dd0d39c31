#include "liqjump/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include "liqjump/error.hpp"
#include "liqjump/rng.hpp"

namespace liqjump {

namespace {

enum Purpose : std::uint64_t {
  kDrift = 1,
  kPath = 2,
  kJumps = 3,
  kTrades = 4,
  kWash = 5,
  kWhale = 6,
};

constexpr double kWashSizeSd = 0.5;
constexpr double kWhaleSizeSd = 0.3;

struct MinuteSummary {
  double close = 0.0;
  double amount = 0.0;
  std::int64_t close_ts = 0;
  int trades = 0;
};

std::vector<MinuteSummary> summarize(std::span<const TradeTick> ticks, std::int64_t day_start_ms) {
  std::vector<MinuteSummary> m(kMinutesPerDay);
  for (const auto& t : ticks) {
    const auto idx = (t.timestamp_ms - day_start_ms) / kMillisPerMinute;
    if (idx < 0 || idx >= kMinutesPerDay) throw Error(ErrorKind::data, "tick outside the synthetic day");
    auto& s = m[static_cast<std::size_t>(idx)];
    if (s.trades == 0 || t.timestamp_ms >= s.close_ts) {
      s.close_ts = t.timestamp_ms;
      s.close = t.price;
    }
    s.amount += t.quote_amount;
    ++s.trades;
  }
  return m;
}

// Minutes where a trade can be slipped in before the close.
bool has_room(const MinuteSummary& s, std::int64_t minute_start) {
  return s.trades > 0 && s.close_ts > minute_start;
}

TradeTick make_tick(std::int64_t ts, double price, double amount) {
  TradeTick t;
  t.timestamp_ms = ts;
  t.price = price;
  t.base_qty = amount / price;
  t.quote_amount = t.price * t.base_qty;
  return t;
}

}  // namespace

std::string to_string(WashMode mode) {
  switch (mode) {
    case WashMode::none: return "none";
    case WashMode::hf_small: return "hf_small";
    case WashMode::whale: return "whale";
  }
  return "?";
}

WashMode wash_mode_from_string(const std::string& s) {
  if (s == "none") return WashMode::none;
  if (s == "hf_small") return WashMode::hf_small;
  if (s == "whale") return WashMode::whale;
  throw Error(ErrorKind::config, "unknown wash mode '" + s + "'");
}

double SynthSpec::asset_value(const std::vector<double>& list, int asset) const {
  if (list.empty()) throw Error(ErrorKind::config, "empty per-asset list");
  return list[std::min<std::size_t>(static_cast<std::size_t>(asset), list.size() - 1)];
}

void SynthSpec::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorKind::config, m); };
  if (n_assets < 1) fail("synth needs at least one asset");
  if (n_days < 1) fail("synth needs at least one day");
  if (start_ms % kMillisPerDay != 0) fail("synth start must fall on a UTC midnight");
  if (base_price.empty() || jump_intensity.empty() || jump_mean.empty()) fail("per-asset lists must not be empty");
  for (double p : base_price) {
    if (!(p > 0.0)) fail("base prices must be positive");
  }
  for (double j : jump_intensity) {
    if (!(j >= 0.0)) fail("jump intensity must be non-negative");
  }
  for (double j : jump_mean) {
    if (!std::isfinite(j)) fail("jump mean must be finite");
  }
  if (!(minute_volatility >= 0.0) || !(drift_volatility >= 0.0) || !(jump_sd >= 0.0)) {
    fail("volatilities must be non-negative");
  }
  if (!(std::fabs(drift_persistence) < 1.0)) fail("drift persistence must lie in (-1, 1)");
  if (!(jump_volume_multiple >= 0.0)) fail("jump volume multiple must be non-negative");
  if (!(trade_rate >= 0.0) || !(rate_sensitivity >= 0.0)) fail("trade rates must be non-negative");
  if (!(size_log_sd >= 0.0) || !std::isfinite(size_log_mean)) fail("invalid trade size distribution");
  if (!(price_noise >= 0.0) || !(wash_jitter >= 0.0)) fail("price noise must be non-negative");
  if (!(burst_rate >= 0.0) || !(burst_exponent >= 0.0)) fail("burst parameters must be non-negative");
  if (!(burst_volume_fraction >= 0.0 && burst_volume_fraction < 1.0)) fail("burst volume fraction must lie in [0, 1)");
  if (!(whale_rate >= 0.0) || !(whale_volume_multiple >= 0.0)) fail("whale parameters must be non-negative");
}

std::vector<TradeTick> generate_clean_day(const SynthSpec& spec, int asset, int day,
                                          double open_log_price, double daily_drift,
                                          double* close_log_price) {
  const auto a = static_cast<std::uint64_t>(asset);
  const auto d = static_cast<std::uint64_t>(day);
  const std::int64_t day_start = spec.start_ms + static_cast<std::int64_t>(day) * kMillisPerDay;

  Philox path(spec.seed, stream_id(a, d, kPath));
  std::vector<double> eps(kMinutesPerDay);
  for (double& e : eps) e = path.normal();

  std::vector<double> jump(kMinutesPerDay, 0.0);
  std::vector<std::uint8_t> jumped(kMinutesPerDay, 0);
  Philox jr(spec.seed, stream_id(a, d, kJumps));
  const auto n_jumps = jr.poisson(spec.asset_value(spec.jump_intensity, asset));
  const double jump_mean = spec.asset_value(spec.jump_mean, asset);
  for (std::uint64_t j = 0; j < n_jumps; ++j) {
    const auto m = jr.below(kMinutesPerDay);
    jump[m] += jump_mean + spec.jump_sd * jr.normal();
    jumped[m] = 1;
  }

  Philox tr(spec.seed, stream_id(a, d, kTrades));
  std::vector<TradeTick> ticks;
  ticks.reserve(static_cast<std::size_t>(spec.trade_rate * 2.0 * kMinutesPerDay) + 16);
  std::vector<std::int64_t> offsets;
  double lp = open_log_price;
  const double minute_drift = daily_drift / kMinutesPerDay;
  for (int m = 0; m < kMinutesPerDay; ++m) {
    const double x = minute_drift + spec.minute_volatility * eps[m] + jump[m];
    const double next = lp + x;
    double rate = spec.trade_rate * (1.0 + spec.rate_sensitivity * std::fabs(eps[m]));
    if (jumped[m]) rate *= spec.jump_volume_multiple;
    const auto n = tr.poisson(rate);
    offsets.resize(n);
    for (auto& o : offsets) o = static_cast<std::int64_t>(tr.below(kMillisPerMinute));
    std::sort(offsets.begin(), offsets.end());
    const std::int64_t minute_start = day_start + m * kMillisPerMinute;
    for (std::uint64_t j = 0; j < n; ++j) {
      double price;
      if (j + 1 == n) {
        price = std::exp(next);
      } else {
        const double frac = static_cast<double>(offsets[j]) / kMillisPerMinute;
        price = std::exp(lp + frac * x) * (1.0 + spec.price_noise * tr.normal());
      }
      const double qty = tr.lognormal(spec.size_log_mean, spec.size_log_sd);
      TradeTick t;
      t.timestamp_ms = minute_start + offsets[j];
      t.price = price;
      t.base_qty = qty;
      t.quote_amount = price * qty;
      ticks.push_back(t);
    }
    lp = next;
  }
  if (close_log_price) *close_log_price = lp;
  return ticks;
}

std::vector<TradeTick> inject_wash_trades(std::span<const TradeTick> ticks, const SynthSpec& spec,
                                          int asset, int day, std::int64_t day_start_ms,
                                          std::vector<WashTruth>* truth) {
  std::vector<TradeTick> out(ticks.begin(), ticks.end());
  if (spec.wash_mode == WashMode::none || ticks.empty()) return out;
  const auto minutes = summarize(ticks, day_start_ms);
  double clean_total = 0.0;
  for (const auto& s : minutes) clean_total += s.amount;
  const auto a = static_cast<std::uint64_t>(asset);
  const auto d = static_cast<std::uint64_t>(day);
  std::vector<TradeTick> added;

  if (spec.wash_mode == WashMode::hf_small) {
    const double wash_total = spec.burst_volume_fraction / (1.0 - spec.burst_volume_fraction) * clean_total;
    if (!(wash_total > 0.0) || !(spec.burst_rate > 0.0)) return out;
    // Momentum weights |r_t|^k over traded minutes.
    std::vector<double> weight(kMinutesPerDay, 0.0);
    double prev = ticks.front().price;
    double total_weight = 0.0;
    for (int m = 0; m < kMinutesPerDay; ++m) {
      const auto& s = minutes[m];
      if (s.trades == 0) continue;
      if (has_room(s, day_start_ms + m * kMillisPerMinute)) {
        weight[m] = std::pow(std::fabs(s.close / prev - 1.0), spec.burst_exponent);
        total_weight += weight[m];
      }
      prev = s.close;
    }
    if (!(total_weight > 0.0)) return out;
    // Each minute carries wash volume in proportion to its weight, split
    // across a Poisson number of trades (at least one).
    const double expected_trades = spec.burst_rate * kMinutesPerDay;
    Philox rng(spec.seed, stream_id(a, d, kWash));
    std::vector<double> share;
    for (int m = 0; m < kMinutesPerDay; ++m) {
      if (weight[m] <= 0.0) continue;
      const double minute_total = wash_total * weight[m] / total_weight;
      const auto n = std::max<std::uint64_t>(1, rng.poisson(expected_trades * weight[m] / total_weight));
      share.resize(n);
      double share_sum = 0.0;
      for (double& x : share) share_sum += (x = rng.lognormal(0.0, kWashSizeSd));
      const std::int64_t start = day_start_ms + m * kMillisPerMinute;
      const auto room = static_cast<std::uint64_t>(minutes[m].close_ts - start);
      for (std::uint64_t j = 0; j < n; ++j) {
        const std::int64_t ts = start + static_cast<std::int64_t>(rng.below(room));
        const double price = minutes[m].close * (1.0 + spec.wash_jitter * rng.normal());
        added.push_back(make_tick(ts, price, minute_total * share[j] / share_sum));
      }
    }
  } else {
    if (!(spec.whale_rate > 0.0) || !(spec.whale_volume_multiple > 0.0) || !(clean_total > 0.0)) return out;
    std::vector<int> eligible;
    for (int m = 0; m < kMinutesPerDay; ++m) {
      if (has_room(minutes[m], day_start_ms + m * kMillisPerMinute)) eligible.push_back(m);
    }
    if (eligible.empty()) return out;
    Philox rng(spec.seed, stream_id(a, d, kWhale));
    const double mean_size = spec.whale_volume_multiple * clean_total / kMinutesPerDay;
    const double mu = std::log(mean_size) - 0.5 * kWhaleSizeSd * kWhaleSizeSd;
    const auto n = rng.poisson(spec.whale_rate);
    for (std::uint64_t j = 0; j < n; ++j) {
      const int m = eligible[rng.below(eligible.size())];
      const std::int64_t start = day_start_ms + m * kMillisPerMinute;
      const std::int64_t ts = start + static_cast<std::int64_t>(
                                          rng.below(static_cast<std::uint64_t>(minutes[m].close_ts - start)));
      const double price = minutes[m].close * (1.0 + spec.wash_jitter * rng.normal());
      added.push_back(make_tick(ts, price, rng.lognormal(mu, kWhaleSizeSd)));
    }
  }

  std::stable_sort(added.begin(), added.end(),
                   [](const TradeTick& x, const TradeTick& y) { return x.timestamp_ms < y.timestamp_ms; });
  if (truth) {
    for (const auto& t : added) truth->push_back({t.timestamp_ms, t.quote_amount, spec.wash_mode});
  }
  std::vector<TradeTick> merged;
  merged.reserve(out.size() + added.size());
  std::merge(out.begin(), out.end(), added.begin(), added.end(), std::back_inserter(merged),
             [](const TradeTick& x, const TradeTick& y) { return x.timestamp_ms < y.timestamp_ms; });
  return merged;
}

AssetGenerator::AssetGenerator(const SynthSpec& spec, int asset)
    : spec_(spec), asset_(asset), log_price_(std::log(spec.asset_value(spec.base_price, asset))) {
  spec.validate();
  if (asset < 0 || asset >= spec.n_assets) throw Error(ErrorKind::config, "asset index out of range");
}

SynthDay AssetGenerator::next_day() {
  if (day_ >= spec_.n_days) throw Error(ErrorKind::config, "generator ran past n_days");
  Philox dr(spec_.seed, stream_id(static_cast<std::uint64_t>(asset_), static_cast<std::uint64_t>(day_), kDrift));
  const double phi = spec_.drift_persistence;
  if (day_ == 0) {
    drift_ = spec_.drift_volatility / std::sqrt(1.0 - phi * phi) * dr.normal();
  } else {
    drift_ = phi * drift_ + spec_.drift_volatility * dr.normal();
  }
  SynthDay out;
  out.asset = asset_;
  out.day = day_;
  out.day_start_ms = spec_.start_ms + static_cast<std::int64_t>(day_) * kMillisPerDay;
  double close = 0.0;
  auto clean = generate_clean_day(spec_, asset_, day_, log_price_, drift_, &close);
  log_price_ = close;
  out.ticks = inject_wash_trades(clean, spec_, asset_, day_, out.day_start_ms, &out.wash);
  ++day_;
  return out;
}

std::string asset_name(int asset) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "A%02d", asset);
  return buf;
}

std::string tick_file_name(int asset, int day) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "D%04d.csv", day);
  return asset_name(asset) + "/" + buf;
}

void write_wash_truth(std::ostream& out, std::span<const WashTruth> rows, bool header) {
  if (header) out << "timestamp_ms,quote_amount,mode\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.quote_amount);
    out << r.timestamp_ms << ',' << buf << ',' << to_string(r.mode) << '\n';
  }
}

SynthOutput generate_market(const SynthSpec& spec, const std::string& out_dir, int threads) {
  spec.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory " + out_dir + ": " + ec.message());

  struct AssetResult {
    std::vector<std::string> files;
    std::size_t ticks = 0;
    std::size_t wash = 0;
    std::string error;
  };
  std::vector<AssetResult> results(static_cast<std::size_t>(spec.n_assets));
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int a = next++; a < spec.n_assets; a = next++) {
      auto& res = results[static_cast<std::size_t>(a)];
      try {
        const fs::path dir = fs::path(out_dir) / asset_name(a);
        fs::create_directories(dir);
        AssetGenerator gen(spec, a);
        std::vector<WashTruth> truth;
        for (int d = 0; d < spec.n_days; ++d) {
          SynthDay day = gen.next_day();
          const std::string rel = tick_file_name(a, d);
          std::ofstream f(fs::path(out_dir) / rel, std::ios::binary);
          if (!f) throw Error(ErrorKind::io, "cannot write " + (fs::path(out_dir) / rel).string());
          write_ticks(f, day.ticks);
          if (!f) throw Error(ErrorKind::io, "write failed for " + rel);
          res.files.push_back(rel);
          res.ticks += day.ticks.size();
          res.wash += day.wash.size();
          truth.insert(truth.end(), day.wash.begin(), day.wash.end());
        }
        if (spec.wash_mode != WashMode::none) {
          const std::string rel = asset_name(a) + "/wash_truth.csv";
          std::ofstream f(fs::path(out_dir) / rel, std::ios::binary);
          if (!f) throw Error(ErrorKind::io, "cannot write " + rel);
          write_wash_truth(f, truth);
          res.files.push_back(rel);
        }
      } catch (const std::exception& e) {
        res.error = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < std::clamp(threads, 1, spec.n_assets); ++i) pool.emplace_back(worker);
    worker();
  }
  SynthOutput out;
  for (const auto& r : results) {
    if (!r.error.empty()) throw Error(ErrorKind::io, r.error);
    out.files.insert(out.files.end(), r.files.begin(), r.files.end());
    out.ticks += r.ticks;
    out.wash_trades += r.wash;
  }
  return out;
}

}  // namespace liqjump
