#include "liqjump/liquidity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "liqjump/error.hpp"
#include "liqjump/stats.hpp"

namespace liqjump {

void DayLiquidityRecord::release_minute_detail() {
  for (auto* v : {&r, &r_adj, &beta_minute, &premium_ratio}) {
    v->clear();
    v->shrink_to_fit();
  }
  contributing.clear();
  contributing.shrink_to_fit();
}

DayLiquidityRecord minute_liquidity(std::span<const double> r, std::span<const double> amount,
                                    std::span<const int> trade_count, int day_index) {
  const std::size_t n = r.size();
  if (amount.size() != n || trade_count.size() != n) {
    throw Error(ErrorKind::data, "minute series lengths differ");
  }
  DayLiquidityRecord rec;
  rec.day_index = day_index;
  rec.r.assign(r.begin(), r.end());
  rec.r_adj.assign(r.begin(), r.end());
  rec.beta_minute.assign(n, 1.0);
  rec.premium_ratio.assign(n, 0.0);
  rec.contributing.assign(n, 0);
  rec.amount_daily = std::accumulate(amount.begin(), amount.end(), 0.0);

  double sum_abs_r = 0.0;
  double sum_amount = 0.0;
  int count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (trade_count[t] > 0 && r[t] != 0.0 && amount[t] > 0.0) {
      rec.contributing[t] = 1;
      sum_abs_r += std::fabs(r[t]);
      sum_amount += amount[t];
      ++count;
    }
  }
  rec.contributing_count = count;
  if (count == 0) {
    rec.degenerate = true;
    return rec;
  }

  const double mean_abs_r = sum_abs_r / count;
  const double mean_amount = sum_amount / count;
  double ratio_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!rec.contributing[t]) continue;
    const double ratio = (std::fabs(r[t]) / mean_abs_r) / (amount[t] / mean_amount);
    rec.premium_ratio[t] = ratio;
    ratio_sum += ratio;
  }
  rec.eta = static_cast<double>(count) / ratio_sum;
  for (std::size_t t = 0; t < n; ++t) {
    if (!rec.contributing[t]) continue;
    const double scale = std::sqrt(rec.eta * rec.premium_ratio[t]);
    rec.r_adj[t] = scale * r[t];
    rec.beta_minute[t] = 1.0 / scale;
  }
  return rec;
}

DayLiquidityRecord minute_liquidity(const DayBars& day) {
  std::vector<double> r(day.bars.size());
  std::vector<double> a(day.bars.size());
  std::vector<int> c(day.bars.size());
  for (std::size_t i = 0; i < day.bars.size(); ++i) {
    r[i] = day.bars[i].r;
    a[i] = day.bars[i].amount;
    c[i] = day.bars[i].trade_count;
  }
  return minute_liquidity(r, a, c, day.day_index);
}

namespace {

double aggregate_return(std::span<const double> x, DailyAggregation how) {
  if (how == DailyAggregation::compounded) {
    double growth = 1.0;
    for (double v : x) growth *= 1.0 + v;
    return growth - 1.0;
  }
  return std::accumulate(x.begin(), x.end(), 0.0);
}

// T times the mean squared deviation, i.e. the sum of squared deviations.
double intraday_variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = stats::mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss;
}

}  // namespace

DayLiquidityRecord daily_aggregate(DayLiquidityRecord rec, DailyAggregation aggregation) {
  rec.r_daily = aggregate_return(rec.r, aggregation);
  rec.r_daily_adj = aggregate_return(rec.r_adj, aggregation);
  rec.sigma_daily = std::sqrt(intraday_variance(rec.r));
  rec.sigma_daily_adj = std::sqrt(intraday_variance(rec.r_adj));
  return rec;
}

double capped_ratio(double numerator, double denominator, double cap) {
  const double num = std::fabs(numerator);
  const double den = std::fabs(denominator);
  if (den == 0.0) return num == 0.0 ? 1.0 : cap;
  return std::min(num / den, cap);
}

DailyBetas daily_betas(const DayLiquidityRecord& rec, double cap) {
  if (rec.degenerate) return {1.0, 1.0};
  return {capped_ratio(rec.r_daily, rec.r_daily_adj, cap),
          capped_ratio(rec.sigma_daily, rec.sigma_daily_adj, cap)};
}

DayLiquidityRecord compute_day(const DayBars& day, const LiquidityOptions& opts) {
  auto rec = daily_aggregate(minute_liquidity(day), opts.aggregation);
  const auto betas = daily_betas(rec, opts.cap);
  rec.beta_jump = betas.jump;
  rec.beta_diff = betas.diffusion;
  return rec;
}

ExtremeFlags classify_extreme(const DayLiquidityRecord& rec, const ExtremeThresholds& t) {
  return {rec.beta_jump >= t.jump, rec.beta_diff >= t.diffusion};
}

BetaStats beta_stats(std::span<const double> betas, double cap) {
  if (betas.empty()) throw Error(ErrorKind::data, "beta statistics need at least one day");
  BetaStats s;
  s.count = betas.size();
  const double n = static_cast<double>(s.count);
  std::vector<double> sorted(betas.begin(), betas.end());
  std::sort(sorted.begin(), sorted.end());
  s.mean = stats::mean(betas);
  s.std = stats::sample_std(betas);
  s.min = sorted.front();
  s.max = sorted.back();
  s.p25 = stats::percentile_sorted(sorted, 0.25);
  s.median = stats::percentile_sorted(sorted, 0.50);
  s.p75 = stats::percentile_sorted(sorted, 0.75);
  double total = 0.0;
  for (double b : betas) {
    total += b;
    if (b == cap) ++s.days_at_max;
    if (b >= s.mean) ++s.days_ge_mean;
    if (b >= 1.0) ++s.days_ge_1;
    if (b <= 0.1) ++s.days_le_0_1;
  }
  s.pct_days_at_max = 100.0 * static_cast<double>(s.days_at_max) / n;
  s.weight_in_beta = total > 0.0 ? 100.0 * static_cast<double>(s.days_at_max) * cap / total : 0.0;
  s.pct_days_ge_mean = 100.0 * static_cast<double>(s.days_ge_mean) / n;
  s.pct_days_ge_1 = 100.0 * static_cast<double>(s.days_ge_1) / n;
  s.pct_days_le_0_1 = 100.0 * static_cast<double>(s.days_le_0_1) / n;
  return s;
}

BetaStats beta_stats(std::span<const DayLiquidityRecord> records, BetaKind which, double cap) {
  std::vector<double> betas;
  betas.reserve(records.size());
  for (const auto& r : records) betas.push_back(which == BetaKind::jump ? r.beta_jump : r.beta_diff);
  return beta_stats(betas, cap);
}

std::vector<std::pair<std::string, double>> beta_stats_rows(const BetaStats& s) {
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  return {
      {"count", d(s.count)},
      {"mean", s.mean},
      {"std", s.std},
      {"min", s.min},
      {"25%", s.p25},
      {"50% (median)", s.median},
      {"75%", s.p75},
      {"max", s.max},
      {"highest days (= max)", d(s.days_at_max)},
      {"% of total days", s.pct_days_at_max},
      {"weight in beta", s.weight_in_beta},
      {"highest days (≥ mean)", d(s.days_ge_mean)},
      {"% of total days", s.pct_days_ge_mean},
      {"highest days (≥ 1)", d(s.days_ge_1)},
      {"% of total days", s.pct_days_ge_1},
      {"lowest days (≤ 0.10)", d(s.days_le_0_1)},
      {"% of total days", s.pct_days_le_0_1},
  };
}

std::vector<BetaRow> export_beta_rows(std::span<const DayLiquidityRecord> records) {
  std::vector<BetaRow> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    rows.push_back({r.day_index, r.r_daily, r.r_daily_adj, r.sigma_daily, r.sigma_daily_adj,
                    r.beta_jump, r.beta_diff});
  }
  return rows;
}

void write_beta_rows(std::ostream& out, std::span<const BetaRow> rows, bool header) {
  if (header) out << "day,r_daily,r_daily_adj,sigma_daily,sigma_daily_adj,beta_jump,beta_diff\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n", r.day, r.r_daily,
                  r.r_daily_adj, r.sigma_daily, r.sigma_daily_adj, r.beta_jump, r.beta_diff);
    out << buf;
  }
}

std::vector<BetaRow> read_beta_rows(std::istream& in) {
  std::vector<BetaRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("day,", 0) == 0) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    BetaRow r;
    if (!(fields >> r.day >> r.r_daily >> r.r_daily_adj >> r.sigma_daily >> r.sigma_daily_adj >>
          r.beta_jump >> r.beta_diff)) {
      throw Error(ErrorKind::data, "malformed beta row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<HistogramBin> beta_histogram(std::span<const double> betas, double bin_width,
                                         double cap) {
  if (!(bin_width > 0.0)) throw Error(ErrorKind::config, "histogram bin width must be positive");
  const auto bins = static_cast<std::size_t>(std::ceil(cap / bin_width - 1e-12));
  std::vector<HistogramBin> out(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    out[i].lo = static_cast<double>(i) * bin_width;
    out[i].hi = std::min(cap, static_cast<double>(i + 1) * bin_width);
  }
  for (double b : betas) {
    auto idx = static_cast<std::size_t>(std::max(0.0, b) / bin_width);
    out[std::min(idx, bins - 1)].count++;
  }
  return out;
}

}  // namespace liqjump
