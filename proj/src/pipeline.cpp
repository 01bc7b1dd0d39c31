#include "liqjump/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <thread>

#include "liqjump/error.hpp"

namespace liqjump {

namespace {

template <typename Fn>
void parallel_assets(int count, int threads, Fn&& fn) {
  std::atomic<int> next{0};
  std::vector<std::string> errors(static_cast<std::size_t>(count));
  std::vector<ErrorKind> kinds(static_cast<std::size_t>(count), ErrorKind::data);
  const auto worker = [&] {
    for (int a = next++; a < count; a = next++) {
      try {
        fn(a);
      } catch (const Error& e) {
        errors[a] = e.what();
        kinds[a] = e.kind();
      } catch (const std::exception& e) {
        errors[a] = e.what();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < std::clamp(threads, 1, std::max(count, 1)); ++i) pool.emplace_back(worker);
    worker();
  }
  for (int a = 0; a < count; ++a) {
    if (!errors[a].empty()) throw Error(kinds[a], errors[a]);
  }
}

void store(LiquidityPanel& panel, int asset, AssetDayResult&& res, const PipelineOptions& opts) {
  if (opts.branches.untreated) {
    res.untreated.release_minute_detail();
    panel.untreated[asset].push_back(std::move(res.untreated));
  }
  if (opts.branches.treated) {
    res.treated.release_minute_detail();
    panel.treated[asset].push_back(std::move(res.treated));
  }
}

void init_panel(LiquidityPanel& panel, int n_assets, int n_days, const PipelineOptions& opts) {
  if (!opts.branches.untreated && !opts.branches.treated) {
    throw Error(ErrorKind::config, "no treatment branch selected");
  }
  panel.n_days = n_days;
  panel.untreated.assign(static_cast<std::size_t>(n_assets), {});
  panel.treated.assign(static_cast<std::size_t>(n_assets), {});
}

}  // namespace

AssetDayResult process_day(const DayBars& bars, const PipelineOptions& opts) {
  AssetDayResult res;
  if (opts.branches.untreated) res.untreated = compute_day(bars, opts.liquidity);
  if (opts.branches.treated) {
    TreatmentOutcome t = apply_wash_treatment(bars, opts.treatment);
    res.warning = t.warning;
    res.treated = compute_day(t.day, opts.liquidity);
  }
  return res;
}

WashAccounting account_wash(const DayBars& raw, const DayBars& treated, std::span<const WashTruth> wash,
                            std::int64_t day_start_ms) {
  WashAccounting acc;
  for (const auto& w : wash) {
    const auto m = (w.timestamp_ms - day_start_ms) / kMillisPerMinute;
    if (m < 0 || m >= kMinutesPerDay) throw Error(ErrorKind::data, "wash record outside its day");
    const double before = raw.bars[static_cast<std::size_t>(m)].amount;
    const double after = treated.bars[static_cast<std::size_t>(m)].amount;
    acc.injected += w.quote_amount;
    if (before > 0.0) acc.removed += w.quote_amount * (1.0 - after / before);
  }
  return acc;
}

SynthPanel synth_panel(const SynthSpec& spec, const PipelineOptions& opts) {
  spec.validate();
  SynthPanel out;
  auto& panel = out.panel;
  init_panel(panel, spec.n_assets, spec.n_days, opts);
  for (int a = 0; a < spec.n_assets; ++a) panel.assets.push_back(asset_name(a));
  std::vector<WashAccounting> wash(static_cast<std::size_t>(spec.n_assets));
  std::vector<std::vector<std::string>> warnings(static_cast<std::size_t>(spec.n_assets));

  parallel_assets(spec.n_assets, opts.threads, [&](int a) {
    AssetGenerator gen(spec, a);
    std::optional<double> seed;
    for (int d = 0; d < spec.n_days; ++d) {
      SynthDay day = gen.next_day();
      DayBars bars = build_minute_bars(day.ticks, day.day_start_ms, seed, d);
      seed = bars.last_close();
      AssetDayResult res = process_day(bars, opts);
      if (!day.wash.empty() && opts.branches.treated) {
        const auto t = apply_wash_treatment(bars, opts.treatment);
        const auto acc = account_wash(bars, t.day, day.wash, day.day_start_ms);
        wash[a].injected += acc.injected;
        wash[a].removed += acc.removed;
      }
      if (!res.warning.empty()) warnings[a].push_back(asset_name(a) + " day " + std::to_string(d) + ": " + res.warning);
      store(panel, a, std::move(res), opts);
    }
  });
  for (int a = 0; a < spec.n_assets; ++a) {
    out.wash.injected += wash[a].injected;
    out.wash.removed += wash[a].removed;
    panel.warnings.insert(panel.warnings.end(), warnings[a].begin(), warnings[a].end());
  }
  return out;
}

LiquidityPanel load_panel(const std::string& data_dir, const std::vector<std::string>& assets,
                          int first_day, int n_days, std::int64_t day_start_ms, const PipelineOptions& opts) {
  namespace fs = std::filesystem;
  if (assets.empty()) throw Error(ErrorKind::config, "asset list is empty");
  if (n_days < 1) throw Error(ErrorKind::config, "date range is empty");
  LiquidityPanel panel;
  panel.assets = assets;
  const int n_assets = static_cast<int>(assets.size());
  init_panel(panel, n_assets, n_days, opts);
  std::vector<std::vector<std::string>> warnings(static_cast<std::size_t>(n_assets));

  parallel_assets(n_assets, opts.threads, [&](int a) {
    std::optional<double> seed;
    for (int k = 0; k < n_days; ++k) {
      const int d = first_day + k;
      char name[32];
      std::snprintf(name, sizeof name, "D%04d.csv", d);
      const fs::path path = fs::path(data_dir) / assets[a] / name;
      if (!fs::exists(path)) throw Error(ErrorKind::io, "missing tick file " + path.string());
      ParseResult parsed = parse_tick_file(path.string());
      if (parsed.rejected > 0) {
        warnings[a].push_back(path.string() + ": " + std::to_string(parsed.rejected) + " rejected lines");
      }
      if (parsed.ticks.empty() && !seed) throw Error(ErrorKind::data, "no trades in " + path.string());
      DayBars bars = build_minute_bars(parsed.ticks, day_start_ms + k * kMillisPerDay, seed, d);
      seed = bars.last_close();
      AssetDayResult res = process_day(bars, opts);
      if (!res.warning.empty()) warnings[a].push_back(assets[a] + " day " + std::to_string(d) + ": " + res.warning);
      store(panel, a, std::move(res), opts);
    }
  });
  for (const auto& w : warnings) panel.warnings.insert(panel.warnings.end(), w.begin(), w.end());
  return panel;
}

UniverseData assemble_universe(const LiquidityPanel& panel) {
  const auto n_assets = static_cast<Eigen::Index>(panel.assets.size());
  const Eigen::Index n_days = panel.n_days;
  if (panel.untreated.size() != static_cast<std::size_t>(n_assets) ||
      panel.treated.size() != static_cast<std::size_t>(n_assets)) {
    throw Error(ErrorKind::data, "panel shape does not match its asset list");
  }
  UniverseData u;
  for (Eigen::MatrixXd* m : {&u.r, &u.r_adj_treated, &u.r_adj_untreated, &u.beta_jump_treated,
                             &u.beta_jump_untreated, &u.amount}) {
    m->resize(n_days, n_assets);
  }
  for (Eigen::Index a = 0; a < n_assets; ++a) {
    const auto& un = panel.untreated[static_cast<std::size_t>(a)];
    const auto& tr = panel.treated[static_cast<std::size_t>(a)];
    if (un.size() != static_cast<std::size_t>(n_days) || tr.size() != static_cast<std::size_t>(n_days)) {
      throw Error(ErrorKind::data, "backtest needs both treatment branches for every day of " +
                                       panel.assets[static_cast<std::size_t>(a)]);
    }
    for (Eigen::Index d = 0; d < n_days; ++d) {
      u.r(d, a) = un[d].r_daily;
      u.r_adj_untreated(d, a) = un[d].r_daily_adj;
      u.r_adj_treated(d, a) = tr[d].r_daily_adj;
      u.beta_jump_untreated(d, a) = un[d].beta_jump;
      u.beta_jump_treated(d, a) = tr[d].beta_jump;
      u.amount(d, a) = un[d].amount_daily;
    }
  }
  return u;
}

std::vector<AdfReport> stationarity_report(const LiquidityPanel& panel) {
  std::vector<AdfReport> out;
  const auto run = [&](const std::string& asset, const std::string& name, const std::vector<double>& s) {
    AdfReport rep;
    rep.asset = asset;
    rep.series = name;
    try {
      rep.result = adf_stationarity(s);
    } catch (const Error& e) {
      rep.error = e.what();
    }
    out.push_back(std::move(rep));
  };
  for (std::size_t a = 0; a < panel.assets.size(); ++a) {
    const auto& un = panel.untreated[a];
    const auto& tr = panel.treated[a];
    std::vector<double> r, adj_un, adj_tr;
    for (const auto& d : un) {
      r.push_back(d.r_daily);
      adj_un.push_back(d.r_daily_adj);
    }
    for (const auto& d : tr) {
      if (un.empty()) r.push_back(d.r_daily);
      adj_tr.push_back(d.r_daily_adj);
    }
    run(panel.assets[a], "regular", r);
    if (!un.empty()) run(panel.assets[a], "liquidity_adjusted_untreated", adj_un);
    if (!tr.empty()) run(panel.assets[a], "liquidity_adjusted_treated", adj_tr);
  }
  return out;
}

}  // namespace liqjump
