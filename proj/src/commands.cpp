#include "liqjump/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "liqjump/backtest.hpp"
#include "liqjump/error.hpp"
#include "liqjump/manifest.hpp"
#include "liqjump/pipeline.hpp"

namespace liqjump {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

fs::path ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + p.string() + ": " + ec.message());
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(ErrorKind::io, "cannot write " + p.string());
  return f;
}

void write_text(const fs::path& p, const std::string& text) {
  auto f = open_out(p);
  f << text;
  if (!f) throw Error(ErrorKind::io, "write failed for " + p.string());
}

PipelineOptions pipeline_options(const RunConfig& cfg, Branches branches) {
  PipelineOptions o;
  o.liquidity = cfg.liquidity;
  o.treatment = cfg.treatment_spec;
  o.branches = branches;
  o.threads = cfg.threads;
  return o;
}

LiquidityPanel load(const RunConfig& cfg, Branches branches) {
  return load_panel(cfg.resolved_data_dir(), cfg.resolved_assets(), cfg.first_day, cfg.resolved_days(),
                    cfg.first_day_start_ms(), pipeline_options(cfg, branches));
}

json stats_json(const BetaStats& s) {
  json j;
  for (const auto& [label, value] : beta_stats_rows(s)) j[label] = value;
  return j;
}

json branch_stats(const LiquidityPanel& panel, const std::vector<std::vector<DayLiquidityRecord>>& recs,
                  double cap) {
  json out;
  for (const auto& [name, kind] : {std::pair{"beta_jump", BetaKind::jump}, std::pair{"beta_diff", BetaKind::diffusion}}) {
    json per;
    std::vector<DayLiquidityRecord> all;
    for (std::size_t a = 0; a < panel.assets.size(); ++a) {
      per[panel.assets[a]] = stats_json(beta_stats(recs[a], kind, cap));
      all.insert(all.end(), recs[a].begin(), recs[a].end());
    }
    per["all"] = stats_json(beta_stats(all, kind, cap));
    out[name] = per;
  }
  return out;
}

void write_branch(const fs::path& dir, const std::string& suffix, const LiquidityPanel& panel,
                  const std::vector<std::vector<DayLiquidityRecord>>& recs, double cap) {
  {
    auto f = open_out(dir / ("records_" + suffix + ".csv"));
    f << "asset,";
    bool header = true;
    for (std::size_t a = 0; a < panel.assets.size(); ++a) {
      const auto rows = export_beta_rows(recs[a]);
      std::ostringstream body;
      write_beta_rows(body, rows, header);
      std::istringstream lines(body.str());
      std::string line;
      bool first = true;
      while (std::getline(lines, line)) {
        if (first && header) {
          f << line << '\n';
        } else {
          f << panel.assets[a] << ',' << line << '\n';
        }
        first = false;
      }
      header = false;
    }
  }
  {
    auto f = open_out(dir / ("histogram_" + suffix + ".csv"));
    f << "measure,asset,lo,hi,count\n";
    for (const auto& [name, kind] : {std::pair{"beta_jump", BetaKind::jump}, std::pair{"beta_diff", BetaKind::diffusion}}) {
      for (std::size_t a = 0; a < panel.assets.size(); ++a) {
        std::vector<double> b;
        for (const auto& d : recs[a]) b.push_back(kind == BetaKind::jump ? d.beta_jump : d.beta_diff);
        for (const auto& bin : beta_histogram(b, 0.5, cap)) {
          f << name << ',' << panel.assets[a] << ',' << bin.lo << ',' << bin.hi << ',' << bin.count << '\n';
        }
      }
    }
  }
  json j;
  j["branch"] = suffix;
  j["assets"] = panel.assets;
  j["days"] = panel.n_days;
  j["cap"] = cap;
  const auto stats = branch_stats(panel, recs, cap);
  j["beta_jump"] = stats["beta_jump"];
  j["beta_diff"] = stats["beta_diff"];
  write_text(dir / ("beta_stats_" + suffix + ".json"), j.dump(2) + "\n");
}

void write_forecasts(const fs::path& p, const std::vector<ForecastRow>& rows, const std::vector<std::string>& assets) {
  auto f = open_out(p);
  f << "date_index,asset,mu_hat,p,q,variance_kind,converged\n";
  char buf[64];
  for (const auto& r : rows) {
    for (std::size_t a = 0; a < r.entries.size(); ++a) {
      const auto& e = r.entries[a];
      std::snprintf(buf, sizeof buf, "%.17g", e.mu_hat);
      f << r.date_index << ',' << assets[a] << ',' << buf << ',' << e.p << ',' << e.q << ','
        << to_string(e.variance_kind) << ',' << (e.converged ? 1 : 0) << '\n';
    }
  }
}

Branches branches_of(TreatmentMode m) {
  return {m != TreatmentMode::on, m != TreatmentMode::off};
}

}  // namespace

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path out = ensure_dir(cfg.out_dir);
  const fs::path ticks = out / "ticks";
  const SynthOutput res = generate_market(cfg.synth, ticks.string(), cfg.threads);
  json j;
  j["seed"] = cfg.synth.seed;
  j["n_assets"] = cfg.synth.n_assets;
  j["n_days"] = cfg.synth.n_days;
  j["wash_mode"] = to_string(cfg.synth.wash_mode);
  j["tick_files"] = cfg.synth.n_assets * cfg.synth.n_days;
  j["ticks"] = res.ticks;
  j["wash_trades"] = res.wash_trades;
  write_text(out / "synth_summary.json", j.dump(2) + "\n");
  write_manifest(out.string());
  log << "synth: " << res.ticks << " ticks in " << cfg.synth.n_assets * cfg.synth.n_days << " files under "
      << ticks.string() << "\n";
}

void cmd_liquidity(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path dir = ensure_dir(fs::path(cfg.out_dir) / "liquidity");
  const Branches br = branches_of(cfg.treatment);
  const LiquidityPanel panel = load(cfg, br);
  if (br.untreated) write_branch(dir, "untreated", panel, panel.untreated, cfg.liquidity.cap);
  if (br.treated) write_branch(dir, "treated", panel, panel.treated, cfg.liquidity.cap);
  {
    auto f = open_out(dir / "stationarity.csv");
    f << "asset,series,adf_statistic,lags,critical_value,stationary,error\n";
    for (const auto& r : stationarity_report(panel)) {
      f << r.asset << ',' << r.series << ',' << std::setprecision(12) << r.result.statistic << ',' << r.result.lags
        << ',' << r.result.critical_value << ',' << (r.result.reject_unit_root ? 1 : 0) << ',' << r.error << '\n';
    }
  }
  {
    auto f = open_out(dir / "warnings.txt");
    for (const auto& w : panel.warnings) f << w << '\n';
  }
  write_manifest(cfg.out_dir);
  log << "liquidity: " << panel.assets.size() << " assets x " << panel.n_days << " days, " << panel.warnings.size()
      << " warnings\n";
}

void cmd_backtest(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fs::path dir = ensure_dir(fs::path(cfg.out_dir) / "backtest");
  const LiquidityPanel panel = load(cfg, {true, true});
  if (panel.n_days < cfg.window + 1) {
    throw Error(ErrorKind::data, "history of " + std::to_string(panel.n_days) + " days is " +
                                     std::to_string(cfg.window + 1 - panel.n_days) +
                                     " short of window + 1 = " + std::to_string(cfg.window + 1));
  }
  const UniverseData data = assemble_universe(panel);

  BacktestOptions opts;
  opts.window = cfg.window;
  opts.cap = cfg.cap;
  opts.lambda_floor = cfg.lambda_floor;
  opts.portfolios = cfg.portfolios;
  opts.annualize_volatility = cfg.annualize_volatility;
  opts.threads = cfg.threads;
  opts.forecast.window = cfg.window;
  opts.forecast.max_p = cfg.max_p;
  opts.forecast.max_q = cfg.max_q;
  opts.forecast.order_refit_every = cfg.order_refit_every;
  opts.forecast.coef_refit_every = cfg.coef_refit_every;
  opts.forecast.variance_refit_every = cfg.variance_refit_every;
  opts.forecast.threads = cfg.threads;

  const ForecastSet forecasts = compute_forecasts(data, opts.forecast, cfg.portfolios);
  const BacktestReport report = run_backtest(data, opts, &forecasts);

  write_text(dir / "report.json", performance_summary(report));
  {
    auto f = open_out(dir / "daily_returns.csv");
    write_daily_returns(f, report);
  }
  {
    auto f = open_out(dir / "weights.csv");
    write_report_weights(f, report);
  }
  if (!forecasts.regular.empty()) write_forecasts(dir / "forecasts_regular.csv", forecasts.regular, panel.assets);
  if (!forecasts.adj_treated.empty()) write_forecasts(dir / "forecasts_adjusted_treated.csv", forecasts.adj_treated, panel.assets);
  if (!forecasts.adj_untreated.empty()) {
    write_forecasts(dir / "forecasts_adjusted_untreated.csv", forecasts.adj_untreated, panel.assets);
  }
  write_manifest(cfg.out_dir);
  log << "backtest: " << report.portfolios.size() << " portfolios over " << report.out_of_sample_days
      << " out-of-sample days\n";
}

void cmd_report(const RunConfig& cfg, std::ostream& out) {
  const fs::path path = fs::path(cfg.out_dir) / "backtest" / "report.json";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "missing " + path.string() + "; run the backtest first");
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::data, path.string() + ": " + e.what());
  }
  const auto cell = [](const json& v) {
    char buf[32];
    if (v.is_null()) return std::string("      -");
    std::snprintf(buf, sizeof buf, "%10.4f", v.get<double>());
    return std::string(buf);
  };
  std::ostringstream text;
  text << "Out-of-sample days: " << j["out_of_sample_days"] << ", window " << j["window"] << ", volatility "
       << j["volatility"].get<std::string>() << "\n";
  for (const auto& [panel, pj] : j["panels"].items()) {
    text << "\nPanel " << panel << ": " << pj["title"].get<std::string>() << "\n";
    text << "  Benchmarks:";
    for (const auto& [id, v] : pj["benchmarks"].items()) text << "  P" << id << cell(v);
    text << "\n";
    text << "  " << std::setw(10) << "" << std::setw(12) << "TMV" << std::setw(12) << "LAMV with" << std::setw(12)
         << "LAMV w/o" << "\n";
    for (const char* row : {"standard", "forecast"}) {
      text << "  " << std::left << std::setw(10) << row << std::right;
      for (const auto& v : pj["mean_variance"][row]) text << "  " << cell(v);
      text << "\n";
    }
  }
  write_text(fs::path(cfg.out_dir) / "backtest" / "summary.txt", text.str());
  write_manifest(cfg.out_dir);
  out << text.str();
}

}  // namespace liqjump
