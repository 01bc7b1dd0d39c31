// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "liqjump/backtest.hpp"
#include "liqjump/config.hpp"
#include "liqjump/error.hpp"
#include "liqjump/ingest.hpp"
#include "liqjump/liquidity.hpp"
#include "liqjump/optimizer.hpp"
#include "liqjump/pipeline.hpp"
#include "liqjump/rng.hpp"
#include "liqjump/stats.hpp"
#include "liqjump/tsmodel.hpp"

using namespace liqjump;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RunConfig scenario(const std::string& name) {
  return load_config(std::string(LIQJUMP_SCENARIOS) + "/" + name, [](const std::string&) {
    return std::optional<std::string>{};
  });
}

PipelineOptions pipeline_of(const RunConfig& cfg) {
  PipelineOptions o;
  o.liquidity = cfg.liquidity;
  o.treatment = cfg.treatment_spec;
  o.threads = cfg.threads;
  return o;
}

BacktestOptions backtest_of(const RunConfig& cfg) {
  BacktestOptions o;
  o.window = cfg.window;
  o.cap = cfg.cap;
  o.lambda_floor = cfg.lambda_floor;
  o.portfolios = cfg.portfolios;
  o.threads = cfg.threads;
  o.forecast.max_p = cfg.max_p;
  o.forecast.max_q = cfg.max_q;
  o.forecast.order_refit_every = cfg.order_refit_every;
  o.forecast.coef_refit_every = cfg.coef_refit_every;
  o.forecast.variance_refit_every = cfg.variance_refit_every;
  return o;
}

// Random minute series: about 20% idle minutes, some traded minutes without
// a price change, heavy-tailed amounts and returns.
struct MinuteDay {
  std::vector<double> r, a;
  std::vector<int> c;
};

std::vector<MinuteDay> minute_corpus(int days, std::uint64_t seed) {
  std::vector<MinuteDay> out(static_cast<std::size_t>(days));
  for (int d = 0; d < days; ++d) {
    Philox rng(seed, static_cast<std::uint64_t>(d));
    auto& day = out[static_cast<std::size_t>(d)];
    const double vol = 1e-4 * std::exp(2.0 * rng.uniform());
    const double idle = 0.4 * rng.uniform();
    for (int t = 0; t < kMinutesPerDay; ++t) {
      const bool traded = rng.uniform() >= idle;
      const bool moved = traded && rng.uniform() < 0.9;
      double r = 0.0;
      if (moved) r = vol * rng.normal() * (rng.uniform() < 0.01 ? 20.0 : 1.0);
      day.c.push_back(traded ? 1 + static_cast<int>(rng.poisson(5.0)) : 0);
      day.r.push_back(r);
      day.a.push_back(traded ? rng.lognormal(8.0, 1.5) : 0.0);
    }
  }
  return out;
}

DayLiquidityRecord liquidity_of(const MinuteDay& d) {
  auto rec = daily_aggregate(minute_liquidity(d.r, d.a, d.c));
  const auto b = daily_betas(rec);
  rec.beta_jump = b.jump;
  rec.beta_diff = b.diffusion;
  return rec;
}

Outcome criterion1() {
  double worst = 0.0;
  for (const auto& d : minute_corpus(1000, 101)) {
    const auto rec = minute_liquidity(d.r, d.a, d.c);
    if (rec.contributing_count == 0) continue;
    double s = 0.0;
    for (int t = 0; t < kMinutesPerDay; ++t) {
      if (rec.contributing[t]) s += rec.eta * rec.premium_ratio[t];
    }
    worst = std::max(worst, std::fabs(s - rec.contributing_count) / rec.contributing_count);
  }
  return {worst <= 1e-9, fmt("max relative error %.3g over 1000 asset-days (tolerance 1e-9)", worst)};
}

Outcome criterion2() {
  double worst = 0.0;
  for (const auto& d : minute_corpus(1000, 101)) {
    const auto rec = minute_liquidity(d.r, d.a, d.c);
    for (int t = 0; t < kMinutesPerDay; ++t) {
      worst = std::max(worst, std::fabs(rec.beta_minute[t] * rec.r_adj[t] - d.r[t]));
    }
  }
  return {worst <= 1e-12, fmt("max |beta * r_adj - r| = %.3g (tolerance 1e-12)", worst)};
}

// Amounts enter only through A_t / mean A, so the outputs are invariant in
// exact arithmetic. In floating point the rescaled amounts round differently,
// so each output is compared at 1e-12 of max(1, |value|); ratios run into the
// thousands on thin minutes.
Outcome criterion3() {
  double worst_abs = 0.0, worst = 0.0;
  const auto worse = [&](double x, double y) {
    worst_abs = std::max(worst_abs, std::fabs(x - y));
    worst = std::max(worst, std::fabs(x - y) / std::max(1.0, std::fabs(x)));
  };
  for (const auto& d : minute_corpus(200, 303)) {
    MinuteDay scaled = d;
    for (double& a : scaled.a) a *= 7.3;
    const auto x = liquidity_of(d);
    const auto y = liquidity_of(scaled);
    worse(x.eta, y.eta);
    for (int t = 0; t < kMinutesPerDay; ++t) {
      worse(x.r_adj[t], y.r_adj[t]);
      worse(x.beta_minute[t], y.beta_minute[t]);
      worse(x.premium_ratio[t], y.premium_ratio[t]);
    }
    worse(x.r_daily, y.r_daily);
    worse(x.r_daily_adj, y.r_daily_adj);
    worse(x.sigma_daily, y.sigma_daily);
    worse(x.sigma_daily_adj, y.sigma_daily_adj);
    worse(x.beta_jump, y.beta_jump);
    worse(x.beta_diff, y.beta_diff);
  }
  return {worst <= 1e-12, fmt("max change %.3g of max(1, |value|) (tolerance 1e-12); max absolute change %.3g",
                              worst, worst_abs)};
}

// Percentile rule written out independently: linear interpolation at
// position q (n - 1) of the sorted positive amounts.
std::vector<double> treatment_oracle(const std::vector<double>& amounts, double m3, double m4) {
  std::vector<double> pos;
  for (double a : amounts) {
    if (a > 0.0) pos.push_back(a);
  }
  if (pos.size() < 4) return amounts;
  std::sort(pos.begin(), pos.end());
  const auto q = [&](double p) {
    const double h = p * static_cast<double>(pos.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(h));
    return i + 1 < pos.size() ? pos[i] + (h - static_cast<double>(i)) * (pos[i + 1] - pos[i]) : pos[i];
  };
  const double p50 = q(0.5), p75 = q(0.75);
  std::vector<double> out = amounts;
  for (double& a : out) {
    if (a > p75) {
      a *= m4;
    } else if (a > p50) {
      a *= m3;
    }
  }
  return out;
}

DayBars bars_from(const std::vector<double>& amounts) {
  DayBars d;
  d.bars.resize(kMinutesPerDay);
  for (int m = 0; m < kMinutesPerDay; ++m) {
    d.bars[m].minute_index = m;
    d.bars[m].close_price = 1.0;
    d.bars[m].amount = m < static_cast<int>(amounts.size()) ? amounts[m] : 0.0;
    d.bars[m].trade_count = d.bars[m].amount > 0.0 ? 1 : 0;
  }
  return d;
}

Outcome criterion4() {
  const TreatmentSpec spec;
  int mismatches = 0;
  int increases = 0;
  const auto quartet = apply_wash_treatment(bars_from({10, 20, 30, 40}), spec).day;
  const std::vector<double> want{10, 20, 15, 10};
  for (int i = 0; i < 4; ++i) mismatches += quartet.bars[i].amount != want[i];
  for (int d = 0; d < 100; ++d) {
    Philox rng(404, static_cast<std::uint64_t>(d));
    std::vector<double> a(kMinutesPerDay);
    const double idle = rng.uniform();
    for (double& x : a) {
      x = rng.uniform() < idle ? 0.0 : rng.lognormal(5.0, 2.0);
      if (rng.uniform() < 0.05) x = 100.0;  // ties around the cut points
    }
    const auto got = apply_wash_treatment(bars_from(a), spec).day;
    const auto expect = treatment_oracle(a, spec.q3_multiplier, spec.q4_multiplier);
    for (int m = 0; m < kMinutesPerDay; ++m) {
      if (std::fabs(got.bars[m].amount - expect[m]) > 1e-12 * std::max(1.0, expect[m])) ++mismatches;
    }
    if (got.total_amount() > bars_from(a).total_amount()) ++increases;
  }
  return {mismatches == 0 && increases == 0,
          fmt("%d minute mismatches against the percentile oracle, %d days with a larger treated total", mismatches,
              increases)};
}

std::vector<double> simulate_garch(std::uint64_t seed, int n, double omega, double a, double b) {
  Philox rng(seed, 55);
  std::vector<double> e;
  double s2 = omega / (1.0 - a - b), prev = 0.0;
  for (int t = 0; t < n + 500; ++t) {
    s2 = omega + a * prev * prev + b * s2;
    prev = std::sqrt(s2) * rng.normal();
    if (t >= 500) e.push_back(prev);
  }
  return e;
}

Outcome criterion5() {
  int within = 0, selected = 0;
  const int runs = 50;
  for (int s = 0; s < runs; ++s) {
    const auto e = simulate_garch(1000 + s, 5000, 0.1, 0.1, 0.8);
    const auto g = fit_garch(e);
    const auto eg = fit_egarch(e);
    within += g.converged && std::fabs(g.a - 0.1) <= 0.15 && std::fabs(g.b - 0.8) <= 0.15;
    selected += g.converged && (!eg.converged || g.aic <= eg.aic);
  }
  return {within == runs && selected >= 40,
          fmt("a, b within 0.15 in %d/%d runs; GARCH preferred by AIC in %d/%d (need all and 80%%)", within, runs,
              selected, runs)};
}

Outcome criterion6() {
  int inside = 0;
  double worst = 0.0;
  const int runs = 100;
  for (int s = 0; s < runs; ++s) {
    Philox rng(2000 + s, 66);
    std::vector<double> x;
    double prev = 0.0;
    for (int t = 0; t < 2000 + 200; ++t) {
      prev = 0.8 * prev + rng.normal();
      if (t >= 200) x.push_back(prev);
    }
    const auto fit = fit_arma_order(x, 1, 0);
    inside += fit.converged && fit.ar[0] >= 0.72 && fit.ar[0] <= 0.88;
    for (int k = 0; k < 5; ++k) {
      const auto tail = std::span<const double>(x).first(x.size() - k);
      const double closed = fit.intercept + fit.ar[0] * tail.back();
      worst = std::max(worst, std::fabs(forecast_mean(fit, tail, {}) - closed));
    }
  }
  return {inside >= 90 && worst <= 1e-10,
          fmt("phi_1 in [0.72, 0.88] in %d/%d runs (need 90); max forecast gap %.3g (tolerance 1e-10)", inside, runs,
              worst)};
}

Outcome criterion7() {
  Philox rng(777, 0);
  double worst_gap = 0.0, worst_kkt = 0.0, worst_violation = 0.0;
  for (int k = 0; k < 200; ++k) {
    MvProblem p;
    p.mu = Eigen::VectorXd::Zero(4);
    p.sigma = Eigen::MatrixXd::Zero(4, 4);
    Eigen::MatrixXd f(3, 5);
    for (int i = 0; i < 3; ++i) {
      p.mu[i + 1] = 0.005 * rng.normal();
      for (int j = 0; j < 5; ++j) f(i, j) = 0.03 * rng.normal();
    }
    p.sigma.bottomRightCorner(3, 3) = f * f.transpose() / 5.0;
    p.lambda = 0.1 + 20.0 * rng.uniform();
    const auto sol = solve_mv(p);
    const auto bf = brute_force_mv(p, 0.005);
    worst_gap = std::max(worst_gap, std::fabs(sol.objective - bf.objective));
    if (sol.objective < bf.objective - 1e-9) worst_gap = std::max(worst_gap, 1.0);
    worst_kkt = std::max(worst_kkt, sol.kkt_residual);
    worst_violation = std::max(worst_violation, constraint_violation(p, sol.w));
  }
  return {worst_gap <= 1e-4 && worst_kkt <= kKktTolerance && worst_violation <= 1e-12,
          fmt("max objective gap %.3g (1e-4), max KKT residual %.3g (1e-7), max violation %.3g", worst_gap, worst_kkt,
              worst_violation)};
}

Outcome criterion8() {
  const RunConfig cfg = scenario("hf_small.ini");
  const auto panel = synth_panel(cfg.synth, pipeline_of(cfg)).panel;
  std::vector<double> bs_u, bs_t, br_u, br_t;
  for (std::size_t a = 0; a < panel.assets.size(); ++a) {
    for (const auto& d : panel.untreated[a]) {
      bs_u.push_back(d.beta_diff);
      br_u.push_back(d.beta_jump);
    }
    for (const auto& d : panel.treated[a]) {
      bs_t.push_back(d.beta_diff);
      br_t.push_back(d.beta_jump);
    }
  }
  const double med_u = stats::percentile_linear(bs_u, 0.5);
  const double med_t = stats::percentile_linear(bs_t, 0.5);
  const double mean_u = stats::mean(br_u);
  const double mean_t = stats::mean(br_t);
  const double drop_sigma = 1.0 - med_t / med_u;
  const double drop_jump = 1.0 - mean_t / mean_u;
  const bool pass = med_u > 1.0 && med_t < 1.0 && drop_sigma > 0.0 && drop_sigma >= 2.0 * drop_jump;
  return {pass, fmt("median beta_sigma %.4f -> %.4f (drop %.2f%%); mean beta_r %.4f -> %.4f (drop %.2f%%)", med_u,
                    med_t, 100.0 * drop_sigma, mean_u, mean_t, 100.0 * drop_jump)};
}

Outcome criterion9() {
  RunConfig cfg = scenario("jump_heavy.ini");
  const auto panel = synth_panel(cfg.synth, pipeline_of(cfg)).panel;
  const UniverseData data = assemble_universe(panel);
  BacktestOptions opts = backtest_of(cfg);
  opts.portfolios = {7, 8, 9, 10, 11, 12};
  const auto rep = run_backtest(data, opts);
  const auto sr = [&](int id) { return rep.find(id)->sharpe.value_or(NAN); };
  const auto mx = [&](int id) { return rep.find(id)->max_daily_return; };
  const bool pass = sr(11) > sr(10) && sr(12) > sr(10) && mx(8) < mx(7) && mx(9) < mx(7);
  return {pass, fmt("SR P10 %.3f, P11 %.3f, P12 %.3f; max daily return P7 %.4f, P8 %.4f, P9 %.4f", sr(10), sr(11),
                    sr(12), mx(7), mx(8), mx(9))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LIQJUMP_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion10() {
  const fs::path root = fs::temp_directory_path() / "liqjump_acceptance_determinism";
  fs::remove_all(root);
  const std::string config = std::string(LIQJUMP_SCENARIOS) + "/smoke.ini";
  std::vector<std::string> manifests;
  std::vector<int> codes;
  for (int threads : {1, 4}) {
    const fs::path out = root / ("threads" + std::to_string(threads));
    const std::string base =
        "--config " + config + " --out " + out.string() + " --threads " + std::to_string(threads);
    int code = 0;
    for (const char* step : {"synth", "liquidity", "backtest", "report"}) {
      if (code == 0) code = run_cli(step + (" " + base));
    }
    codes.push_back(code);
    manifests.push_back(slurp(out / "manifest.txt"));
  }
  const bool ran = codes[0] == 0 && codes[1] == 0;
  const bool same = ran && !manifests[0].empty() && manifests[0] == manifests[1];
  const auto lines = std::count(manifests[0].begin(), manifests[0].end(), '\n');
  fs::remove_all(root);
  return {same, fmt("exit codes %d/%d; manifests of %ld artifacts %s across --threads 1 and 4", codes[0], codes[1],
                    static_cast<long>(lines), same ? "identical" : "differ")};
}

Outcome criterion11() {
  const RunConfig cfg = scenario("smoke.ini");
  const auto panel = synth_panel(cfg.synth, pipeline_of(cfg)).panel;
  const UniverseData data = assemble_universe(panel);
  const BacktestOptions opts = backtest_of(cfg);
  const auto audit = audit_information_barrier(data, opts, opts.window - 1, 30, 2024);
  return {audit.violations == 0 && audit.days_checked == 30,
          fmt("%d decision days x %d portfolios, %d changed weight vectors (max change %.3g)", audit.days_checked,
              audit.portfolios_checked, audit.violations, audit.max_abs_difference)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"normalization constraint", criterion1},
      {"minute identity", criterion2},
      {"amount-scale invariance", criterion3},
      {"treatment arithmetic", criterion4},
      {"GARCH recovery", criterion5},
      {"ARMA estimate and forecast", criterion6},
      {"QP oracle equivalence", criterion7},
      {"treatment lowers beta_sigma more than beta_r (hf_small)", criterion8},
      {"forecast LAMV beats forecast TMV (jump_heavy)", criterion9},
      {"deterministic manifests", criterion10},
      {"information barrier", criterion11},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << " [" << fmt("%.1f", secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
