#include "liqjump/backtest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "liqjump/error.hpp"
#include "liqjump/rng.hpp"
#include "liqjump/stats.hpp"

namespace liqjump {

namespace {

using P = PortfolioSpec;
using K = PortfolioKind;
using T = TreatmentTag;
using B = ReturnBasis;

constexpr std::array<PortfolioSpec, kPortfolioCount> kCatalog{{
    {1, K::equal, T::none, B::regular},
    {2, K::market, T::none, B::regular},
    {3, K::liquidity_weight, T::with, B::regular},
    {4, K::liquidity_weight, T::without, B::regular},
    {5, K::inverse_liquidity_weight, T::with, B::regular},
    {6, K::inverse_liquidity_weight, T::without, B::regular},
    {7, K::mv_standard, T::none, B::regular},
    {8, K::mv_standard, T::with, B::liquidity_adjusted},
    {9, K::mv_standard, T::without, B::liquidity_adjusted},
    {10, K::mv_forecast, T::none, B::regular},
    {11, K::mv_forecast, T::with, B::liquidity_adjusted},
    {12, K::mv_forecast, T::without, B::liquidity_adjusted},
}};

const Eigen::MatrixXd& basis_panel(const UniverseData& d, const PortfolioSpec& s) {
  if (s.basis == B::regular) return d.r;
  return s.treatment == T::with ? d.r_adj_treated : d.r_adj_untreated;
}

const std::vector<ForecastRow>& basis_forecasts(const ForecastSet& f, const PortfolioSpec& s) {
  if (s.basis == B::regular) return f.regular;
  return s.treatment == T::with ? f.adj_treated : f.adj_untreated;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m(i, c);
  return out;
}

// Amount-weighted same-day market return.
double market_return(const UniverseData& d, int day) {
  const double total = d.amount.row(day).sum();
  if (!(total > 0.0)) return d.r.row(day).mean();
  return d.amount.row(day).dot(d.r.row(day)) / total;
}

bool needs_forecasts(std::span<const int> portfolios) {
  return std::any_of(portfolios.begin(), portfolios.end(),
                     [](int id) { return portfolio_spec(id).kind == K::mv_forecast; });
}

template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  const int n = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(count, 1)));
  std::vector<std::jthread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
}

}  // namespace

std::string to_string(PortfolioKind kind) {
  switch (kind) {
    case K::equal: return "equal";
    case K::market: return "market";
    case K::liquidity_weight: return "liquidity_weight";
    case K::inverse_liquidity_weight: return "inverse_liquidity_weight";
    case K::mv_standard: return "mv_standard";
    case K::mv_forecast: return "mv_forecast";
  }
  return "?";
}

std::string to_string(TreatmentTag tag) {
  switch (tag) {
    case T::with: return "with";
    case T::without: return "without";
    case T::none: return "n/a";
  }
  return "?";
}

std::string to_string(ReturnBasis basis) {
  return basis == B::regular ? "regular" : "liquidity_adjusted";
}

const std::array<PortfolioSpec, kPortfolioCount>& portfolio_catalog() { return kCatalog; }

const PortfolioSpec& portfolio_spec(int id) {
  if (id < 1 || id > kPortfolioCount) {
    throw Error(ErrorKind::config, "portfolio id " + std::to_string(id) + " outside 1..12");
  }
  return kCatalog[static_cast<std::size_t>(id - 1)];
}

void UniverseData::validate() const {
  const auto n = r.rows();
  const auto m = r.cols();
  if (n == 0 || m == 0) throw Error(ErrorKind::data, "empty universe");
  for (const Eigen::MatrixXd* x : {&r_adj_treated, &r_adj_untreated, &beta_jump_treated,
                                   &beta_jump_untreated, &amount}) {
    if (x->rows() != n || x->cols() != m) throw Error(ErrorKind::data, "universe panels differ in shape");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool finite = r.row(i).allFinite() && r_adj_treated.row(i).allFinite() &&
                        r_adj_untreated.row(i).allFinite() && beta_jump_treated.row(i).allFinite() &&
                        beta_jump_untreated.row(i).allFinite() && amount.row(i).allFinite();
    if (!finite) throw Error(ErrorKind::data, "missing day data at day index " + std::to_string(i));
  }
}

ForecastSet compute_forecasts(const UniverseData& data, const RollingOptions& opts,
                              std::span<const int> portfolios) {
  ForecastSet f;
  const auto series = [&](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> s;
    for (Eigen::Index c = 0; c < m.cols(); ++c) s.push_back(column(m, c));
    return s;
  };
  for (int id : portfolios) {
    const auto& spec = portfolio_spec(id);
    if (spec.kind != K::mv_forecast) continue;
    if (spec.basis == B::regular && f.regular.empty()) {
      f.regular = rolling_forecasts(series(data.r), opts);
    } else if (spec.treatment == T::with && f.adj_treated.empty()) {
      f.adj_treated = rolling_forecasts(series(data.r_adj_treated), opts);
    } else if (spec.treatment == T::without && f.adj_untreated.empty()) {
      f.adj_untreated = rolling_forecasts(series(data.r_adj_untreated), opts);
    }
  }
  return f;
}

BenchmarkWeights benchmark_weights(const PortfolioSpec& spec, const DayInputs& day) {
  const auto n = static_cast<Eigen::Index>(day.beta_jump.size());
  BenchmarkWeights out;
  out.w.resize(n);
  switch (spec.kind) {
    case K::equal:
      out.w.setConstant(1.0 / static_cast<double>(n));
      break;
    case K::market:
      for (Eigen::Index i = 0; i < n; ++i) out.w[i] = day.amount[i];
      break;
    case K::liquidity_weight:
      for (Eigen::Index i = 0; i < n; ++i) out.w[i] = day.beta_jump[i];
      break;
    case K::inverse_liquidity_weight:
      for (Eigen::Index i = 0; i < n; ++i) {
        double b = day.beta_jump[i];
        if (b <= 0.0) {
          b = kInverseBetaFloor;
          out.floored = true;
        }
        out.w[i] = 1.0 / b;
      }
      break;
    default:
      throw Error(ErrorKind::config, "portfolio " + std::to_string(spec.id) + " is not a benchmark");
  }
  const double total = out.w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorKind::data, "benchmark weights do not normalize for portfolio " + std::to_string(spec.id));
  }
  out.w /= total;
  return out;
}

DayDecision decide_weights(const UniverseData& data, const ForecastSet* forecasts,
                           const PortfolioSpec& spec, int t, const BacktestOptions& opts) {
  const int n_assets = data.assets();
  if (t < opts.window - 1 || t >= data.days()) {
    throw Error(ErrorKind::data, "decision day " + std::to_string(t) + " lacks a full window");
  }
  const int start = t - opts.window + 1;
  const Eigen::MatrixXd sigma_regular = sample_covariance(data.r.middleRows(start, opts.window));

  DayDecision dec;
  dec.w = Eigen::VectorXd::Zero(n_assets + 1);
  if (spec.kind == K::equal || spec.kind == K::market || spec.kind == K::liquidity_weight ||
      spec.kind == K::inverse_liquidity_weight) {
    const Eigen::MatrixXd& betas =
        spec.treatment == T::with ? data.beta_jump_treated : data.beta_jump_untreated;
    const Eigen::VectorXd amount_t = data.amount.row(t).transpose();
    const Eigen::VectorXd beta_t = betas.row(t).transpose();
    const auto bw = benchmark_weights(spec, {{amount_t.data(), static_cast<std::size_t>(n_assets)},
                                             {beta_t.data(), static_cast<std::size_t>(n_assets)}});
    dec.w.tail(n_assets) = bw.w;
    dec.beta_floored = bw.floored;
  } else {
    const Eigen::MatrixXd block = basis_panel(data, spec).middleRows(start, opts.window);
    MvProblem prob;
    prob.cap = opts.cap;
    prob.riskfree_index = 0;
    prob.mu = Eigen::VectorXd::Zero(n_assets + 1);
    prob.sigma = Eigen::MatrixXd::Zero(n_assets + 1, n_assets + 1);
    prob.sigma.bottomRightCorner(n_assets, n_assets) = sample_covariance(block);
    if (spec.kind == K::mv_standard) {
      prob.mu.tail(n_assets) = block.colwise().mean().transpose();
    } else {
      if (!forecasts) throw Error(ErrorKind::data, "forecast portfolios need forecasts");
      const auto& rows = basis_forecasts(*forecasts, spec);
      const int k = t + 1 - opts.window;
      if (k < 0 || k >= static_cast<int>(rows.size()) || rows[k].date_index != t + 1) {
        throw Error(ErrorKind::data, "no forecast row for date index " + std::to_string(t + 1));
      }
      for (int i = 0; i < n_assets; ++i) {
        const auto& e = rows[k].entries[static_cast<std::size_t>(i)];
        prob.mu[i + 1] = e.mu_hat;
        dec.forecast_carried = dec.forecast_carried || e.carried_forward;
      }
    }
    std::vector<double> market(static_cast<std::size_t>(opts.window));
    for (int s = 0; s < opts.window; ++s) market[s] = market_return(data, start + s);
    const RiskAversion ra = risk_aversion(market, opts.lambda_floor);
    prob.lambda = ra.lambda;
    dec.lambda_clamped = ra.clamped;
    const MvSolution sol = solve_mv(prob);
    dec.w = sol.w;
    dec.used_fallback = sol.used_fallback;
  }
  const Eigen::VectorXd risky = dec.w.tail(n_assets);
  dec.volatility = std::sqrt(std::max(0.0, risky.dot(sigma_regular * risky)));
  return dec;
}

const PortfolioReport* BacktestReport::find(int id) const {
  for (const auto& p : portfolios) {
    if (p.spec.id == id) return &p;
  }
  return nullptr;
}

double sharpe_annualized(std::span<const double> daily_returns) {
  if (daily_returns.size() < 2) throw Error(ErrorKind::data, "Sharpe ratio needs at least 2 returns");
  const double sd = stats::sample_std(daily_returns);
  if (!(sd > 0.0)) throw Error(ErrorKind::numeric, "returns have zero standard deviation");
  return (stats::mean(daily_returns) * kDaysPerYear) / (sd * std::sqrt(kDaysPerYear));
}

BacktestReport run_backtest(const UniverseData& data, const BacktestOptions& opts,
                            const ForecastSet* forecasts) {
  data.validate();
  if (opts.window < kMinArmaObservations) throw Error(ErrorKind::config, "window must be at least 50 days");
  if (!(opts.cap > 0.0)) throw Error(ErrorKind::config, "cap must be positive");
  if (opts.portfolios.empty()) throw Error(ErrorKind::config, "no portfolios selected");
  if (data.days() < opts.window + 1) {
    throw Error(ErrorKind::data, "history of " + std::to_string(data.days()) + " days is shorter than window " +
                                     std::to_string(opts.window) + " + 1");
  }
  for (int id : opts.portfolios) portfolio_spec(id);

  ForecastSet computed;
  if (!forecasts && needs_forecasts(opts.portfolios)) {
    RollingOptions ro = opts.forecast;
    ro.window = opts.window;
    ro.threads = opts.threads;
    computed = compute_forecasts(data, ro, opts.portfolios);
    forecasts = &computed;
  }

  BacktestReport report;
  report.window = opts.window;
  report.out_of_sample_days = data.days() - opts.window;
  report.annualized_volatility = opts.annualize_volatility;
  report.portfolios.resize(opts.portfolios.size());
  const double vol_scale = opts.annualize_volatility ? std::sqrt(kDaysPerYear) : 1.0;

  parallel_for(opts.portfolios.size(), opts.threads, [&](std::size_t idx) {
    PortfolioReport& rep = report.portfolios[idx];
    rep.spec = portfolio_spec(opts.portfolios[idx]);
    for (int t = opts.window - 1; t + 1 < data.days(); ++t) {
      const DayDecision dec = decide_weights(data, forecasts, rep.spec, t, opts);
      const double ret = dec.w.tail(data.assets()).dot(data.r.row(t + 1).transpose());
      rep.date_index.push_back(t + 1);
      rep.returns.push_back(ret);
      rep.volatility.push_back(dec.volatility * vol_scale);
      rep.weights.push_back(dec.w);
      rep.lambda_clamped_days += dec.lambda_clamped;
      rep.beta_floored_days += dec.beta_floored;
      rep.fallback_days += dec.used_fallback;
      rep.carried_forecast_days += dec.forecast_carried;
    }
    rep.max_daily_return = *std::max_element(rep.returns.begin(), rep.returns.end());
    rep.max_daily_volatility = *std::max_element(rep.volatility.begin(), rep.volatility.end());
    rep.annual_return = stats::mean(rep.returns) * kDaysPerYear;
    rep.annual_volatility =
        rep.returns.size() > 1 ? stats::sample_std(rep.returns) * std::sqrt(kDaysPerYear) : 0.0;
    try {
      rep.sharpe = sharpe_annualized(rep.returns);
    } catch (const Error&) {
      rep.sharpe.reset();
    }
  });
  return report;
}

std::string performance_summary(const BacktestReport& report) {
  using json = nlohmann::ordered_json;
  const auto value = [&](int id, int panel) -> json {
    const PortfolioReport* p = report.find(id);
    if (!p) return nullptr;
    switch (panel) {
      case 0: return p->max_daily_return;
      case 1: return p->max_daily_volatility;
      default: return p->sharpe ? json(*p->sharpe) : json(nullptr);
    }
  };
  const std::array<const char*, 3> titles = {"Maximum daily portfolio return",
                                             "Maximum daily portfolio volatility",
                                             "Annualized Sharpe ratio"};
  json out;
  out["window"] = report.window;
  out["out_of_sample_days"] = report.out_of_sample_days;
  out["volatility"] = report.annualized_volatility ? "annualized" : "daily";
  json panels;
  for (int panel = 0; panel < 3; ++panel) {
    json pj;
    pj["title"] = titles[panel];
    json bench;
    for (int id = 1; id <= 6; ++id) bench[std::to_string(id)] = value(id, panel);
    pj["benchmarks"] = bench;
    json grid;
    grid["columns"] = {"TMV", "LAMV with treatment", "LAMV without treatment"};
    grid["standard"] = {value(7, panel), value(8, panel), value(9, panel)};
    grid["forecast"] = {value(10, panel), value(11, panel), value(12, panel)};
    pj["mean_variance"] = grid;
    panels[std::string(1, static_cast<char>('A' + panel))] = pj;
  }
  out["panels"] = panels;
  json list = json::array();
  for (const auto& p : report.portfolios) {
    json pj;
    pj["id"] = p.spec.id;
    pj["kind"] = to_string(p.spec.kind);
    pj["treatment"] = to_string(p.spec.treatment);
    pj["return_basis"] = to_string(p.spec.basis);
    pj["days"] = p.returns.size();
    pj["max_daily_return"] = p.max_daily_return;
    pj["max_daily_volatility"] = p.max_daily_volatility;
    pj["annual_return"] = p.annual_return;
    pj["annual_volatility"] = p.annual_volatility;
    pj["sharpe"] = p.sharpe ? json(*p.sharpe) : json(nullptr);
    pj["lambda_clamped_days"] = p.lambda_clamped_days;
    pj["beta_floored_days"] = p.beta_floored_days;
    pj["optimizer_fallback_days"] = p.fallback_days;
    pj["carried_forecast_days"] = p.carried_forecast_days;
    list.push_back(pj);
  }
  out["portfolios"] = list;
  return out.dump(2) + "\n";
}

void write_daily_returns(std::ostream& out, const BacktestReport& report, bool header) {
  if (header) out << "date_index,portfolio_id,return,volatility\n";
  if (report.portfolios.empty()) return;
  char buf[96];
  const std::size_t days = report.portfolios.front().returns.size();
  for (std::size_t d = 0; d < days; ++d) {
    for (const auto& p : report.portfolios) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", p.date_index[d], p.spec.id, p.returns[d],
                    p.volatility[d]);
      out << buf;
    }
  }
}

void write_report_weights(std::ostream& out, const BacktestReport& report, bool header) {
  std::vector<WeightRecord> rows;
  if (!report.portfolios.empty()) {
    const std::size_t days = report.portfolios.front().weights.size();
    for (std::size_t d = 0; d < days; ++d) {
      for (const auto& p : report.portfolios) {
        for (Eigen::Index a = 0; a < p.weights[d].size(); ++a) {
          rows.push_back({p.date_index[d], p.spec.id, static_cast<int>(a), p.weights[d][a]});
        }
      }
    }
  }
  write_weights(out, rows, header);
}

BarrierAudit audit_information_barrier(const UniverseData& data, const BacktestOptions& opts,
                                       int first_t, int days, std::uint64_t seed) {
  data.validate();
  if (first_t < opts.window - 1 || first_t + days >= data.days()) {
    throw Error(ErrorKind::config, "audit window does not fit the history");
  }
  RollingOptions ro = opts.forecast;
  ro.window = opts.window;
  ro.threads = opts.threads;
  const bool with_forecasts = needs_forecasts(opts.portfolios);
  ForecastSet full;
  if (with_forecasts) full = compute_forecasts(data, ro, opts.portfolios);

  BarrierAudit audit;
  audit.portfolios_checked = static_cast<int>(opts.portfolios.size());
  for (int t = first_t; t < first_t + days; ++t) {
    // Perturbed panel truncated after day t + 1.
    UniverseData pert;
    const int keep = t + 2;
    pert.r = data.r.topRows(keep);
    pert.r_adj_treated = data.r_adj_treated.topRows(keep);
    pert.r_adj_untreated = data.r_adj_untreated.topRows(keep);
    pert.beta_jump_treated = data.beta_jump_treated.topRows(keep);
    pert.beta_jump_untreated = data.beta_jump_untreated.topRows(keep);
    pert.amount = data.amount.topRows(keep);
    Philox rng(seed, static_cast<std::uint64_t>(t));
    for (int a = 0; a < data.assets(); ++a) {
      pert.r(t + 1, a) += 0.1 * rng.normal();
      pert.r_adj_treated(t + 1, a) += 0.1 * rng.normal();
      pert.r_adj_untreated(t + 1, a) += 0.1 * rng.normal();
      pert.beta_jump_treated(t + 1, a) *= 1.0 + 3.0 * rng.uniform();
      pert.beta_jump_untreated(t + 1, a) *= 1.0 + 3.0 * rng.uniform();
      pert.amount(t + 1, a) *= 1.0 + 9.0 * rng.uniform();
    }
    ForecastSet pf;
    if (with_forecasts) pf = compute_forecasts(pert, ro, opts.portfolios);
    for (int id : opts.portfolios) {
      const auto& spec = portfolio_spec(id);
      const DayDecision base = decide_weights(data, with_forecasts ? &full : nullptr, spec, t, opts);
      const DayDecision moved = decide_weights(pert, with_forecasts ? &pf : nullptr, spec, t, opts);
      const double diff = (base.w - moved.w).cwiseAbs().maxCoeff();
      audit.max_abs_difference = std::max(audit.max_abs_difference, diff);
      if (diff != 0.0) ++audit.violations;
    }
    ++audit.days_checked;
  }
  return audit;
}

}  // namespace liqjump
