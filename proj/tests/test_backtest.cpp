#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "liqjump/backtest.hpp"
#include "liqjump/error.hpp"
#include "liqjump/rng.hpp"
#include "liqjump/stats.hpp"

using namespace liqjump;

namespace {

UniverseData random_universe(int days, int assets, std::uint64_t seed) {
  Philox rng(seed, 0);
  UniverseData u;
  u.r.resize(days, assets);
  u.r_adj_treated.resize(days, assets);
  u.r_adj_untreated.resize(days, assets);
  u.beta_jump_treated.resize(days, assets);
  u.beta_jump_untreated.resize(days, assets);
  u.amount.resize(days, assets);
  for (int d = 0; d < days; ++d) {
    for (int a = 0; a < assets; ++a) {
      u.r(d, a) = 0.001 + 0.02 * rng.normal();
      u.r_adj_treated(d, a) = 0.8 * u.r(d, a) + 0.005 * rng.normal();
      u.r_adj_untreated(d, a) = 0.9 * u.r(d, a) + 0.005 * rng.normal();
      u.beta_jump_treated(d, a) = rng.lognormal(0.0, 0.5);
      u.beta_jump_untreated(d, a) = rng.lognormal(0.0, 0.6);
      u.amount(d, a) = rng.lognormal(10.0, 1.0);
    }
  }
  return u;
}

UniverseData constant_universe(int days, int assets, double r) {
  auto u = random_universe(days, assets, 1);
  u.r.setConstant(r);
  return u;
}

BacktestOptions small_options(std::vector<int> portfolios, int window = 60) {
  BacktestOptions o;
  o.window = window;
  o.portfolios = std::move(portfolios);
  o.forecast.max_p = 1;
  o.forecast.max_q = 1;
  return o;
}

}  // namespace

TEST(Catalog, TwelvePortfoliosInOrder) {
  const auto& c = portfolio_catalog();
  for (int i = 0; i < kPortfolioCount; ++i) EXPECT_EQ(c[i].id, i + 1);
  EXPECT_EQ(portfolio_spec(8).basis, ReturnBasis::liquidity_adjusted);
  EXPECT_EQ(portfolio_spec(11).treatment, TreatmentTag::with);
  EXPECT_EQ(portfolio_spec(10).kind, PortfolioKind::mv_forecast);
  EXPECT_THROW(portfolio_spec(13), Error);
}

TEST(Benchmarks, EqualWeights) {
  const std::vector<double> amount(10, 1.0), beta(10, 1.0);
  const auto w = benchmark_weights(portfolio_spec(1), {amount, beta}).w;
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(w[i], 0.10);
}

TEST(Benchmarks, LiquidityAndInverse) {
  const std::vector<double> amount{1.0, 1.0}, beta{2.0, 1.0};
  const auto w = benchmark_weights(portfolio_spec(3), {amount, beta}).w;
  EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-15);
  const auto v = benchmark_weights(portfolio_spec(6), {amount, beta}).w;
  EXPECT_NEAR(v[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(v[1], 2.0 / 3.0, 1e-15);
}

TEST(Benchmarks, MarketAndZeroBetaFloor) {
  const std::vector<double> amount{3.0, 1.0}, beta{0.0, 1.0};
  const auto m = benchmark_weights(portfolio_spec(2), {amount, beta}).w;
  EXPECT_DOUBLE_EQ(m[0], 0.75);
  const auto inv = benchmark_weights(portfolio_spec(5), {amount, beta});
  EXPECT_TRUE(inv.floored);
  EXPECT_GT(inv.w[0], 0.99);
}

TEST(Backtest, ConstantReturnsEqualPortfolio) {
  const auto u = constant_universe(62, 3, 0.001);
  const auto rep = run_backtest(u, small_options({1}));
  ASSERT_EQ(rep.portfolios.size(), 1u);
  const auto& p = rep.portfolios[0];
  ASSERT_EQ(p.returns.size(), 2u);
  EXPECT_NEAR(p.returns[0], 0.001, 1e-15);
  EXPECT_NEAR(p.returns[1], 0.001, 1e-15);
  EXPECT_EQ(p.date_index, (std::vector<int>{60, 61}));
  EXPECT_FALSE(p.sharpe.has_value());
}

TEST(Backtest, EqualPortfolioIsCrossSectionalMean) {
  const auto u = random_universe(80, 4, 2);
  const auto rep = run_backtest(u, small_options({1}));
  const auto& p = rep.portfolios[0];
  for (std::size_t k = 0; k < p.returns.size(); ++k) {
    EXPECT_NEAR(p.returns[k], u.r.row(p.date_index[k]).mean(), 1e-12);
  }
}

TEST(Backtest, StandardMvDiffersOnlyThroughBasis) {
  auto u = random_universe(90, 4, 3);
  u.r_adj_treated = u.r;
  const auto opts = small_options({7, 8});
  const int t = 70;
  const auto w7 = decide_weights(u, nullptr, portfolio_spec(7), t, opts).w;
  const auto w8 = decide_weights(u, nullptr, portfolio_spec(8), t, opts).w;
  EXPECT_EQ(w7, w8);
  // Asset 3 holds no weight, so a higher mean must pull some in.
  ASSERT_EQ(w8[4], 0.0);
  u.r_adj_treated.col(3).array() += 0.01;
  EXPECT_EQ(decide_weights(u, nullptr, portfolio_spec(7), t, opts).w, w7);
  EXPECT_NE(decide_weights(u, nullptr, portfolio_spec(8), t, opts).w, w8);
}

TEST(Backtest, WeightsFeasibleEveryDay) {
  const auto u = random_universe(75, 5, 4);
  const auto rep = run_backtest(u, small_options({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
  EXPECT_EQ(rep.portfolios.size(), 12u);
  for (const auto& p : rep.portfolios) {
    for (const auto& w : p.weights) {
      EXPECT_NEAR(w.sum(), 1.0, 1e-12);
      EXPECT_GE(w.minCoeff(), -1e-12);
      if (p.spec.kind == PortfolioKind::mv_standard || p.spec.kind == PortfolioKind::mv_forecast) {
        EXPECT_LE(w.tail(5).maxCoeff(), 0.3 + 1e-12);
      } else {
        EXPECT_EQ(w[0], 0.0);
      }
    }
  }
}

TEST(Backtest, RepeatedRunsAreIdentical) {
  const auto u = random_universe(70, 3, 5);
  auto opts = small_options({1, 7, 10, 11});
  const auto a = run_backtest(u, opts);
  opts.threads = 3;
  const auto b = run_backtest(u, opts);
  std::ostringstream sa, sb;
  write_daily_returns(sa, a);
  write_daily_returns(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(performance_summary(a), performance_summary(b));
}

TEST(Backtest, WindowLongerThanHistoryIsError) {
  const auto u = random_universe(60, 2, 6);
  EXPECT_THROW(run_backtest(u, small_options({1}, 60)), Error);
}

TEST(Backtest, InformationBarrierHolds) {
  const auto u = random_universe(70, 3, 7);
  const auto audit = audit_information_barrier(u, small_options({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}), 59, 5, 99);
  EXPECT_EQ(audit.days_checked, 5);
  EXPECT_EQ(audit.violations, 0);
  EXPECT_EQ(audit.max_abs_difference, 0.0);
}

TEST(Sharpe, DirectFormula) {
  // Two-point sample with mean 0.001 and sample sd 0.01.
  const double d = 0.01 / std::sqrt(2.0);
  const std::vector<double> x{0.001 + d, 0.001 - d};
  EXPECT_NEAR(sharpe_annualized(x), 0.365 / (0.01 * std::sqrt(365.0)), 1e-12);
  EXPECT_NEAR(sharpe_annualized(x), 1.9105, 1e-4);
}

TEST(Sharpe, AntisymmetryAndDegenerate) {
  const std::vector<double> x{0.01, -0.004, 0.02, 0.003};
  std::vector<double> y;
  for (double v : x) y.push_back(-v);
  EXPECT_DOUBLE_EQ(sharpe_annualized(y), -sharpe_annualized(x));
  EXPECT_THROW(sharpe_annualized(std::vector<double>(5, 0.002)), Error);
}

TEST(PerformanceSummary, MaxDailyReturnProjection) {
  auto u = constant_universe(53, 1, 0.0);
  u.r(50, 0) = 0.01;
  u.r(51, 0) = -0.02;
  u.r(52, 0) = 0.03;
  const auto rep = run_backtest(u, small_options({1}, 50));
  const auto j = nlohmann::json::parse(performance_summary(rep));
  EXPECT_DOUBLE_EQ(j["panels"]["A"]["benchmarks"]["1"].get<double>(), 0.03);
  EXPECT_DOUBLE_EQ(j["portfolios"][0]["max_daily_return"].get<double>(), rep.portfolios[0].max_daily_return);
  EXPECT_TRUE(j["panels"]["A"]["benchmarks"]["2"].is_null());
}

TEST(PerformanceSummary, TwelveColumns) {
  const auto u = random_universe(62, 3, 8);
  const auto rep = run_backtest(u, small_options({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}));
  const auto j = nlohmann::json::parse(performance_summary(rep));
  for (const char* panel : {"A", "B", "C"}) {
    const auto& pj = j["panels"][panel];
    std::size_t filled = 0;
    for (const auto& [k, v] : pj["benchmarks"].items()) filled += !v.is_null();
    for (const auto& v : pj["mean_variance"]["standard"]) filled += !v.is_null();
    for (const auto& v : pj["mean_variance"]["forecast"]) filled += !v.is_null();
    EXPECT_EQ(filled, 12u);
  }
  EXPECT_EQ(j["portfolios"].size(), 12u);
  const auto* p9 = rep.find(9);
  ASSERT_NE(p9, nullptr);
  EXPECT_DOUBLE_EQ(j["panels"]["B"]["mean_variance"]["standard"][2].get<double>(), p9->max_daily_volatility);
}
