// liqjump: synthetic data, liquidity measures and the portfolio backtest.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
// error, 3 I/O error, 4 data error, 5 numerical failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "liqjump/commands.hpp"
#include "liqjump/config.hpp"
#include "liqjump/error.hpp"

namespace {

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> treatment;
  std::optional<int> window;
  std::optional<std::string> portfolios;
  std::optional<long long> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

liqjump::RunConfig resolve(const Flags& f) {
  using namespace liqjump;
  RunConfig cfg = load_config(f.config, process_env());
  if (f.treatment) set_config_value(cfg, "treatment", "mode", *f.treatment);
  if (f.window) cfg.window = *f.window;
  if (f.portfolios) set_config_value(cfg, "backtest", "portfolios", *f.portfolios);
  if (f.seed) cfg.synth.seed = static_cast<std::uint64_t>(*f.seed);
  if (f.threads) cfg.threads = *f.threads;
  if (f.out) cfg.out_dir = *f.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Liquidity-adjusted returns, wash treatment and mean-variance backtests"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "Configuration file (sections and key = value lines)");
  app.add_option("--treatment", flags.treatment, "Wash treatment branch: on, off or both")
      ->check(CLI::IsMember({"on", "off", "both"}));
  app.add_option("--window", flags.window, "Rolling window length in days");
  app.add_option("--portfolios", flags.portfolios, "Portfolio ids, e.g. 1,7-12");
  app.add_option("--seed", flags.seed, "Synthetic data seed");
  app.add_option("--threads", flags.threads, "Upper bound on worker threads");
  app.add_option("--out", flags.out, "Output directory");

  auto* synth = app.add_subcommand("synth", "Generate synthetic tick files")->fallthrough();
  auto* liquidity = app.add_subcommand("liquidity", "Minute and daily liquidity measures per branch")->fallthrough();
  auto* backtest = app.add_subcommand("backtest", "Forecasts, portfolios and the performance summary")->fallthrough();
  auto* report = app.add_subcommand("report", "Print the backtest report")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(liqjump::ErrorKind::config);
  }

  try {
    const liqjump::RunConfig cfg = resolve(flags);
    if (synth->parsed()) liqjump::cmd_synth(cfg, std::cerr);
    if (liquidity->parsed()) liqjump::cmd_liquidity(cfg, std::cerr);
    if (backtest->parsed()) liqjump::cmd_backtest(cfg, std::cerr);
    if (report->parsed()) liqjump::cmd_report(cfg, std::cout);
  } catch (const liqjump::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
