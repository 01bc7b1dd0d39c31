#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "liqjump/commands.hpp"
#include "liqjump/config.hpp"
#include "liqjump/error.hpp"
#include "liqjump/manifest.hpp"
#include "test_support.hpp"

using namespace liqjump;
namespace fs = std::filesystem;

namespace {

EnvLookup no_env() {
  return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

RunConfig from_text(const std::string& text, EnvLookup env = no_env()) {
  RunConfig cfg;
  std::istringstream in(text);
  apply_ini(cfg, parse_ini(in));
  apply_env(cfg, env);
  return cfg;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return static_cast<ErrorKind>(0);
}

// Small synthetic run that keeps the command tests fast.
RunConfig tiny_run(const std::string& out, int n_assets, int n_days) {
  RunConfig cfg;
  cfg.out_dir = out;
  cfg.synth.n_assets = n_assets;
  cfg.synth.n_days = n_days;
  cfg.window = 50;
  cfg.max_p = 1;
  cfg.max_q = 1;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Ini, SectionsKeysAndComments) {
  std::istringstream in("# comment\n[Run]\nout_dir = results ; trailing\n\n[synth]\nseed=7\n");
  const auto doc = parse_ini(in);
  EXPECT_EQ(doc.sections.at("run").at("out_dir").first, "results");
  EXPECT_EQ(doc.sections.at("synth").at("seed").second, 6);
}

TEST(Ini, MalformedLinesAreConfigErrors) {
  for (const char* text : {"[run\nx = 1\n", "x = 1\n", "[run]\njust text\n", "[run]\nseed = 1\nseed = 2\n"}) {
    std::istringstream in(text);
    EXPECT_EQ(kind_of([&] { parse_ini(in); }), ErrorKind::config) << text;
  }
}

TEST(Config, AppliesEveryKnownSection) {
  const auto cfg = from_text(
      "[run]\nassets = A00, A02\nthreads = 3\n[liquidity]\ncap = 8\naggregation = compounded\n"
      "[treatment]\nmode = off\nq4_multiplier = 0.75\n[model]\nmax_p = 2\n"
      "[backtest]\nwindow = 120\nportfolios = 1, 7-9\nannualize_volatility = yes\n"
      "[synth]\nwash_mode = hf_small\njump_intensity = 0, 0.5\n");
  EXPECT_EQ(cfg.assets, (std::vector<std::string>{"A00", "A02"}));
  EXPECT_EQ(cfg.threads, 3);
  EXPECT_EQ(cfg.liquidity.cap, 8.0);
  EXPECT_EQ(cfg.liquidity.aggregation, DailyAggregation::compounded);
  EXPECT_EQ(cfg.treatment, TreatmentMode::off);
  EXPECT_EQ(cfg.treatment_spec.q4_multiplier, 0.75);
  EXPECT_EQ(cfg.max_p, 2);
  EXPECT_EQ(cfg.window, 120);
  EXPECT_EQ(cfg.portfolios, (std::vector<int>{1, 7, 8, 9}));
  EXPECT_TRUE(cfg.annualize_volatility);
  EXPECT_EQ(cfg.synth.wash_mode, WashMode::hf_small);
  EXPECT_EQ(cfg.synth.jump_intensity, (std::vector<double>{0.0, 0.5}));
}

TEST(Config, EnvironmentOverridesFile) {
  const auto env = [](const std::string& name) -> std::optional<std::string> {
    if (name == "LIQJUMP_BACKTEST_WINDOW") return "200";
    return std::nullopt;
  };
  EXPECT_EQ(from_text("[backtest]\nwindow = 120\n", env).window, 200);
}

TEST(Config, EveryKeyIsSettable) {
  const std::set<std::string> free_text = {"out_dir", "data_dir", "assets"};
  for (const auto& [section, key] : config_keys()) {
    RunConfig cfg;
    // Typed keys reject a value none of them accepts; free-text keys take it.
    if (free_text.count(key)) {
      EXPECT_NO_THROW(set_config_value(cfg, section, key, "[bad]")) << section << "." << key;
    } else {
      EXPECT_THROW(set_config_value(cfg, section, key, "[bad]"), Error) << section << "." << key;
    }
  }
  RunConfig cfg;
  EXPECT_EQ(kind_of([&] { set_config_value(cfg, "run", "colour", "blue"); }), ErrorKind::config);
}

TEST(Config, BadValuesAreConfigErrors) {
  EXPECT_EQ(kind_of([] { from_text("[backtest]\nwindow = many\n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { from_text("[run]\nassets = \n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { from_text("[treatment]\nmode = sometimes\n"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { from_text("[backtest]\nportfolios = 3-1\n"); }), ErrorKind::config);
}

TEST(Config, ValidationCatchesInconsistentRuns) {
  RunConfig cfg;
  cfg.synth.n_assets = 0;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::config);
  cfg = RunConfig{};
  cfg.portfolios = {1, 1};
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::config);
  cfg = RunConfig{};
  cfg.portfolios = {13};
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::config);
  cfg = RunConfig{};
  cfg.first_day = 400;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::config);
}

TEST(Config, ResolvedDefaults) {
  RunConfig cfg;
  cfg.out_dir = "o";
  cfg.synth.n_assets = 3;
  cfg.first_day = 10;
  EXPECT_EQ(fs::path(cfg.resolved_data_dir()), fs::path("o") / "ticks");
  EXPECT_EQ(cfg.resolved_assets(), (std::vector<std::string>{"A00", "A01", "A02"}));
  EXPECT_EQ(cfg.resolved_days(), cfg.synth.n_days - 10);
  EXPECT_EQ(cfg.first_day_start_ms(), cfg.synth.start_ms + 10 * kMillisPerDay);
}

TEST(IntList, RangesAndErrors) {
  EXPECT_EQ(parse_int_list("1,3, 7-9"), (std::vector<int>{1, 3, 7, 8, 9}));
  EXPECT_THROW(parse_int_list(""), Error);
  EXPECT_THROW(parse_int_list("x"), Error);
}

TEST(Manifest, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Manifest, ListsFilesSortedWithoutItself) {
  test_support::ScratchDir dir("manifest");
  std::ofstream(dir.path() / "b.txt") << "bb";
  fs::create_directories(dir.path() / "a");
  std::ofstream(dir.path() / "a" / "x.csv") << "abc";
  const auto path = write_manifest(dir.str());
  const auto entries = build_manifest(dir.str());
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].path, "a/x.csv");
  EXPECT_EQ(entries[0].bytes, 3u);
  EXPECT_EQ(entries[0].sha256, sha256_hex("abc"));
  EXPECT_EQ(slurp(path), sha256_hex("abc") + "  3  a/x.csv\n" + sha256_hex("bb") + "  2  b.txt\n");
}

TEST(Commands, SynthOneDayWritesOneFilePerAsset) {
  test_support::ScratchDir dir("cmd_synth");
  auto cfg = tiny_run(dir.str(), 4, 1);
  std::ostringstream log;
  cmd_synth(cfg, log);
  std::size_t csv = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "ticks")) csv += e.path().extension() == ".csv";
  EXPECT_EQ(csv, 4u);
  EXPECT_TRUE(fs::exists(dir.path() / kManifestName));
}

TEST(Commands, SynthManifestIsStable) {
  test_support::ScratchDir a("cmd_synth_a"), b("cmd_synth_b");
  std::ostringstream log;
  auto ca = tiny_run(a.str(), 2, 2);
  auto cb = tiny_run(b.str(), 2, 2);
  cb.threads = 2;
  cmd_synth(ca, log);
  cmd_synth(cb, log);
  EXPECT_EQ(slurp(a.path() / kManifestName), slurp(b.path() / kManifestName));
}

TEST(Commands, EmptyAssetListIsConfigError) {
  test_support::ScratchDir dir("cmd_empty");
  auto cfg = tiny_run(dir.str(), 2, 2);
  cfg.synth.n_assets = 0;
  std::ostringstream log;
  EXPECT_EQ(kind_of([&] { cmd_synth(cfg, log); }), ErrorKind::config);
}

TEST(Commands, LiquidityBranchesAndRerun) {
  test_support::ScratchDir dir("cmd_liq");
  auto cfg = tiny_run(dir.str(), 1, 1);
  std::ostringstream log;
  cmd_synth(cfg, log);
  cmd_liquidity(cfg, log);
  const auto liq = dir.path() / "liquidity";
  for (const char* f : {"records_untreated.csv", "records_treated.csv", "beta_stats_untreated.json",
                        "beta_stats_treated.json", "histogram_treated.csv", "stationarity.csv"}) {
    EXPECT_TRUE(fs::exists(liq / f)) << f;
  }
  const auto records = slurp(liq / "records_untreated.csv");
  EXPECT_EQ(std::count(records.begin(), records.end(), '\n'), 2);  // header plus one asset-day
  const auto first = slurp(dir.path() / kManifestName);
  cmd_liquidity(cfg, log);
  EXPECT_EQ(slurp(dir.path() / kManifestName), first);

  test_support::ScratchDir only("cmd_liq_off");
  cfg.out_dir = only.str();
  cfg.data_dir = (dir.path() / "ticks").string();
  cfg.treatment = TreatmentMode::off;
  cmd_liquidity(cfg, log);
  EXPECT_TRUE(fs::exists(only.path() / "liquidity" / "records_untreated.csv"));
  EXPECT_FALSE(fs::exists(only.path() / "liquidity" / "records_treated.csv"));
}

TEST(Commands, BacktestSinglePortfolioAndShortHistory) {
  test_support::ScratchDir dir("cmd_bt");
  auto cfg = tiny_run(dir.str(), 2, 53);
  cfg.portfolios = {1};
  std::ostringstream log, out;
  cmd_synth(cfg, log);
  cmd_backtest(cfg, log);
  const auto j = nlohmann::json::parse(slurp(dir.path() / "backtest" / "report.json"));
  ASSERT_EQ(j["portfolios"].size(), 1u);
  EXPECT_EQ(j["portfolios"][0]["days"].get<int>(), 3);
  EXPECT_TRUE(j["portfolios"][0]["max_daily_return"].is_number());
  cmd_report(cfg, out);
  EXPECT_NE(out.str().find("Panel A"), std::string::npos);

  cfg.window = 53;
  EXPECT_EQ(kind_of([&] { cmd_backtest(cfg, log); }), ErrorKind::data);
}

TEST(Commands, ReportWithoutBacktestIsIoError) {
  test_support::ScratchDir dir("cmd_report");
  auto cfg = tiny_run(dir.str(), 1, 1);
  std::ostringstream out;
  EXPECT_EQ(kind_of([&] { cmd_report(cfg, out); }), ErrorKind::io);
}

#ifdef LIQJUMP_CLI
TEST(Cli, ExitCodesFollowFailureClass) {
  test_support::ScratchDir dir("cli_codes");
  const std::string cli = LIQJUMP_CLI;
  const auto run = [&](const std::string& args) {
    const int status = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  EXPECT_EQ(run("--out " + dir.str() + " --window 10 synth"), 2);
  EXPECT_EQ(run("--config " + dir.str() + "/missing.ini synth"), 3);
  EXPECT_EQ(run("--out " + dir.str() + " report"), 3);
  EXPECT_EQ(run("--bogus synth"), 2);
  EXPECT_EQ(run("--out " + dir.str() + " --portfolios 1 synth"), 0);
}
#endif
