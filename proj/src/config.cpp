#include "liqjump/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>

#include "liqjump/error.hpp"

namespace liqjump {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& what) {
  throw Error(ErrorKind::config, key + " = '" + value + "': expected " + what);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto s = trim(v);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad_value(key, v, "a number");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto s = trim(v);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad_value(key, v, "an integer");
  return x;
}

int to_int32(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < INT32_MIN || x > INT32_MAX) bad_value(key, v, "a 32-bit integer");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto s = lower(trim(v));
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto item = trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) bad_value(key, v, "a non-empty list of numbers");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::vector<std::tuple<std::string, std::string, Setter>>& registry() {
  static const std::vector<std::tuple<std::string, std::string, Setter>> table = [] {
    std::vector<std::tuple<std::string, std::string, Setter>> t;
    const auto add = [&](const char* section, const char* key, Setter s) { t.emplace_back(section, key, std::move(s)); };
    // [run]
    add("run", "out_dir", [](RunConfig& c, auto&, auto& v) { c.out_dir = trim(v); });
    add("run", "data_dir", [](RunConfig& c, auto&, auto& v) { c.data_dir = trim(v); });
    add("run", "assets", [](RunConfig& c, auto& k, auto& v) {
      c.assets = split_list(v);
      if (c.assets.empty()) bad_value(k, v, "a non-empty asset list");
    });
    add("run", "first_day", [](RunConfig& c, auto& k, auto& v) { c.first_day = to_int32(k, v); });
    add("run", "n_days", [](RunConfig& c, auto& k, auto& v) { c.n_days = to_int32(k, v); });
    add("run", "threads", [](RunConfig& c, auto& k, auto& v) { c.threads = to_int32(k, v); });
    add("run", "seed", [](RunConfig& c, auto& k, auto& v) { c.synth.seed = static_cast<std::uint64_t>(to_int(k, v)); });
    // [liquidity]
    add("liquidity", "cap", [](RunConfig& c, auto& k, auto& v) { c.liquidity.cap = to_double(k, v); });
    add("liquidity", "aggregation", [](RunConfig& c, auto& k, auto& v) {
      const auto s = lower(trim(v));
      if (s == "first_order_sum") {
        c.liquidity.aggregation = DailyAggregation::first_order_sum;
      } else if (s == "compounded") {
        c.liquidity.aggregation = DailyAggregation::compounded;
      } else {
        bad_value(k, v, "first_order_sum or compounded");
      }
    });
    // [treatment]
    add("treatment", "mode", [](RunConfig& c, auto&, auto& v) { c.treatment = treatment_mode_from_string(lower(trim(v))); });
    add("treatment", "q3_multiplier", [](RunConfig& c, auto& k, auto& v) { c.treatment_spec.q3_multiplier = to_double(k, v); });
    add("treatment", "q4_multiplier", [](RunConfig& c, auto& k, auto& v) { c.treatment_spec.q4_multiplier = to_double(k, v); });
    // [model]
    add("model", "max_p", [](RunConfig& c, auto& k, auto& v) { c.max_p = to_int32(k, v); });
    add("model", "max_q", [](RunConfig& c, auto& k, auto& v) { c.max_q = to_int32(k, v); });
    add("model", "order_refit_every", [](RunConfig& c, auto& k, auto& v) { c.order_refit_every = to_int32(k, v); });
    add("model", "coef_refit_every", [](RunConfig& c, auto& k, auto& v) { c.coef_refit_every = to_int32(k, v); });
    add("model", "variance_refit_every", [](RunConfig& c, auto& k, auto& v) { c.variance_refit_every = to_int32(k, v); });
    // [backtest]
    add("backtest", "window", [](RunConfig& c, auto& k, auto& v) { c.window = to_int32(k, v); });
    add("backtest", "portfolios", [](RunConfig& c, auto& k, auto& v) {
      try {
        c.portfolios = parse_int_list(v);
      } catch (const Error&) {
        bad_value(k, v, "a list of portfolio ids");
      }
    });
    add("backtest", "cap", [](RunConfig& c, auto& k, auto& v) { c.cap = to_double(k, v); });
    add("backtest", "lambda_floor", [](RunConfig& c, auto& k, auto& v) { c.lambda_floor = to_double(k, v); });
    add("backtest", "annualize_volatility", [](RunConfig& c, auto& k, auto& v) { c.annualize_volatility = to_bool(k, v); });
    // [synth]
    add("synth", "seed", [](RunConfig& c, auto& k, auto& v) { c.synth.seed = static_cast<std::uint64_t>(to_int(k, v)); });
    add("synth", "n_assets", [](RunConfig& c, auto& k, auto& v) { c.synth.n_assets = to_int32(k, v); });
    add("synth", "n_days", [](RunConfig& c, auto& k, auto& v) { c.synth.n_days = to_int32(k, v); });
    add("synth", "start_ms", [](RunConfig& c, auto& k, auto& v) { c.synth.start_ms = to_int(k, v); });
    add("synth", "base_price", [](RunConfig& c, auto& k, auto& v) { c.synth.base_price = to_double_list(k, v); });
    add("synth", "jump_intensity", [](RunConfig& c, auto& k, auto& v) { c.synth.jump_intensity = to_double_list(k, v); });
    add("synth", "jump_mean", [](RunConfig& c, auto& k, auto& v) { c.synth.jump_mean = to_double_list(k, v); });
    add("synth", "minute_volatility", [](RunConfig& c, auto& k, auto& v) { c.synth.minute_volatility = to_double(k, v); });
    add("synth", "drift_persistence", [](RunConfig& c, auto& k, auto& v) { c.synth.drift_persistence = to_double(k, v); });
    add("synth", "drift_volatility", [](RunConfig& c, auto& k, auto& v) { c.synth.drift_volatility = to_double(k, v); });
    add("synth", "jump_sd", [](RunConfig& c, auto& k, auto& v) { c.synth.jump_sd = to_double(k, v); });
    add("synth", "jump_volume_multiple", [](RunConfig& c, auto& k, auto& v) { c.synth.jump_volume_multiple = to_double(k, v); });
    add("synth", "trade_rate", [](RunConfig& c, auto& k, auto& v) { c.synth.trade_rate = to_double(k, v); });
    add("synth", "rate_sensitivity", [](RunConfig& c, auto& k, auto& v) { c.synth.rate_sensitivity = to_double(k, v); });
    add("synth", "size_log_mean", [](RunConfig& c, auto& k, auto& v) { c.synth.size_log_mean = to_double(k, v); });
    add("synth", "size_log_sd", [](RunConfig& c, auto& k, auto& v) { c.synth.size_log_sd = to_double(k, v); });
    add("synth", "price_noise", [](RunConfig& c, auto& k, auto& v) { c.synth.price_noise = to_double(k, v); });
    add("synth", "wash_mode", [](RunConfig& c, auto&, auto& v) { c.synth.wash_mode = wash_mode_from_string(lower(trim(v))); });
    add("synth", "burst_rate", [](RunConfig& c, auto& k, auto& v) { c.synth.burst_rate = to_double(k, v); });
    add("synth", "burst_volume_fraction", [](RunConfig& c, auto& k, auto& v) { c.synth.burst_volume_fraction = to_double(k, v); });
    add("synth", "burst_exponent", [](RunConfig& c, auto& k, auto& v) { c.synth.burst_exponent = to_double(k, v); });
    add("synth", "wash_jitter", [](RunConfig& c, auto& k, auto& v) { c.synth.wash_jitter = to_double(k, v); });
    add("synth", "whale_rate", [](RunConfig& c, auto& k, auto& v) { c.synth.whale_rate = to_double(k, v); });
    add("synth", "whale_volume_multiple", [](RunConfig& c, auto& k, auto& v) { c.synth.whale_volume_multiple = to_double(k, v); });
    return t;
  }();
  return table;
}

std::string env_name(const std::string& section, const std::string& key) {
  std::string s = "LIQJUMP_" + section + "_" + key;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

}  // namespace

IniDocument parse_ini(std::istream& in, const std::string& source) {
  IniDocument doc;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto where = source + ":" + std::to_string(lineno);
    std::string s = line;
    const auto comment = s.find_first_of("#;");
    if (comment != std::string::npos) s.erase(comment);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(ErrorKind::config, where + ": unterminated section header");
      section = lower(trim(std::string_view(s).substr(1, s.size() - 2)));
      if (section.empty()) throw Error(ErrorKind::config, where + ": empty section name");
      doc.sections[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::config, where + ": expected key = value");
    if (section.empty()) throw Error(ErrorKind::config, where + ": key outside any section");
    const auto key = lower(trim(std::string_view(s).substr(0, eq)));
    if (key.empty()) throw Error(ErrorKind::config, where + ": empty key");
    auto& keys = doc.sections[section];
    if (keys.count(key)) throw Error(ErrorKind::config, where + ": duplicate key '" + key + "'");
    keys[key] = {trim(std::string_view(s).substr(eq + 1)), lineno};
  }
  if (in.bad()) throw Error(ErrorKind::io, "cannot read " + source);
  return doc;
}

std::string to_string(TreatmentMode mode) {
  switch (mode) {
    case TreatmentMode::on: return "on";
    case TreatmentMode::off: return "off";
    case TreatmentMode::both: return "both";
  }
  return "?";
}

TreatmentMode treatment_mode_from_string(const std::string& s) {
  if (s == "on") return TreatmentMode::on;
  if (s == "off") return TreatmentMode::off;
  if (s == "both") return TreatmentMode::both;
  throw Error(ErrorKind::config, "treatment must be on, off or both, not '" + s + "'");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split_list(s)) {
    const auto dash = item.find('-', 1);
    if (dash != std::string::npos) {
      const int lo = to_int32("range", item.substr(0, dash));
      const int hi = to_int32("range", item.substr(dash + 1));
      if (hi < lo) throw Error(ErrorKind::config, "descending range '" + item + "'");
      for (int i = lo; i <= hi; ++i) out.push_back(i);
    } else {
      out.push_back(to_int32("list", item));
    }
  }
  if (out.empty()) throw Error(ErrorKind::config, "empty list '" + s + "'");
  return out;
}

void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key,
                      const std::string& value) {
  for (const auto& [sec, k, setter] : registry()) {
    if (sec == section && k == key) {
      setter(cfg, section + "." + key, value);
      return;
    }
  }
  throw Error(ErrorKind::config, "unknown configuration key [" + section + "] " + key);
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [sec, k, setter] : registry()) out.emplace_back(sec, k);
  return out;
}

void apply_ini(RunConfig& cfg, const IniDocument& doc) {
  for (const auto& [section, keys] : doc.sections) {
    for (const auto& [key, entry] : keys) {
      try {
        set_config_value(cfg, section, key, entry.first);
      } catch (const Error& e) {
        throw Error(e.kind(), "line " + std::to_string(entry.second) + ": " + e.what());
      }
    }
  }
}

void apply_env(RunConfig& cfg, const EnvLookup& lookup) {
  for (const auto& [section, key, setter] : registry()) {
    const auto name = env_name(section, key);
    if (const auto v = lookup(name)) {
      try {
        setter(cfg, section + "." + key, *v);
      } catch (const Error& e) {
        throw Error(e.kind(), name + ": " + e.what());
      }
    }
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

RunConfig load_config(const std::optional<std::string>& path, const EnvLookup& lookup) {
  RunConfig cfg;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw Error(ErrorKind::io, "cannot open config " + *path);
    apply_ini(cfg, parse_ini(in, *path));
  }
  apply_env(cfg, lookup);
  return cfg;
}

void RunConfig::validate() const {
  const auto fail = [](const std::string& m) { throw Error(ErrorKind::config, m); };
  if (window < 50) fail("window must be at least 50 days");
  if (!(cap > 0.0)) fail("cap must be positive");
  if (!(lambda_floor > 0.0)) fail("lambda_floor must be positive");
  if (!(liquidity.cap >= 1.0)) fail("liquidity cap must be at least 1");
  if (threads < 1) fail("threads must be at least 1");
  if (max_p < 0 || max_q < 0 || max_p > 4 || max_q > 4 || max_p + max_q == 0) {
    fail("model grid bounds must lie in [0, 4] and not both be zero");
  }
  if (order_refit_every < 1 || coef_refit_every < 1 || variance_refit_every < 1) fail("refit cadences must be at least 1");
  if (first_day < 0) fail("first_day must be non-negative");
  if (n_days < 0) fail("n_days must be non-negative");
  if (out_dir.empty()) fail("out_dir must not be empty");
  if (portfolios.empty()) fail("portfolio selection is empty");
  std::set<int> seen;
  for (int id : portfolios) {
    if (id < 1 || id > 12) fail("portfolio id " + std::to_string(id) + " outside 1..12");
    if (!seen.insert(id).second) fail("portfolio id " + std::to_string(id) + " listed twice");
  }
  treatment_spec.validate();
  synth.validate();
  if (resolved_assets().empty()) fail("asset list is empty");
  if (resolved_days() < 1) fail("date range is empty");
}

std::string RunConfig::resolved_data_dir() const {
  if (!data_dir.empty()) return data_dir;
  return (std::filesystem::path(out_dir) / "ticks").string();
}

std::vector<std::string> RunConfig::resolved_assets() const {
  if (!assets.empty()) return assets;
  std::vector<std::string> out;
  for (int a = 0; a < synth.n_assets; ++a) out.push_back(asset_name(a));
  return out;
}

int RunConfig::resolved_days() const { return n_days > 0 ? n_days : synth.n_days - first_day; }

std::int64_t RunConfig::first_day_start_ms() const {
  return synth.start_ms + static_cast<std::int64_t>(first_day) * kMillisPerDay;
}

}  // namespace liqjump
