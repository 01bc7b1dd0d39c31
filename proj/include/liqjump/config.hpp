#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "liqjump/ingest.hpp"
#include "liqjump/liquidity.hpp"
#include "liqjump/synth.hpp"

namespace liqjump {

// Plain-text configuration, one `key = value` per line under `[section]`
// headers; `#` and `;` start comments. See docs/config.md for the keys.
struct IniDocument {
  // section -> key -> (value, line number)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections;
};

IniDocument parse_ini(std::istream& in, const std::string& source = "<config>");

enum class TreatmentMode { on, off, both };

std::string to_string(TreatmentMode mode);
TreatmentMode treatment_mode_from_string(const std::string& s);

struct RunConfig {
  std::string data_dir;  // empty: <out_dir>/ticks
  std::vector<std::string> assets;  // empty: every synthetic asset
  int first_day = 0;
  int n_days = 0;  // 0: synth.n_days - first_day
  TreatmentMode treatment = TreatmentMode::both;
  int window = 365;
  int max_p = 4;
  int max_q = 4;
  int order_refit_every = 30;
  int coef_refit_every = 1;
  int variance_refit_every = 30;
  std::vector<int> portfolios = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  double cap = 0.3;
  double lambda_floor = 0.1;
  bool annualize_volatility = false;
  LiquidityOptions liquidity;
  TreatmentSpec treatment_spec;
  std::string out_dir = "out";
  int threads = 1;
  SynthSpec synth;

  void validate() const;
  std::string resolved_data_dir() const;
  std::vector<std::string> resolved_assets() const;
  int resolved_days() const;
  std::int64_t first_day_start_ms() const;
};

// Applies every key of the document; unknown sections or keys are errors.
void apply_ini(RunConfig& cfg, const IniDocument& doc);

// Environment overrides named LIQJUMP_<SECTION>_<KEY> in upper case.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
void apply_env(RunConfig& cfg, const EnvLookup& lookup);
EnvLookup process_env();

// Sets one key as if it appeared in the file.
void set_config_value(RunConfig& cfg, const std::string& section, const std::string& key,
                      const std::string& value);

// Every recognized (section, key) pair.
std::vector<std::pair<std::string, std::string>> config_keys();

// File (optional) then environment.
RunConfig load_config(const std::optional<std::string>& path, const EnvLookup& lookup);

std::vector<int> parse_int_list(const std::string& s);

}  // namespace liqjump
