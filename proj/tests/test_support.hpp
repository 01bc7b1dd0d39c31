#pragma once

#include <filesystem>
#include <string>

#include "liqjump/synth.hpp"

namespace liqjump::test_support {

// Dense, volume-coupled clean trading: the regime in which the liquidity
// adjustment leaves quiet days near equilibrium.
inline SynthSpec clean_market_spec(int n_assets, int n_days, std::uint64_t seed = 1) {
  SynthSpec s;
  s.seed = seed;
  s.n_assets = n_assets;
  s.n_days = n_days;
  s.trade_rate = 10.0;
  s.rate_sensitivity = 10.0;
  s.size_log_sd = 0.3;
  s.wash_mode = WashMode::none;
  return s;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("liqjump_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace liqjump::test_support
