#pragma once

#include <array>
#include <cstdint>

namespace liqjump {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// Round multipliers 0xD2511F53 / 0xCD9E8D57, Weyl key increments
// 0x9E3779B9 / 0xBB67AE85. The key is the 64-bit seed; the 128-bit counter
// is (block, stream), so every (seed, stream) pair is an independent,
// reproducible sequence regardless of the order in which streams are drawn.
class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1); never returns 0.
  double uniform_pos();
  double normal();
  double lognormal(double mu, double sigma);
  double exponential(double rate);
  std::uint64_t poisson(double mean);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t block_ = 0;
  std::uint64_t stream_;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Packs (asset, day, purpose) into a stream id. Purposes below 256.
constexpr std::uint64_t stream_id(std::uint64_t asset, std::uint64_t day, std::uint64_t purpose) {
  return (asset << 40) ^ (day << 8) ^ purpose;
}

}  // namespace liqjump
