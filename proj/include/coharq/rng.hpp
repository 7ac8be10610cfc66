#pragma once

#include <array>
#include <cstdint>

namespace coharq {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Stateless: every output block is a pure function of (key, counter).
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block counter, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * counter[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * counter[2];
      counter = {static_cast<std::uint32_t>(p1 >> 32) ^ counter[1] ^ key[0],
                 static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ counter[3] ^ key[1],
                 static_cast<std::uint32_t>(p0)};
    }
    return counter;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Independent families of draws inside one trial.
enum class StreamKind : std::uint32_t { Fading = 0, Policy = 1, Auxiliary = 2 };

/// Handle to the random numbers of one trial and one stream family.
///
/// Each call is addressed by (band, slot, index) and maps to a unique Philox
/// counter, so the values never depend on call order or on how trials are
/// distributed over workers.
class Substream {
 public:
  static constexpr std::uint32_t kMaxBand = 1u << 24;
  static constexpr std::uint32_t kMaxSlot = 1u << 20;
  static constexpr std::uint32_t kMaxIndex = 1u << 12;

  Substream(std::uint64_t master_seed, std::uint64_t trial, StreamKind kind)
      : key_{static_cast<std::uint32_t>(master_seed),
             static_cast<std::uint32_t>(master_seed >> 32)},
        trial_(trial),
        kind_(kind) {}

  std::uint64_t trial() const { return trial_; }
  StreamKind kind() const { return kind_; }

  /// Raw 128-bit block. Throws std::out_of_range if an address field overflows.
  Philox4x32::Block block(std::uint32_t band, std::uint32_t slot,
                          std::uint32_t index) const;

  /// Two uniforms: first in (0, 1], second in [0, 1).
  std::array<double, 2> uniforms(std::uint32_t band, std::uint32_t slot,
                                 std::uint32_t index) const;

 private:
  Philox4x32::Key key_;
  std::uint64_t trial_;
  StreamKind kind_;
};

}  // namespace coharq
