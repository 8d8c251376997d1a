#pragma once

#include <cstdint>

namespace evdesign {

/// What a uniform draw is used for. Part of the stream address so that
/// changing one purpose never shifts the draws of another.
enum class Purpose : std::uint64_t {
  entry = 1,
  event = 2,
  dropout = 3,
  generic = 4,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stable hash of a seed and a tag; used to derive per-cell master seeds.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) noexcept {
  return splitmix64(splitmix64(master ^ 0x5bd1e9955bd1e995ULL) ^ tag);
}

struct StreamKey {
  std::uint64_t master = 0;
  std::uint64_t replicate = 0;
  std::uint64_t patient = 0;
  Purpose purpose = Purpose::generic;
};

/// Counter-addressed uniform generator: the k-th draw of a stream is a pure
/// function of (key, k), so draws never depend on execution order.
class CounterStream {
 public:
  explicit CounterStream(StreamKey key) noexcept
      : base_(splitmix64(splitmix64(splitmix64(splitmix64(key.master) ^ key.replicate) ^
                                    key.patient) ^
                         static_cast<std::uint64_t>(key.purpose))) {}

  std::uint64_t next_bits() noexcept { return splitmix64(base_ ^ splitmix64(counter_++)); }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_bits() >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t position() const noexcept { return counter_; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace evdesign
