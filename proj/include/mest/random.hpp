#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mest {

/// Mixes a seed with a path of counters (e.g. {n, replication}) into a new
/// 64-bit seed. Each path element goes through one splitmix64 finalizer round,
/// so the result depends only on (master, path) and never on execution order.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master,
                                        std::initializer_list<std::uint64_t> path);

/// Deterministic random stream: a 64-bit Mersenne twister plus a
/// platform-independent conversion to uniforms on the open interval (0, 1).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  RandomStream(std::uint64_t master, std::initializer_list<std::uint64_t> path)
      : engine_(derive_seed(master, path)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on (0, 1); never returns 0 or 1.
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mest
