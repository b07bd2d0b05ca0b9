#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace knockoffs {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// Counter-based so independent streams can be derived from a master seed
// by key mixing; a stream never needs to be "skipped ahead" to be split.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter round10(Counter ctr, Key key);
};

// A seedable stream of uniforms / normals backed by Philox4x32-10.
// Streams are value types; copying one forks its exact state.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t key);

  // Derives an independent child stream. `label` namespaces the purpose
  // (init / noise / dropout / sampling / ...); extra indices select
  // per-epoch, per-row, per-block substreams.
  RngStream derive(std::string_view label, std::uint64_t a = 0,
                   std::uint64_t b = 0) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (lo, hi).
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; pairs are cached within the stream.
  double normal();
  double normal(double mean, double sd);
  // Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;  // empty
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;

  void refill();
};

// 64-bit mixing used for seed/stream derivation (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);
// FNV-1a 64-bit over raw bytes; used as a content fingerprint, not crypto.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace knockoffs
