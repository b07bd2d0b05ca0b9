#include "knockoffs/rng.hpp"

#include <cmath>
#include <numbers>

namespace knockoffs {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline std::uint32_t mulhi32(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::uint32_t>(
      (static_cast<std::uint64_t>(a) * b) >> 32);
}

}  // namespace

Philox4x32::Counter Philox4x32::round10(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint32_t hi0 = mulhi32(kPhiloxM0, ctr[0]);
    const std::uint32_t lo0 = kPhiloxM0 * ctr[0];
    const std::uint32_t hi1 = mulhi32(kPhiloxM1, ctr[2]);
    const std::uint32_t lo1 = kPhiloxM1 * ctr[2];
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

RngStream::RngStream(std::uint64_t key) : key_(key) {}

RngStream RngStream::derive(std::string_view label, std::uint64_t a,
                            std::uint64_t b) const {
  std::uint64_t h = fnv1a64(label.data(), label.size(), key_ ^ 0xA5A5A5A5A5A5A5A5ull);
  h = mix64(h ^ mix64(a));
  h = mix64(h ^ mix64(b ^ 0x517CC1B727220A95ull));
  return RngStream(h);
}

void RngStream::refill() {
  const Philox4x32::Counter ctr = {
      static_cast<std::uint32_t>(counter_),
      static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u};
  const Philox4x32::Key key = {static_cast<std::uint32_t>(key_),
                               static_cast<std::uint32_t>(key_ >> 32)};
  block_ = Philox4x32::round10(ctr, key);
  ++counter_;
  block_pos_ = 0;
}

std::uint32_t RngStream::next_u32() {
  if (block_pos_ >= 4) refill();
  return block_[block_pos_++];
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_normal_ = true;
  return r * std::cos(theta);
}

double RngStream::normal(double mean, double sd) {
  return mean + sd * normal();
}

std::uint64_t RngStream::below(std::uint64_t n) {
  // Rejection sampling on the top bits to stay unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

}  // namespace knockoffs
