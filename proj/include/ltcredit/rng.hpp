#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ltcredit {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Deterministic, splittable random stream (xoshiro256** seeded through
/// splitmix64). Satisfies UniformRandomBitGenerator so it plugs into the
/// <random> distributions.
///
/// `split(i)` derives an independent child stream from the parent's seed and
/// the index `i` only; it does not advance the parent. Replication `i` of a
/// run always draws from `RngStream(seed).split(i)`, which makes results
/// independent of how replications are partitioned across threads.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0) noexcept : seed_(seed) { reseed(seed); }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = detail::rotl(s_[3], 45);
    return result;
  }

  RngStream split(std::uint64_t index) const noexcept {
    std::uint64_t mix = seed_ ^ 0x6a09e667f3bcc909ULL;
    const std::uint64_t a = detail::splitmix64(mix);
    std::uint64_t idx = index + 0xbb67ae8584caa73bULL;
    const std::uint64_t b = detail::splitmix64(idx);
    return RngStream(a ^ detail::rotl(b, 23) ^ (b >> 7));
  }

  std::uint64_t seed() const noexcept { return seed_; }

  /// Uniform on the open interval (0, 1); never returns 0 or 1.
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard exponential, strictly positive and finite.
  double exponential() noexcept { return -std::log(uniform_open()); }

 private:
  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = detail::splitmix64(sm);
  }

  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace ltcredit
