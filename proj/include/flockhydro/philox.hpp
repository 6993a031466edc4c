#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace flockhydro {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Each (key, counter) pair maps to four independent 32-bit words, so a
/// particle's random numbers depend only on (seed, particle, step) and not on
/// how work is split across threads.
class Philox4x32 {
public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

private:
  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
    const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Stream of uniforms and normals addressed by (seed, a, b, c).
struct CounterRng {
  std::uint64_t seed = 0;

  std::array<std::uint32_t, 4> words(std::uint64_t a, std::uint32_t b, std::uint32_t c) const {
    return Philox4x32::generate({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32), b, c},
                                {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  }

  /// Two uniforms in (0, 1) with 53-bit resolution.
  std::array<double, 2> uniforms(std::uint64_t a, std::uint32_t b, std::uint32_t c) const {
    const auto w = words(a, b, c);
    return {to_unit(w[0], w[1]), to_unit(w[2], w[3])};
  }

  /// Two standard normals by Box-Muller.
  std::array<double, 2> normals(std::uint64_t a, std::uint32_t b, std::uint32_t c) const {
    const auto u = uniforms(a, b, c);
    const double rad = std::sqrt(-2.0 * std::log(u[0]));
    const double ang = 2.0 * std::numbers::pi * u[1];
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }
};

}  // namespace flockhydro
