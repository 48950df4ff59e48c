#pragma once

// Counter-based random streams (Philox4x32-10). A draw is addressed by
// (seed, stream, counter) and is reproducible regardless of thread layout:
// cloning a stream with a fresh id is the parallelism mechanism.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace pphi {

struct Philox4x32 {
  uint32_t v[4];
};

inline Philox4x32 philox4x32_10(uint32_t c0, uint32_t c1, uint32_t c2,
                                uint32_t c3, uint32_t k0, uint32_t k1) {
  constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    uint64_t p0 = uint64_t(M0) * c0;
    uint64_t p1 = uint64_t(M1) * c2;
    uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
    uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
    uint32_t n0 = hi1 ^ c1 ^ k0;
    uint32_t n1 = lo1;
    uint32_t n2 = hi0 ^ c3 ^ k1;
    uint32_t n3 = lo0;
    c0 = n0; c1 = n1; c2 = n2; c3 = n3;
    k0 += W0; k1 += W1;
  }
  return {{c0, c1, c2, c3}};
}

// One stream of i.i.d. variates indexed by a 64-bit counter.
struct RngStream {
  uint64_t seed = 0;
  uint64_t stream = 0;

  RngStream() = default;
  RngStream(uint64_t seed_, uint64_t stream_) : seed(seed_), stream(stream_) {}

  RngStream substream(uint64_t id) const {
    // mix so that (stream, id) pairs do not collide for id < 2^32
    return RngStream(seed, stream * 0x100000000ull + id + 1);
  }

  Philox4x32 block(uint64_t ctr) const {
    return philox4x32_10(uint32_t(ctr), uint32_t(ctr >> 32), uint32_t(stream),
                         uint32_t(stream >> 32), uint32_t(seed),
                         uint32_t(seed >> 32));
  }

  // uniform on (0,1), 53 effective bits
  double uniform(uint64_t ctr) const {
    Philox4x32 b = block(ctr);
    uint64_t x = (uint64_t(b.v[0]) << 32) | b.v[1];
    return (double(x >> 11) + 0.5) * 0x1p-53;
  }

  // standard normal pair by Box-Muller from one block
  void normal_pair(uint64_t ctr, double& z0, double& z1) const {
    Philox4x32 b = block(ctr);
    uint64_t x = (uint64_t(b.v[0]) << 32) | b.v[1];
    uint64_t y = (uint64_t(b.v[2]) << 32) | b.v[3];
    double u1 = (double(x >> 11) + 0.5) * 0x1p-53;
    double u2 = (double(y >> 11) + 0.5) * 0x1p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    z0 = r * std::cos(a);
    z1 = r * std::sin(a);
  }

  double normal(uint64_t ctr) const {
    double z0, z1;
    normal_pair(ctr, z0, z1);
    return z0;
  }
};

} // namespace pphi
