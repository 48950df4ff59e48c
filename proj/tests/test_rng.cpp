#include <catch2/catch_amalgamated.hpp>

#include "pphi/rng.hpp"

#include <cmath>
#include <set>

using namespace pphi;

// Known-answer vectors for Philox4x32-10 from the reference implementation's
// test suite (Random123 kat_vectors).
TEST_CASE("philox4x32-10 known answers") {
  {
    Philox4x32 r = philox4x32_10(0, 0, 0, 0, 0, 0);
    CHECK(r.v[0] == 0x6627e8d5u);
    CHECK(r.v[1] == 0xe169c58du);
    CHECK(r.v[2] == 0xbc57ac4cu);
    CHECK(r.v[3] == 0x9b00dbd8u);
  }
  {
    uint32_t f = 0xffffffffu;
    Philox4x32 r = philox4x32_10(f, f, f, f, f, f);
    CHECK(r.v[0] == 0x408f276du);
    CHECK(r.v[1] == 0x41c83b0eu);
    CHECK(r.v[2] == 0xa20bc7c6u);
    CHECK(r.v[3] == 0x6d5451fdu);
  }
  {
    Philox4x32 r = philox4x32_10(0x243f6a88u, 0x85a308d3u, 0x13198a2eu,
                                 0x03707344u, 0xa4093822u, 0x299f31d0u);
    CHECK(r.v[0] == 0xd16cfe09u);
    CHECK(r.v[1] == 0x94fdccebu);
    CHECK(r.v[2] == 0x5001e420u);
    CHECK(r.v[3] == 0x24126ea1u);
  }
}

TEST_CASE("stream determinism and independence") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (uint64_t c = 0; c < 16; ++c) CHECK(a.normal(c) == b.normal(c));

  // distinct streams decorrelate
  RngStream c1(42, 1), c2(42, 2);
  double acc = 0;
  int n = 20000;
  for (int i = 0; i < n; ++i) acc += c1.normal(i) * c2.normal(i);
  CHECK(std::abs(acc / n) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("normal moments") {
  RngStream s(123, 0);
  int n = 200000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    double z0, z1;
    s.normal_pair(i, z0, z1);
    m1 += z0 + z1;
    m2 += z0 * z0 + z1 * z1;
    m4 += z0 * z0 * z0 * z0 + z1 * z1 * z1 * z1;
  }
  m1 /= 2 * n;
  m2 /= 2 * n;
  m4 /= 2 * n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(2.0 * n));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / (2.0 * n)));
  CHECK(std::abs(m4 - 3.0) < 4.0 * std::sqrt(96.0 / (2.0 * n)));
}

TEST_CASE("uniform range and mean") {
  RngStream s(5, 3);
  int n = 100000;
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform(i);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    acc += u;
  }
  CHECK(std::abs(acc / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
}
