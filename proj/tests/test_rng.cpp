#include <cmath>
#include <set>

#include "doctest.h"
#include "motionguide/rng.hpp"

using namespace mg;

TEST_CASE("same seed, same stream") {
  Rng a = Rng::seeded(123);
  Rng b = Rng::seeded(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("draws depend on count, not call pattern") {
  // counter-based: interleaving uniform/normal draws cannot desync two
  // logically identical streams once the consumed-count matches
  Rng a = Rng::seeded(9);
  Rng b = Rng::seeded(9);
  (void)a.uniform();
  (void)a.uniform();
  (void)b.normal();  // consumes two uniforms
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split streams are independent of parent position") {
  Rng parent = Rng::seeded(5);
  Rng child_before = parent.split(17);
  (void)parent.next_u64();
  (void)parent.next_u64();
  Rng child_after = parent.split(17);
  CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("distinct split ids give distinct streams") {
  Rng parent = Rng::seeded(5);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 200; ++s) firsts.insert(parent.split(s).next_u64());
  CHECK(firsts.size() == 200);
  CHECK(parent.split("alpha").next_u64() != parent.split("beta").next_u64());
}

TEST_CASE("uniform stays in range with sane moments") {
  Rng r = Rng::seeded(77);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 0.01);
  CHECK(std::abs(var - 1.0 / 12.0) < 0.005);
  double x = r.uniform(-2.0, 3.0);
  CHECK(x >= -2.0);
  CHECK(x < 3.0);
}

TEST_CASE("normal moments") {
  Rng r = Rng::seeded(31);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    sum += z;
    sum2 += z * z;
  }
  double mean = sum / n;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(sum2 / n - mean * mean - 1.0) < 0.05);
  Rng r2 = Rng::seeded(31);
  (void)r2;  // scaled draw maps through mean + stddev * z
  double z0 = Rng::seeded(8).normal();
  double z1 = Rng::seeded(8).normal(10.0, 2.0);
  CHECK(z1 == doctest::Approx(10.0 + 2.0 * z0));
}

TEST_CASE("uniform_int and bernoulli") {
  Rng r = Rng::seeded(55);
  for (int i = 0; i < 1000; ++i) CHECK(r.uniform_int(7) < 7);
  int heads = 0;
  for (int i = 0; i < 10000; ++i) heads += r.bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(heads / 10000.0 - 0.3) < 0.02);
}

TEST_CASE("pinned values guard the bit stream") {
  // frozen outputs: any change to the mixing constants breaks replay of
  // every stored artifact, so the stream itself is part of the contract
  Rng r = Rng::seeded(0);
  CHECK(r.next_u64() == 12560432288189201193ULL);
  Rng s = Rng::seeded(0);
  CHECK(s.split(1).next_u64() == 8479343109074730135ULL);
}
