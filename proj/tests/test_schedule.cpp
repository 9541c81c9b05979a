#include <cmath>

#include "doctest.h"
#include "motionguide/schedule.hpp"

using namespace mg;

TEST_CASE("linear schedule recurrence") {
  NoiseSchedule s = NoiseSchedule::linear(10, 1e-4, 0.7);
  CHECK(s.T() == 10);
  CHECK(s.beta(0) == doctest::Approx(1e-4));
  CHECK(s.beta(9) == doctest::Approx(0.7));
  // betas interpolate linearly
  CHECK(s.beta(3) == doctest::Approx(1e-4 + 3.0 * (0.7 - 1e-4) / 9.0));
  // alpha_bar is the running product of (1 - beta)
  double prod = 1.0;
  for (int t = 0; t < 10; ++t) {
    prod *= 1.0 - s.beta(t);
    CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-12));
  }
}

TEST_CASE("alpha_bar decreases strictly and sqrt accessors agree") {
  NoiseSchedule s = NoiseSchedule::defaults();
  for (int t = 1; t < s.T(); ++t) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  for (int t : {0, 50, 199}) {
    CHECK(s.sqrt_alpha_bar(t) == doctest::Approx(std::sqrt(s.alpha_bar(t))));
    CHECK(s.sqrt_one_minus_alpha_bar(t) == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t))));
  }
}

TEST_CASE("default endpoints bracket signal and noise") {
  NoiseSchedule s = NoiseSchedule::defaults();
  CHECK(s.T() == 200);
  CHECK(s.alpha_bar(0) > 0.99);
  CHECK(s.alpha_bar(s.T() - 1) < 0.05);
}

TEST_CASE("fine schedule keeps the same invariants at 1000 steps") {
  NoiseSchedule s = NoiseSchedule::fine();
  CHECK(s.T() == 1000);
  CHECK(s.alpha_bar(0) > 0.99);
  CHECK(s.alpha_bar(s.T() - 1) < 0.05);
}

TEST_CASE("construction rejects broken endpoint schedules") {
  CHECK_THROWS(NoiseSchedule::linear(200, 0.5, 0.9));    // too much noise at t=0
  CHECK_THROWS(NoiseSchedule::linear(200, 1e-4, 1e-4));  // never destroys the signal
  CHECK_THROWS(NoiseSchedule::linear(0, 1e-4, 0.02));
  CHECK_THROWS(NoiseSchedule::linear(200, -1e-4, 0.02));
  CHECK_THROWS(NoiseSchedule::linear(200, 1e-4, 1.5));   // beta must stay below 1
}

TEST_CASE("json round trip preserves every beta") {
  NoiseSchedule s = NoiseSchedule::linear(50, 2e-4, 0.15);
  NoiseSchedule r = NoiseSchedule::from_json(s.to_json());
  CHECK(r.T() == 50);
  for (int t = 0; t < 50; ++t) {
    CHECK(r.beta(t) == s.beta(t));
    CHECK(r.alpha_bar(t) == doctest::Approx(s.alpha_bar(t)).epsilon(1e-15));
  }
}
