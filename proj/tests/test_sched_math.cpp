/* Copyright 2026 The slosched Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "slosched/sched_math.hpp"

namespace slosched {
namespace {

TEST(SloDeficit, Examples) {
  EXPECT_NEAR(slo_deficit(0.100, 2, 0.050, 0.030), 0.6, 1e-12);
  EXPECT_DOUBLE_EQ(slo_deficit(0.0, 0, 0.050, 0.050), 1.0);
  EXPECT_NEAR(slo_deficit(1.0, 10, 0.050, 0.030), 10.6, 1e-12);
}

TEST(SloDeficit, RequestOverload) {
  RequestState r;
  r.tpot_slo = 0.05;
  r.decode_latency = 0.1;
  r.emitted = 2;
  EXPECT_EQ(slo_deficit(r, 0.03), slo_deficit(0.1, 2, 0.05, 0.03));
}

TEST(SloDeficit, RejectsNonPositiveTimes) {
  EXPECT_THROW(slo_deficit(0.0, 0, 0.0, 0.03), Error);
  EXPECT_THROW(slo_deficit(0.0, 0, 0.05, 0.0), Error);
}

TEST(SloDeficitCapped, Examples) {
  EXPECT_EQ(slo_deficit_capped(10.6, 3), 4.0);
  EXPECT_EQ(slo_deficit_capped(0.6, 3), 0.6);
  EXPECT_EQ(slo_deficit_capped(-0.4, 3), 0.0);
  EXPECT_THROW(slo_deficit_capped(1.0, 0), Error);
}

TEST(SloDeficit, MonotoneInEmittedAndLatency) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.001, 2.0);
  for (int k = 0; k < 1000; ++k) {
    const double l = u(rng), tpot = u(rng) / 10, t = u(rng) / 10;
    const std::size_t o = rng() % 100;
    EXPECT_LT(slo_deficit(l, o + 1, tpot, t), slo_deficit(l, o, tpot, t));
    EXPECT_GT(slo_deficit(l + 0.01, o, tpot, t), slo_deficit(l, o, tpot, t));
    const std::size_t d = 1 + rng() % 8;
    const double c = slo_deficit_capped(slo_deficit(l, o, tpot, t), d);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, static_cast<double>(d) + 1.0);
  }
}

// If each iteration accepts at least its deficit, computed with the
// realized iteration latency, the request ends on pace.
TEST(SloDeficit, MeetingEveryDeficitMeetsTheSlo) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> lat(0.01, 0.08);
  for (int trial = 0; trial < 200; ++trial) {
    const double tpot = 0.02 + 0.001 * static_cast<double>(rng() % 60);
    double l = 0.0;
    std::size_t o = 0;
    const int iters = 1 + static_cast<int>(rng() % 40);
    for (int k = 0; k < iters; ++k) {
      const double t = lat(rng);
      const double a = slo_deficit(l, o, tpot, t);
      std::size_t acc = 1;
      while (static_cast<double>(acc) < a) ++acc;
      acc += rng() % 2;
      l += t;
      o += acc;
    }
    EXPECT_LE(l / static_cast<double>(o), tpot * (1 + 1e-12));
  }
}

}  // namespace
}  // namespace slosched
