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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <vector>

#include "slosched/workload.hpp"
#include "support/oracles.hpp"

namespace slosched {
namespace {

std::vector<SloCategory> two_categories() {
  return {{"a", 0.05, LengthDist(8, 16, 64), LengthDist(4, 8, 32), 0.6},
          {"b", 0.15, LengthDist(8, 16, 64), LengthDist(4, 8, 32), 0.4}};
}

TEST(DefaultCategories, EncodeTheCategoryTable) {
  const auto cats = default_categories(0.030);
  ASSERT_EQ(cats.size(), 3u);
  EXPECT_EQ(cats[0].name, "coding-copilot");
  EXPECT_DOUBLE_EQ(cats[0].tpot_slo, 1.2 * 0.030);
  EXPECT_EQ(cats[1].name, "chatbot");
  EXPECT_EQ(cats[1].tpot_slo, 0.050);
  EXPECT_EQ(cats[2].name, "summarization");
  EXPECT_EQ(cats[2].tpot_slo, 0.150);
  EXPECT_EQ(cats[0].mix_weight, 0.6);
  EXPECT_EQ(cats[0].prompt_len, LengthDist(32, 128, 512));
  EXPECT_EQ(cats[1].output_len, LengthDist(32, 160, 512));
  EXPECT_EQ(cats[2].prompt_len, LengthDist(256, 1024, 4096));
}

TEST(Categories, Validation) {
  auto cats = two_categories();
  cats[1].mix_weight = 0.5;
  EXPECT_THROW(validate_categories(cats), Error);
  EXPECT_THROW(LengthDist(10, 5, 20), Error);
  const auto j = to_json(two_categories());
  EXPECT_EQ(to_json(categories_from_json(j, 0.03)), j);
}

TEST(LengthDist, FittedMeanAndSupport) {
  for (const auto& [lo, mean, hi] : std::vector<std::tuple<int, int, int>>{
           {32, 128, 512}, {16, 96, 512}, {256, 1024, 4096}, {5, 5, 9},
           {1, 9, 9}, {4, 4, 4}, {10, 15, 20}}) {
    const LengthDist d(lo, mean, hi);
    EXPECT_NEAR(d.fitted_mean(), mean, 1e-6 * mean) << lo << "," << mean << "," << hi;
    RngStream rng(3);
    std::vector<double> xs;
    for (int k = 0; k < 20000; ++k) {
      const std::size_t x = d.sample(rng);
      ASSERT_GE(x, static_cast<std::size_t>(lo));
      ASSERT_LE(x, static_cast<std::size_t>(hi));
      xs.push_back(static_cast<double>(x));
    }
    const auto s = testing::stats_of(xs);
    EXPECT_LE(std::abs(s.mean - mean), 3.0 * s.stddev / std::sqrt(20000.0) + 1e-9);
  }
}

TEST(GenTrace, ZeroRateIsEmpty) {
  EXPECT_TRUE(gen_trace(two_categories(), RpsProfile::constant(0.0), 100, 1).empty());
}

TEST(GenTrace, PoissonTotalCount) {
  const auto t = gen_trace(default_categories(0.03), RpsProfile::constant(4.0), 300, 7);
  EXPECT_LE(std::abs(static_cast<double>(t.size()) - 1200.0), 3.0 * std::sqrt(1200.0));
}

TEST(GenTrace, CategoryFractionsFollowWeights) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = gen_trace(two_categories(), RpsProfile::constant(10.0), 200, seed);
    const double n = static_cast<double>(t.size());
    double a = 0;
    for (const auto& r : t) a += r.category == "a";
    EXPECT_LE(std::abs(a / n - 0.6), 3.0 * std::sqrt(0.6 * 0.4 / n));
  }
}

TEST(GenTrace, SortedDeterministicAndWithinDuration) {
  const auto a = gen_trace(default_categories(0.03), RpsProfile::constant(5.0), 60, 3);
  const auto b = gen_trace(default_categories(0.03), RpsProfile::constant(5.0), 60, 3);
  EXPECT_EQ(a, b);
  for (std::size_t k = 1; k < a.size(); ++k) {
    EXPECT_LE(a[k - 1].arrival_time_s, a[k].arrival_time_s);
  }
  EXPECT_LT(a.back().arrival_time_s, 60.0);
  EXPECT_NE(a, gen_trace(default_categories(0.03), RpsProfile::constant(5.0), 60, 4));
}

TEST(GenTrace, PiecewiseAndPerCategoryProfiles) {
  RpsProfile p;
  p.total = {{0.0, 0.0}, {50.0, 20.0}};
  const auto t = gen_trace(two_categories(), p, 100, 5);
  for (const auto& r : t) EXPECT_GE(r.arrival_time_s, 50.0);
  EXPECT_LE(std::abs(static_cast<double>(t.size()) - 1000.0), 3.0 * std::sqrt(1000.0));

  RpsProfile only_b;
  only_b.per_category["a"] = {{0.0, 0.0}};
  only_b.per_category["b"] = {{0.0, 3.0}};
  for (const auto& r : gen_trace(two_categories(), only_b, 50, 5)) {
    EXPECT_EQ(r.category, "b");
  }
}

TEST(GenTrace, InvalidProfiles) {
  const auto code = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternal;
  };
  EXPECT_EQ(code([] { gen_trace(two_categories(), RpsProfile::constant(-1), 10, 1); }),
            ErrorCode::kInvalidProfile);
  EXPECT_EQ(code([] { gen_trace(two_categories(), RpsProfile::constant(1), 0, 1); }),
            ErrorCode::kInvalidProfile);
  RpsProfile p;
  p.per_category["zzz"] = {{0.0, 1.0}};
  EXPECT_EQ(code([&] { gen_trace(two_categories(), p, 10, 1); }),
            ErrorCode::kInvalidProfile);
}

TEST(LoadTrace, EmptyInputIsEmpty) {
  std::istringstream in("");
  EXPECT_TRUE(parse_trace(in, two_categories()).records.empty());
}

TEST(LoadTrace, MissingKeyNamesTheLine) {
  std::istringstream in(
      "{\"arrival_time_s\":0.5,\"category\":\"a\",\"prompt_len\":4,\"output_len\":2}\n"
      "{\"arrival_time_s\":0.7,\"category\":\"a\",\"prompt_len\":4}\n");
  try {
    parse_trace(in, two_categories());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("output_len"), std::string::npos);
  }
}

TEST(LoadTrace, UnknownCategoryAndBadValues) {
  std::istringstream unknown(
      "{\"arrival_time_s\":0.5,\"category\":\"x\",\"prompt_len\":4,\"output_len\":2}\n");
  try {
    parse_trace(unknown, two_categories());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownCategory);
  }
  std::istringstream zero(
      "{\"arrival_time_s\":0.5,\"category\":\"a\",\"prompt_len\":0,\"output_len\":2}\n");
  EXPECT_THROW(parse_trace(zero, two_categories()), Error);
  std::istringstream junk("not json\n");
  EXPECT_THROW(parse_trace(junk, two_categories()), Error);
}

TEST(LoadTrace, UnsortedInputIsSortedAndFlagged) {
  std::istringstream in(
      "{\"arrival_time_s\":2.0,\"category\":\"a\",\"prompt_len\":4,\"output_len\":2}\n"
      "{\"arrival_time_s\":1.0,\"category\":\"b\",\"prompt_len\":4,\"output_len\":2}\n");
  const LoadedTrace t = parse_trace(in, two_categories());
  EXPECT_TRUE(t.was_unsorted);
  EXPECT_EQ(t.records[0].category, "b");
}

TEST(LoadTrace, SaveLoadRoundTrip) {
  const auto cats = default_categories(0.03);
  const auto trace = gen_trace(cats, RpsProfile::constant(6.0), 30, 11);
  const auto path =
      (std::filesystem::temp_directory_path() / "slosched_roundtrip.jsonl").string();
  save_trace(path, trace);
  const LoadedTrace back = load_trace(path, cats);
  std::remove(path.c_str());
  EXPECT_FALSE(back.was_unsorted);
  EXPECT_EQ(back.records, trace);
}

}  // namespace
}  // namespace slosched
