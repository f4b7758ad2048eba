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

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace slosched {

using Token = std::int32_t;

enum class ErrorCode {
  kInvalidArgument,
  kDuplicateSiblingToken,
  kUnknownParent,
  kEmptyFrontier,
  kInstanceTooLarge,
  kInvalidProfile,
  kParseError,
  kUnknownCategory,
  kMalformedTrace,
  kInvalidConfig,
  kInternal,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDuplicateSiblingToken: return "duplicate-sibling-token";
    case ErrorCode::kUnknownParent: return "unknown-parent";
    case ErrorCode::kEmptyFrontier: return "empty-frontier";
    case ErrorCode::kInstanceTooLarge: return "instance-too-large";
    case ErrorCode::kInvalidProfile: return "invalid-profile";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kUnknownCategory: return "unknown-category";
    case ErrorCode::kMalformedTrace: return "malformed-trace";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kInternal: return "internal";
  }
  return "unknown";
}

// All library failures surface as this exception; code() identifies the
// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

// clip(hi, lo, x) = max(lo, min(hi, x)); argument order follows the
// adaptive-control formulas.
template <typename T>
constexpr T clip(T hi, T lo, T x) {
  return std::max(lo, std::min(hi, x));
}

// SplitMix64 finalizer. Used as the stable hash behind the synthetic
// language models and for deriving independent rng sub-streams.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2)));
}

// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
constexpr double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Named, seeded random stream owned by one simulation component.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Sub-stream derived deterministically from a parent seed and a tuple of
  // identifiers (e.g. request id and iteration index).
  static RngStream derive(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b = 0) {
    return RngStream(hash_combine(hash_combine(mix64(seed), a), b));
  }

  double uniform() { return unit_interval(engine_()); }
  std::uint64_t next() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace slosched
