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
#include <vector>

#include "slosched/common.hpp"

namespace slosched {

struct RequestState {
  std::uint64_t id = 0;
  double tpot_slo = 0.0;        // seconds per output token
  double decode_latency = 0.0;  // seconds since the first decoding step
  std::size_t emitted = 0;      // tokens decoded so far
  std::size_t prompt_len = 0;
  std::size_t remaining_output = 0;
  std::vector<Token> sequence;  // prompt followed by emitted tokens

  Token last_token() const { return sequence.back(); }
};

// A(r) = (l + t_spec) / t_tpot - o: the number of tokens this iteration
// must accept for the request to be on pace after it. Negative when the
// request is ahead of schedule.
inline double slo_deficit(double decode_latency, std::size_t emitted,
                          double tpot_slo, double t_spec) {
  require(tpot_slo > 0.0, ErrorCode::kInvalidArgument, "tpot_slo must be > 0");
  require(t_spec > 0.0, ErrorCode::kInvalidArgument, "t_spec must be > 0");
  return (decode_latency + t_spec) / tpot_slo - static_cast<double>(emitted);
}

inline double slo_deficit(const RequestState& req, double t_spec) {
  return slo_deficit(req.decode_latency, req.emitted, req.tpot_slo, t_spec);
}

// A_cap(r) = min(A(r), d + 1), floored at zero.
inline double slo_deficit_capped(double deficit, std::size_t depth) {
  require(depth >= 1, ErrorCode::kInvalidArgument, "depth must be >= 1");
  return std::max(0.0, std::min(deficit, static_cast<double>(depth) + 1.0));
}

}  // namespace slosched
