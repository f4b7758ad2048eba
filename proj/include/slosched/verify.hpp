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

#include <optional>
#include <span>
#include <vector>

#include "slosched/lm_sim.hpp"
#include "slosched/token_tree.hpp"

namespace slosched {

struct VerifyOutcome {
  std::size_t accepted_count = 1;      // root included
  std::vector<Token> accepted_path;    // accepted draft tokens + bonus token
  std::vector<NodeId> accepted_nodes;  // root first
  std::optional<NodeId> diverged_at;   // last accepted node
};

// Sampling walk: at each accepted node the target draws one token given the
// sequence plus the accepted path. A matching child is accepted and the
// walk descends; otherwise the drawn token becomes the bonus token and the
// walk stops. A node is therefore accepted with probability equal to the
// product of target conditionals along its path.
template <NextTokenModel M>
VerifyOutcome verify_tree(const M& target, std::span<const Token> sequence,
                          const TokenTree& tree, RngStream& rng) {
  require(!sequence.empty() && sequence.back() == tree.node(0).token,
          ErrorCode::kInvalidArgument,
          "tree must be rooted at the request's last token");
  VerifyOutcome out;
  out.accepted_nodes.push_back(tree.root());
  NodeId at = tree.root();
  while (true) {
    const Token drawn =
        sample_token(target, ContextView(sequence, out.accepted_path), rng);
    out.accepted_path.push_back(drawn);
    const auto child = tree.find_child(at, drawn);
    if (!child) {
      out.diverged_at = at;
      break;
    }
    at = *child;
    out.accepted_nodes.push_back(at);
  }
  out.accepted_count = out.accepted_nodes.size();
  return out;
}

// Appendix-style expectation over a verification batch: with per-token
// acceptance probabilities p_i, E[n_acc] = n * mean(p) = sum(p).
inline double mean_acceptance(std::span<const double> probs) {
  double total = 0.0;
  for (double p : probs) {
    require(p >= 0.0 && p <= 1.0, ErrorCode::kInvalidArgument,
            "acceptance probabilities must lie in [0, 1]");
    total += p;
  }
  return total;
}

inline double average_acceptance_rate(std::span<const double> probs) {
  require(!probs.empty(), ErrorCode::kInvalidArgument, "no tokens");
  return mean_acceptance(probs) / static_cast<double>(probs.size());
}

}  // namespace slosched
