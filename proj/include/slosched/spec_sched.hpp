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

// Practical per-iteration planning: beam-search speculation over the draft
// model followed by SLO-customized and throughput-optimized selection from
// the resulting candidate trees.

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "slosched/lm_sim.hpp"
#include "slosched/token_tree.hpp"

namespace slosched {

struct SpecParams {
  std::size_t depth = 1;
  std::size_t width = 1;
  std::size_t budget = 1;
  std::size_t n_max = 1;

  static std::size_t default_n_max(std::size_t depth, std::size_t width) {
    return depth + 1 + (width + 1) / 2;
  }

  void validate(std::size_t n_requests) const {
    require(depth >= 1 && width >= 1 && n_max >= 1,
            ErrorCode::kInvalidArgument, "depth, width and n_max must be >= 1");
    require(budget >= n_requests, ErrorCode::kInvalidArgument,
            "budget must cover one root per active request");
  }
};

struct CandidateForest {
  std::vector<TokenTree> trees;
};

// Per-request selection target: the raw deficit orders requests, the
// capped value is the threshold.
struct SloTarget {
  double deficit = 0.0;
  double capped = 0.0;
};

inline constexpr NodeId kNotSelected = std::numeric_limits<NodeId>::max();

struct DraftPlan {
  std::vector<TokenTree> trees;
  // Candidate-tree ids of selected nodes, root first then selection order.
  std::vector<std::vector<NodeId>> selected;
  // Candidate id -> draft id, or kNotSelected.
  std::vector<std::vector<NodeId>> remap;
  // Running sum of approximated path probabilities, root included.
  std::vector<double> mass;
  std::vector<std::size_t> slo_nodes;
  std::size_t tokens_used = 0;

  std::size_t size() const { return trees.size(); }
};

// Beam search of `depth` steps and width `width` over the draft model for
// one request. Layer k keeps the `width` best (by approximated path
// probability) among all expansions of layer k-1's kept nodes.
template <NextTokenModel M>
TokenTree speculate_one(const M& draft, std::span<const Token> context,
                        std::size_t depth, std::size_t width,
                        std::size_t request_index = 0) {
  require(!context.empty(), ErrorCode::kInvalidArgument,
          "request sequence must be non-empty");
  TokenTree tree(context.back());
  std::vector<NodeId> layer{tree.root()};
  std::vector<FrontierEntry> expansions;
  std::vector<double> conds;
  for (std::size_t step = 1; step <= depth && !layer.empty(); ++step) {
    expansions.clear();
    conds.clear();
    for (NodeId v : layer) {
      const std::vector<Token> path = tree.path_tokens(v);
      const std::vector<double> dist =
          draft.next_token_dist(ContextView(context, path));
      const double parent_prob = tree.node(v).path_prob;
      for (std::size_t t = 0; t < dist.size(); ++t) {
        if (dist[t] <= 0.0) continue;
        const double q = clamp_cond_prob(dist[t]);
        // `node` carries the parent id so equal-probability expansions of
        // different parents still order deterministically.
        expansions.push_back({std::max(parent_prob * q, kMinPathProb),
                              request_index, step, static_cast<Token>(t), v});
        conds.push_back(q);
      }
    }
    std::vector<std::size_t> idx(expansions.size());
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t keep = std::min(width, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<long>(keep),
                      idx.end(), [&](std::size_t a, std::size_t b) {
                        return ranks_before(expansions[a], expansions[b]);
                      });
    std::vector<NodeId> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const FrontierEntry& e = expansions[idx[k]];
      next.push_back(tree.add_child(e.node, e.token, conds[idx[k]]));
    }
    layer = std::move(next);
  }
  return tree;
}

template <NextTokenModel M>
CandidateForest speculate(const M& draft,
                          std::span<const std::span<const Token>> contexts,
                          const SpecParams& params) {
  params.validate(contexts.size());
  CandidateForest forest;
  forest.trees.reserve(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    forest.trees.push_back(
        speculate_one(draft, contexts[i], params.depth, params.width, i));
  }
  return forest;
}

// Plan holding only the roots of every candidate tree.
inline DraftPlan root_plan(const CandidateForest& forest) {
  DraftPlan plan;
  for (const TokenTree& cand : forest.trees) {
    plan.trees.emplace_back(cand.node(0).token);
    plan.selected.push_back({0});
    std::vector<NodeId> remap(cand.size(), kNotSelected);
    remap[0] = 0;
    plan.remap.push_back(std::move(remap));
    plan.mass.push_back(1.0);
    plan.slo_nodes.push_back(0);
  }
  plan.tokens_used = forest.trees.size();
  return plan;
}

namespace detail {

// Highest-ranked candidate of request i not yet in the plan.
inline std::optional<FrontierEntry> next_candidate(const CandidateForest& forest,
                                                   const DraftPlan& plan,
                                                   std::size_t i) {
  const TokenTree& cand = forest.trees[i];
  std::optional<FrontierEntry> best;
  for (NodeId v = 1; v < cand.size(); ++v) {
    if (plan.remap[i][v] != kNotSelected) continue;
    const FrontierEntry e = frontier_entry(cand.node(v), i);
    if (!best || ranks_before(e, *best)) best = e;
  }
  return best;
}

inline void take(const CandidateForest& forest, DraftPlan& plan, std::size_t i,
                 NodeId v) {
  const TreeNode& node = forest.trees[i].node(v);
  const NodeId parent = plan.remap[i][node.parent];
  require(parent != kNotSelected, ErrorCode::kInternal,
          "selected node's parent is not in the draft tree");
  plan.remap[i][v] = plan.trees[i].attach(parent, node.token, node.path_prob);
  plan.selected[i].push_back(v);
  plan.mass[i] += node.path_prob;
  ++plan.tokens_used;
}

}  // namespace detail

// Serves requests in descending deficit order; each takes its best
// remaining candidates until the accumulated mass (root counted as 1.0)
// reaches its capped deficit, it has taken n_max nodes, or the budget is
// gone. Returns the budget left over.
inline std::size_t slo_select(const CandidateForest& forest,
                              std::span<const SloTarget> targets,
                              const SpecParams& params, DraftPlan& plan,
                              std::size_t remaining_budget) {
  require(targets.size() == forest.trees.size(), ErrorCode::kInvalidArgument,
          "one SLO target per request is required");
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return targets[a].deficit > targets[b].deficit;
                   });
  for (std::size_t i : order) {
    double n_acc = plan.mass[i];
    std::size_t taken = 0;
    while (n_acc < targets[i].capped && taken < params.n_max &&
           remaining_budget > 0) {
      const auto next = detail::next_candidate(forest, plan, i);
      if (!next) break;
      detail::take(forest, plan, i, next->node);
      n_acc += next->path_prob;
      ++taken;
      --remaining_budget;
    }
    plan.slo_nodes[i] += taken;
  }
  return remaining_budget;
}

// Spends the remaining budget on the globally best unselected candidates.
inline void throughput_select(const CandidateForest& forest, DraftPlan& plan,
                              std::size_t remaining_budget) {
  Frontier heads;
  for (std::size_t i = 0; i < forest.trees.size(); ++i) {
    if (auto e = detail::next_candidate(forest, plan, i)) heads.push(*e);
  }
  while (remaining_budget > 0 && !heads.empty()) {
    const FrontierEntry e = heads.pop();
    detail::take(forest, plan, e.request, e.node);
    --remaining_budget;
    if (auto next = detail::next_candidate(forest, plan, e.request)) {
      heads.push(*next);
    }
  }
}

template <NextTokenModel M>
DraftPlan plan_iteration(const M& draft,
                         std::span<const std::span<const Token>> contexts,
                         const SpecParams& params,
                         std::span<const SloTarget> targets,
                         CandidateForest* candidates_out = nullptr) {
  params.validate(contexts.size());
  CandidateForest forest = speculate(draft, contexts, params);
  DraftPlan plan = root_plan(forest);
  std::size_t remaining = params.budget - contexts.size();
  remaining = slo_select(forest, targets, params, plan, remaining);
  throughput_select(forest, plan, remaining);
  if (candidates_out) *candidates_out = std::move(forest);
  return plan;
}

inline nlohmann::json to_json(const DraftPlan& plan) {
  nlohmann::json requests = nlohmann::json::array();
  for (std::size_t i = 0; i < plan.size(); ++i) {
    requests.push_back({{"index", i},
                        {"selected", plan.selected[i]},
                        {"slo_nodes", plan.slo_nodes[i]},
                        {"mass", plan.mass[i]},
                        {"tree", to_json(plan.trees[i])}});
  }
  return {{"tokens_used", plan.tokens_used}, {"requests", std::move(requests)}};
}

}  // namespace slosched
