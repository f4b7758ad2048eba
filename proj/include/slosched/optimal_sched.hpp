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

// Optimal multi-request token-tree construction under known path
// probabilities, plus an exhaustive oracle that certifies it on small
// instances.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "slosched/lm_sim.hpp"
#include "slosched/token_tree.hpp"

namespace slosched {

inline constexpr double kDefaultPruneThreshold = 1e-6;

// Finite truncation of the |V|-ary tree of all continuations of `context`,
// with true path probabilities from `target`. Nodes whose path probability
// falls below `prune` are dropped together with their subtrees.
template <NextTokenModel M>
TokenTree truncated_tree(const M& target, std::span<const Token> context,
                         std::size_t depth,
                         double prune = kDefaultPruneThreshold) {
  require(!context.empty(), ErrorCode::kInvalidArgument,
          "context must be non-empty");
  TokenTree tree(context.back());
  std::vector<NodeId> layer{tree.root()};
  for (std::size_t level = 0; level < depth; ++level) {
    std::vector<NodeId> next;
    for (NodeId v : layer) {
      const std::vector<Token> path = tree.path_tokens(v);
      const std::vector<double> dist =
          target.next_token_dist(ContextView(context, path));
      for (std::size_t t = 0; t < dist.size(); ++t) {
        if (dist[t] <= 0.0) continue;
        const double f = tree.node(v).path_prob * clamp_cond_prob(dist[t]);
        if (f < prune) continue;
        next.push_back(
            tree.add_child(v, static_cast<Token>(t), clamp_cond_prob(dist[t])));
      }
    }
    layer = std::move(next);
  }
  return tree;
}

// Sum of path probabilities accumulated in descending order. Equal node
// multisets therefore always produce bit-identical objectives, whichever
// algorithm selected them.
inline double canonical_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end(), std::greater<>());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

struct OptimalPlan {
  bool valid = false;  // false encodes INVALID
  std::vector<TokenTree> trees;
  // Per request, ids in the source tree of the selected nodes, root first,
  // then in selection order.
  std::vector<std::vector<NodeId>> selected;
  // Non-root nodes each request received while meeting its threshold.
  std::vector<std::size_t> threshold_nodes;
  double objective = 0.0;

  std::size_t tokens_used() const {
    std::size_t n = 0;
    for (const auto& s : selected) n += s.size();
    return n;
  }
};

namespace detail {

inline double plan_objective(std::span<const TokenTree> sources,
                             const std::vector<std::vector<NodeId>>& selected) {
  std::vector<double> values;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    for (NodeId v : selected[i]) values.push_back(sources[i].node(v).path_prob);
  }
  return canonical_sum(std::move(values));
}

inline void check_instance(std::span<const TokenTree> trees,
                           std::span<const double> deficits,
                           std::size_t budget) {
  require(trees.size() == deficits.size(), ErrorCode::kInvalidArgument,
          "one deficit per request is required");
  require(budget >= trees.size(), ErrorCode::kInvalidArgument,
          "budget must cover one root per request");
  for (double a : deficits) {
    require(std::isfinite(a), ErrorCode::kInvalidArgument,
            "deficits must be finite");
  }
}

}  // namespace detail

// Greedy construction: every root costs one budget unit; step 1 walks the
// requests in input order and adds each one's best remaining nodes until
// its deficit is met; step 2 spends what is left on the globally best
// nodes. Node choice ranges over all unselected nodes, not just the
// children of selected ones; connectivity follows from path probabilities
// strictly decreasing along every path.
inline OptimalPlan construct_optimal(std::span<const TokenTree> inf_trees,
                                     std::span<const double> deficits,
                                     std::size_t budget) {
  detail::check_instance(inf_trees, deficits, budget);
  const std::size_t n = inf_trees.size();

  std::vector<std::vector<NodeId>> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (NodeId v = 1; v < inf_trees[i].size(); ++v) order[i].push_back(v);
    std::sort(order[i].begin(), order[i].end(), [&](NodeId a, NodeId b) {
      return ranks_before(frontier_entry(inf_trees[i].node(a), i),
                          frontier_entry(inf_trees[i].node(b), i));
    });
  }

  OptimalPlan plan;
  plan.threshold_nodes.assign(n, 0);
  std::vector<std::size_t> cursor(n, 0);
  std::vector<std::vector<NodeId>> remap(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.trees.emplace_back(inf_trees[i].node(0).token);
    plan.selected.push_back({0});
    remap[i].assign(inf_trees[i].size(), std::numeric_limits<NodeId>::max());
    remap[i][0] = 0;
  }
  std::size_t remaining = budget - n;

  auto add = [&](std::size_t i) -> double {
    const TreeNode& v = inf_trees[i].node(order[i][cursor[i]++]);
    const NodeId parent = remap[i][v.parent];
    require(parent != std::numeric_limits<NodeId>::max(), ErrorCode::kInternal,
            "greedy selection produced a disconnected node");
    remap[i][v.id] = plan.trees[i].attach(parent, v.token, v.path_prob);
    plan.selected[i].push_back(v.id);
    --remaining;
    return v.path_prob;
  };

  for (std::size_t i = 0; i < n; ++i) {
    double n_acc = 1.0;
    while (n_acc < deficits[i]) {
      if (remaining == 0 || cursor[i] == order[i].size()) return OptimalPlan{};
      n_acc += add(i);
      ++plan.threshold_nodes[i];
    }
  }

  while (remaining > 0) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (cursor[i] == order[i].size()) continue;
      if (best == n ||
          ranks_before(
              frontier_entry(inf_trees[i].node(order[i][cursor[i]]), i),
              frontier_entry(inf_trees[best].node(order[best][cursor[best]]),
                             best))) {
        best = i;
      }
    }
    if (best == n) break;
    add(best);
  }

  plan.valid = true;
  plan.objective = detail::plan_objective(inf_trees, plan.selected);
  return plan;
}

inline constexpr std::size_t kBruteForceMaxNodes = 24;
inline constexpr std::size_t kBruteForceMaxBudget = 12;

// Every connected, root-containing subtree of `tree` with at most
// `max_size` nodes, as bitmasks over node ids.
inline std::vector<std::uint32_t> enumerate_subtrees(const TokenTree& tree,
                                                     std::size_t max_size) {
  require(tree.size() <= 32, ErrorCode::kInstanceTooLarge,
          "subtree enumeration supports at most 32 nodes");
  std::vector<std::vector<std::uint32_t>> rooted(tree.size());
  for (NodeId v = tree.size(); v-- > 0;) {
    std::vector<std::uint32_t> acc{std::uint32_t{1} << v};
    for (NodeId c : tree.children(v)) {
      std::vector<std::uint32_t> next = acc;  // child excluded
      for (std::uint32_t base : acc) {
        for (std::uint32_t sub : rooted[c]) {
          const std::uint32_t m = base | sub;
          if (static_cast<std::size_t>(std::popcount(m)) <= max_size) {
            next.push_back(m);
          }
        }
      }
      acc = std::move(next);
    }
    rooted[v] = std::move(acc);
  }
  return rooted[0];
}

inline double subtree_sum(const TokenTree& tree, std::uint32_t mask) {
  std::vector<double> values;
  for (NodeId v = 0; v < tree.size(); ++v) {
    if (mask >> v & 1U) values.push_back(tree.node(v).path_prob);
  }
  return canonical_sum(std::move(values));
}

// Fewest nodes (root included) of any connected root-containing subtree
// whose path-probability sum reaches `threshold`; nullopt if none does.
inline std::optional<std::size_t> min_nodes_for_threshold(
    const TokenTree& tree, double threshold) {
  std::optional<std::size_t> best;
  for (std::uint32_t m : enumerate_subtrees(tree, tree.size())) {
    const auto k = static_cast<std::size_t>(std::popcount(m));
    if ((!best || k < *best) && subtree_sum(tree, m) >= threshold) best = k;
  }
  return best;
}

// Exhaustive optimum. The objective is separable across requests and the
// constraints are per-request thresholds plus a shared node count, so the
// search keeps, for every request and subtree size, the best feasible
// subtree found by full enumeration, then tries every size assignment.
inline OptimalPlan brute_force_optimal(std::span<const TokenTree> inf_trees,
                                       std::span<const double> deficits,
                                       std::size_t budget) {
  detail::check_instance(inf_trees, deficits, budget);
  std::size_t total_nodes = 0;
  for (const TokenTree& t : inf_trees) total_nodes += t.size();
  require(total_nodes <= kBruteForceMaxNodes && budget <= kBruteForceMaxBudget,
          ErrorCode::kInstanceTooLarge,
          "brute force is limited to 24 candidate nodes and budget 12");
  const std::size_t n = inf_trees.size();
  if (n == 0) {
    OptimalPlan empty;
    empty.valid = true;
    return empty;
  }

  // best[i][k]: best feasible subtree of request i with exactly k nodes.
  std::vector<std::vector<std::optional<std::uint32_t>>> best(n);
  std::vector<std::vector<double>> best_sum(n);
  for (std::size_t i = 0; i < n; ++i) {
    best[i].assign(budget + 1, std::nullopt);
    best_sum[i].assign(budget + 1, -1.0);
    for (std::uint32_t m : enumerate_subtrees(inf_trees[i], budget)) {
      const double s = subtree_sum(inf_trees[i], m);
      if (s < deficits[i]) continue;
      const auto k = static_cast<std::size_t>(std::popcount(m));
      if (s > best_sum[i][k]) {
        best_sum[i][k] = s;
        best[i][k] = m;
      }
    }
  }

  OptimalPlan plan;
  std::vector<std::size_t> sizes(n, 1);
  std::vector<std::uint32_t> chosen(n);
  double best_objective = -1.0;
  std::vector<std::uint32_t> best_masks;
  std::function<void(std::size_t, std::size_t)> search =
      [&](std::size_t i, std::size_t left) {
        if (i == n) {
          std::vector<double> values;
          for (std::size_t r = 0; r < n; ++r) {
            for (NodeId v = 0; v < inf_trees[r].size(); ++v) {
              if (chosen[r] >> v & 1U) {
                values.push_back(inf_trees[r].node(v).path_prob);
              }
            }
          }
          const double obj = canonical_sum(std::move(values));
          if (obj > best_objective) {
            best_objective = obj;
            best_masks = chosen;
          }
          return;
        }
        for (std::size_t k = 1; k <= left; ++k) {
          if (!best[i][k]) continue;
          chosen[i] = *best[i][k];
          search(i + 1, left - k);
        }
      };
  search(0, budget);
  if (best_masks.empty()) return OptimalPlan{};

  plan.valid = true;
  plan.threshold_nodes.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const TokenTree& src = inf_trees[i];
    TokenTree out(src.node(0).token);
    std::vector<NodeId> remap(src.size(), 0);
    std::vector<NodeId> ids{0};
    for (NodeId v = 1; v < src.size(); ++v) {
      if (!(best_masks[i] >> v & 1U)) continue;
      remap[v] = out.attach(remap[src.node(v).parent], src.node(v).token,
                            src.node(v).path_prob);
      ids.push_back(v);
    }
    plan.trees.push_back(std::move(out));
    plan.selected.push_back(std::move(ids));
  }
  plan.objective = best_objective;
  return plan;
}

// Serialized instance for the `oracle` subcommand. Each request supplies
// either an explicit tree or a context expanded through a synthetic target
// model.
struct OracleInstance {
  std::size_t budget = 0;
  std::vector<TokenTree> trees;
  std::vector<double> deficits;
};

inline OracleInstance oracle_instance_from_json(const nlohmann::json& j) {
  try {
    OracleInstance inst;
    inst.budget = j.at("budget").get<std::size_t>();
    std::optional<LmOracle> model;
    if (j.contains("model")) {
      const auto& m = j.at("model");
      model = LmOracle::target(Vocab{m.at("vocab_size").get<std::size_t>()},
                               m.at("seed").get<std::uint64_t>(),
                               m.value("sharpness", 1.0),
                               m.value("context_window", std::size_t{8}));
    }
    const std::size_t depth = j.value("depth", std::size_t{3});
    const double prune = j.value("prune_threshold", kDefaultPruneThreshold);
    for (const auto& r : j.at("requests")) {
      inst.deficits.push_back(r.at("deficit").get<double>());
      if (r.contains("tree")) {
        inst.trees.push_back(tree_from_json(r.at("tree")));
      } else {
        require(model.has_value(), ErrorCode::kParseError,
                "requests without an explicit tree need a model section");
        const auto ctx = r.at("context").get<std::vector<Token>>();
        inst.trees.push_back(truncated_tree(*model, ctx, depth, prune));
      }
    }
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

}  // namespace slosched
