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
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slosched/common.hpp"

namespace slosched {

using NodeId = std::size_t;

// Conditional probabilities are clamped below 1 so that every child has a
// strictly smaller path probability than its parent.
inline constexpr double kMaxCondProb = 1.0 - 1e-12;
inline constexpr double kMinPathProb = 1e-300;

inline double clamp_cond_prob(double p) { return std::min(p, kMaxCondProb); }

struct TreeNode {
  NodeId id = 0;
  Token token = 0;
  NodeId parent = 0;  // the root is its own parent
  std::size_t depth = 0;
  double path_prob = 1.0;
};

// Rooted draft-token tree. Node ids are dense indices in insertion order;
// the root is always node 0.
class TokenTree {
 public:
  explicit TokenTree(Token root_token) {
    nodes_.push_back({0, root_token, 0, 0, 1.0});
    children_.emplace_back();
  }

  std::size_t size() const { return nodes_.size(); }
  NodeId root() const { return 0; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<NodeId>& children(NodeId id) const {
    return children_.at(id);
  }

  std::optional<NodeId> find_child(NodeId parent, Token token) const {
    for (NodeId c : children_.at(parent)) {
      if (nodes_[c].token == token) return c;
    }
    return std::nullopt;
  }

  NodeId add_child(NodeId parent, Token token, double cond_prob) {
    require(parent < nodes_.size(), ErrorCode::kUnknownParent,
            "node " + std::to_string(parent) + " is not in the tree");
    require(cond_prob > 0.0 && cond_prob <= 1.0, ErrorCode::kInvalidArgument,
            "conditional probability must lie in (0, 1]");
    const double path =
        std::max(nodes_[parent].path_prob * clamp_cond_prob(cond_prob),
                 kMinPathProb);
    return attach(parent, token, path);
  }

  // Adds a child carrying an already-computed path probability; used when
  // copying nodes out of a candidate tree.
  NodeId attach(NodeId parent, Token token, double path_prob) {
    require(parent < nodes_.size(), ErrorCode::kUnknownParent,
            "node " + std::to_string(parent) + " is not in the tree");
    require(!find_child(parent, token).has_value(),
            ErrorCode::kDuplicateSiblingToken,
            "token " + std::to_string(token) + " already under node " +
                std::to_string(parent));
    require(path_prob > 0.0 && path_prob < nodes_[parent].path_prob,
            ErrorCode::kInvalidArgument,
            "path probability must be positive and below the parent's");
    const NodeId id = nodes_.size();
    nodes_.push_back({id, token, parent, nodes_[parent].depth + 1, path_prob});
    children_.emplace_back();
    children_[parent].push_back(id);
    return id;
  }

  // Tokens on the root-to-id path, root excluded.
  std::vector<Token> path_tokens(NodeId id) const {
    std::vector<Token> out;
    for (NodeId v = id; v != 0; v = nodes_.at(v).parent) {
      out.push_back(nodes_[v].token);
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  std::size_t max_depth() const {
    std::size_t d = 0;
    for (const TreeNode& n : nodes_) d = std::max(d, n.depth);
    return d;
  }

  // Returns an empty string when every structural invariant holds,
  // otherwise a description of the first violation.
  std::string check_invariants() const {
    if (nodes_.empty()) return "tree has no nodes";
    const TreeNode& r = nodes_[0];
    if (r.parent != 0 || r.depth != 0 || r.path_prob != 1.0) {
      return "malformed root";
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      const TreeNode& n = nodes_[i];
      if (n.id != i) return "node id mismatch at " + std::to_string(i);
      // Parents precede children, which also rules out cycles.
      if (n.parent >= i) return "node " + std::to_string(i) + " unreachable";
      const TreeNode& p = nodes_[n.parent];
      if (n.depth != p.depth + 1) return "bad depth at " + std::to_string(i);
      if (!(n.path_prob > 0.0 && n.path_prob < p.path_prob)) {
        return "path probability not decreasing at " + std::to_string(i);
      }
      for (NodeId s : children_[n.parent]) {
        if (s != i && nodes_[s].token == n.token) {
          return "duplicate sibling token at " + std::to_string(i);
        }
      }
    }
    return {};
  }

  friend bool operator==(const TokenTree& a, const TokenTree& b) {
    if (a.nodes_.size() != b.nodes_.size()) return false;
    for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
      const TreeNode& x = a.nodes_[i];
      const TreeNode& y = b.nodes_[i];
      if (x.id != y.id || x.token != y.token || x.parent != y.parent ||
          x.depth != y.depth || x.path_prob != y.path_prob) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<NodeId>> children_;
};

// E[acc(T)] = sum of path probabilities over all nodes, root included.
inline double expected_accepted(const TokenTree& tree) {
  double total = 0.0;
  for (const TreeNode& n : tree.nodes()) total += n.path_prob;
  return total;
}

inline nlohmann::json to_json(const TokenTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& n : tree.nodes()) {
    nodes.push_back({{"id", n.id},
                     {"parent", n.parent},
                     {"token", n.token},
                     {"depth", n.depth},
                     {"path_prob", n.path_prob}});
  }
  return {{"root", tree.root()}, {"nodes", std::move(nodes)}};
}

inline TokenTree tree_from_json(const nlohmann::json& j) {
  try {
    const auto& nodes = j.at("nodes");
    require(nodes.is_array() && !nodes.empty(), ErrorCode::kParseError,
            "tree needs a non-empty nodes array");
    require(j.value("root", 0) == 0, ErrorCode::kParseError,
            "root must be node 0");
    const auto& root = nodes.at(0);
    require(root.at("id").get<NodeId>() == 0 &&
                root.at("parent").get<NodeId>() == 0 &&
                root.at("depth").get<std::size_t>() == 0 &&
                root.at("path_prob").get<double>() == 1.0,
            ErrorCode::kParseError, "malformed root node");
    TokenTree tree(root.at("token").get<Token>());
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      require(n.at("id").get<NodeId>() == i, ErrorCode::kParseError,
              "node ids must be dense and ordered");
      const NodeId id = tree.attach(n.at("parent").get<NodeId>(),
                                    n.at("token").get<Token>(),
                                    n.at("path_prob").get<double>());
      require(tree.node(id).depth == n.at("depth").get<std::size_t>(),
              ErrorCode::kParseError,
              "depth mismatch at node " + std::to_string(i));
    }
    return tree;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

// Candidate entry competing for selection. Ordering is a strict total
// order: higher path probability first, then smaller request index,
// shallower depth, smaller token id, smaller node id.
struct FrontierEntry {
  double path_prob = 0.0;
  std::size_t request = 0;
  std::size_t depth = 0;
  Token token = 0;
  NodeId node = 0;
};

inline bool ranks_before(const FrontierEntry& a, const FrontierEntry& b) {
  if (a.path_prob != b.path_prob) return a.path_prob > b.path_prob;
  if (a.request != b.request) return a.request < b.request;
  if (a.depth != b.depth) return a.depth < b.depth;
  if (a.token != b.token) return a.token < b.token;
  return a.node < b.node;
}

inline FrontierEntry frontier_entry(const TreeNode& n, std::size_t request) {
  return {n.path_prob, request, n.depth, n.token, n.id};
}

class Frontier {
 public:
  void push(const FrontierEntry& e) { heap_.push(e); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

  const FrontierEntry& top() const {
    require(!heap_.empty(), ErrorCode::kEmptyFrontier, "frontier is empty");
    return heap_.top();
  }

  FrontierEntry pop() {
    FrontierEntry e = top();
    heap_.pop();
    return e;
  }

 private:
  struct After {
    bool operator()(const FrontierEntry& a, const FrontierEntry& b) const {
      return ranks_before(b, a);
    }
  };
  std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, After> heap_;
};

}  // namespace slosched
