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

// Synthetic target and draft language models. Each model is a pure
// function from a token context to a categorical distribution over the
// vocabulary, so every probabilistic claim about speculation can be tested
// against exact path probabilities.

#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "slosched/common.hpp"

namespace slosched {

// A token context split into a committed prefix (the request sequence) and
// a speculative suffix (a draft path). Avoids copying long sequences when
// walking trees.
class ContextView {
 public:
  ContextView() = default;
  ContextView(std::span<const Token> head) : head_(head) {}  // NOLINT
  ContextView(std::span<const Token> head, std::span<const Token> tail)
      : head_(head), tail_(tail) {}

  std::size_t size() const { return head_.size() + tail_.size(); }
  bool empty() const { return size() == 0; }

  // i-th token counted from the end; back(0) is the most recent token.
  Token back(std::size_t i) const {
    return i < tail_.size() ? tail_[tail_.size() - 1 - i]
                            : head_[head_.size() - 1 - (i - tail_.size())];
  }

 private:
  std::span<const Token> head_;
  std::span<const Token> tail_;
};

template <typename M>
concept NextTokenModel = requires(const M& m, const ContextView& ctx) {
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
  { m.next_token_dist(ctx) } -> std::same_as<std::vector<double>>;
};

struct Vocab {
  std::size_t size = 32;

  void validate() const {
    require(size >= 2, ErrorCode::kInvalidArgument, "vocab size must be >= 2");
  }
};

enum class ModelKind { kTarget, kDraft };

// Seeded context-conditioned categorical model. The distribution for a
// context is softmax(sharpness * g) with g a vector of standard normals
// drawn from a counter-based generator keyed by hash(seed, last
// `context_window` tokens). A draft model mixes the target with an
// independent distribution: q = (1 - drift) p + drift u.
class LmOracle {
 public:
  LmOracle(Vocab vocab, std::uint64_t seed, double sharpness, ModelKind kind,
           double drift = 0.0, std::size_t context_window = 8)
      : vocab_(vocab),
        seed_(seed),
        sharpness_(sharpness),
        kind_(kind),
        drift_(kind == ModelKind::kDraft ? drift : 0.0),
        context_window_(context_window) {
    vocab_.validate();
    require(sharpness > 0.0 && std::isfinite(sharpness),
            ErrorCode::kInvalidArgument, "sharpness must be positive");
    require(drift >= 0.0 && drift <= 1.0, ErrorCode::kInvalidArgument,
            "drift must lie in [0, 1]");
    require(context_window >= 1, ErrorCode::kInvalidArgument,
            "context window must be >= 1");
  }

  static LmOracle target(Vocab vocab, std::uint64_t seed, double sharpness,
                         std::size_t context_window = 8) {
    return LmOracle(vocab, seed, sharpness, ModelKind::kTarget, 0.0,
                    context_window);
  }

  static LmOracle draft(Vocab vocab, std::uint64_t seed, double sharpness,
                        double drift, std::size_t context_window = 8) {
    return LmOracle(vocab, seed, sharpness, ModelKind::kDraft, drift,
                    context_window);
  }

  // The target this draft approximates (same seed, no drift).
  LmOracle as_target() const {
    return target(vocab_, seed_, sharpness_, context_window_);
  }

  std::size_t vocab_size() const { return vocab_.size; }
  std::uint64_t seed() const { return seed_; }
  double sharpness() const { return sharpness_; }
  ModelKind kind() const { return kind_; }
  double drift() const { return drift_; }
  std::size_t context_window() const { return context_window_; }

  std::vector<double> next_token_dist(const ContextView& context) const {
    require(!context.empty(), ErrorCode::kInvalidArgument,
            "context must be non-empty");
    std::vector<double> p = generate(context, kTargetSalt);
    if (kind_ == ModelKind::kTarget || drift_ == 0.0) return p;
    const std::vector<double> u = generate(context, kDraftSalt);
    for (std::size_t t = 0; t < p.size(); ++t) {
      p[t] = (1.0 - drift_) * p[t] + drift_ * u[t];
    }
    return p;
  }

  std::vector<double> next_token_dist(std::span<const Token> context) const {
    return next_token_dist(ContextView(context));
  }

 private:
  static constexpr std::uint64_t kTargetSalt = 0x7A29E1C3D5B6F801ULL;
  static constexpr std::uint64_t kDraftSalt = 0x1F83D9ABFB41BD6BULL;

  std::uint64_t context_key(const ContextView& context,
                            std::uint64_t salt) const {
    const std::size_t n = std::min(context.size(), context_window_);
    std::uint64_t h = hash_combine(mix64(seed_), salt);
    h = hash_combine(h, n);
    for (std::size_t i = n; i-- > 0;) {
      h = hash_combine(h, static_cast<std::uint32_t>(context.back(i)));
    }
    return h;
  }

  std::vector<double> generate(const ContextView& context,
                               std::uint64_t salt) const {
    const std::uint64_t key = context_key(context, salt);
    const std::size_t v = vocab_.size;
    std::vector<double> logits(v);
    double max_logit = -INFINITY;
    for (std::size_t t = 0; t < v; ++t) {
      // Box-Muller on two counter-derived uniforms; 1 - u keeps log finite.
      const double u1 = 1.0 - unit_interval(mix64(key + 2 * t));
      const double u2 = unit_interval(mix64(key + 2 * t + 1));
      const double g = std::sqrt(-2.0 * std::log(u1)) *
                       std::cos(2.0 * std::numbers::pi * u2);
      logits[t] = sharpness_ * g;
      max_logit = std::max(max_logit, logits[t]);
    }
    double total = 0.0;
    for (double& x : logits) {
      x = std::exp(x - max_logit);
      total += x;
    }
    for (double& x : logits) x /= total;
    return logits;
  }

  Vocab vocab_;
  std::uint64_t seed_;
  double sharpness_;
  ModelKind kind_;
  double drift_;
  std::size_t context_window_;
};

// Hand-specified model: each entry maps a context suffix to a distribution.
// Lookup picks the longest matching suffix; unmatched contexts get the
// uniform distribution. Used for scripted scenarios and test doubles.
class TableModel {
 public:
  struct Entry {
    std::vector<Token> suffix;
    std::vector<double> probs;
  };

  explicit TableModel(std::size_t vocab_size) : vocab_size_(vocab_size) {
    Vocab{vocab_size}.validate();
  }

  void set(std::vector<Token> suffix, std::vector<double> probs) {
    require(!suffix.empty(), ErrorCode::kInvalidArgument,
            "table entry needs a non-empty context suffix");
    require(probs.size() == vocab_size_, ErrorCode::kInvalidArgument,
            "table entry must cover the whole vocabulary");
    double total = 0.0;
    for (double p : probs) {
      require(p >= 0.0, ErrorCode::kInvalidArgument,
              "table probabilities must be non-negative");
      total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, ErrorCode::kInvalidArgument,
            "table probabilities must sum to 1");
    for (Entry& e : entries_) {
      if (e.suffix == suffix) {
        e.probs = std::move(probs);
        return;
      }
    }
    entries_.push_back({std::move(suffix), std::move(probs)});
  }

  // Puts `mass` on `token` and spreads the rest uniformly over the others.
  void set_peaked(std::vector<Token> suffix, Token token, double mass) {
    std::vector<double> probs(vocab_size_,
                              (1.0 - mass) / static_cast<double>(vocab_size_ - 1));
    probs.at(static_cast<std::size_t>(token)) = mass;
    set(std::move(suffix), std::move(probs));
  }

  std::size_t vocab_size() const { return vocab_size_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::vector<double> next_token_dist(const ContextView& context) const {
    require(!context.empty(), ErrorCode::kInvalidArgument,
            "context must be non-empty");
    const Entry* best = nullptr;
    for (const Entry& e : entries_) {
      if (e.suffix.size() > context.size()) continue;
      if (best && e.suffix.size() <= best->suffix.size()) continue;
      bool match = true;
      for (std::size_t i = 0; i < e.suffix.size() && match; ++i) {
        match = e.suffix[e.suffix.size() - 1 - i] == context.back(i);
      }
      if (match) best = &e;
    }
    if (best) return best->probs;
    return std::vector<double>(vocab_size_,
                               1.0 / static_cast<double>(vocab_size_));
  }

  std::vector<double> next_token_dist(std::span<const Token> context) const {
    return next_token_dist(ContextView(context));
  }

 private:
  std::size_t vocab_size_;
  std::vector<Entry> entries_;
};

// Inverse-CDF draw from a probability vector with one uniform variate.
inline Token sample_from(std::span<const double> dist, RngStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t t = 0; t < dist.size(); ++t) {
    if (dist[t] <= 0.0) continue;
    acc += dist[t];
    last_positive = t;
    if (u < acc) return static_cast<Token>(t);
  }
  return static_cast<Token>(last_positive);
}

template <NextTokenModel M>
Token sample_token(const M& model, const ContextView& context, RngStream& rng) {
  const std::vector<double> dist = model.next_token_dist(context);
  return sample_from(dist, rng);
}

}  // namespace slosched
