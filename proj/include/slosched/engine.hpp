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

// Discrete-time serving simulator: admission, the speculate-select-verify
// loop, adaptive speculation control, a roofline latency model and the
// baseline schedulers it is compared against.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slosched/lm_sim.hpp"
#include "slosched/metrics.hpp"
#include "slosched/sched_math.hpp"
#include "slosched/spec_sched.hpp"
#include "slosched/verify.hpp"
#include "slosched/workload.hpp"

namespace slosched {

// Roofline-style cost model. Verification is memory-bound (flat) up to
// `verify_budget` tokens and compute-bound (linear) beyond it.
struct LatencyModel {
  double verify_base = 0.030;
  std::size_t verify_budget = 128;
  double draft_step_base = 0.002;
  double draft_per_token = 2e-5;
  // Multiplier on draft steps 2..d, whose shapes repeat and can be replayed.
  double draft_graph_discount = 0.8;
  double select_per_token = 1e-6;
  double prefill_per_token = 1e-4;

  void validate() const {
    require(verify_base > 0.0 && verify_budget >= 1, ErrorCode::kInvalidConfig,
            "latency: verify_base and verify_budget must be positive");
    require(draft_step_base >= 0.0 && draft_per_token >= 0.0 &&
                select_per_token >= 0.0 && prefill_per_token >= 0.0,
            ErrorCode::kInvalidConfig, "latency: costs must be non-negative");
    require(draft_graph_discount > 0.0 && draft_graph_discount <= 1.0,
            ErrorCode::kInvalidConfig,
            "latency: draft_graph_discount must lie in (0, 1]");
  }

  double verify_latency(std::size_t tokens) const {
    if (tokens <= verify_budget) return verify_base;
    return verify_base * static_cast<double>(tokens) /
           static_cast<double>(verify_budget);
  }

  // Step 1 decodes the n roots; steps 2..depth decode n * width tokens each.
  double draft_latency(std::size_t depth, std::size_t width,
                       std::size_t n) const {
    if (depth == 0 || n == 0) return 0.0;
    const double first =
        draft_step_base + draft_per_token * static_cast<double>(n);
    const double later =
        draft_graph_discount *
        (draft_step_base + draft_per_token * static_cast<double>(n * width));
    return first + static_cast<double>(depth - 1) * later;
  }

  double select_latency(std::size_t tokens) const {
    return select_per_token * static_cast<double>(tokens);
  }

  double prefill_latency(std::size_t prompt_len) const {
    return prefill_per_token * static_cast<double>(prompt_len);
  }

  // Per-token latency of a lone request under continuous batching.
  double baseline_latency() const { return verify_latency(1); }
};

struct AdaptiveConfig {
  std::size_t d_max = 8;
  std::size_t d_min = 1;
  std::size_t w_max = 4;
  std::size_t b1 = 128;
  std::size_t b2 = 32;
  std::size_t c1 = 1;
  std::size_t c2 = 1;

  void validate() const {
    require(d_min >= 1 && d_min <= d_max, ErrorCode::kInvalidConfig,
            "adaptive: need 1 <= d_min <= d_max");
    require(w_max >= 1 && b1 >= 1 && b2 >= 1, ErrorCode::kInvalidConfig,
            "adaptive: w_max, b1 and b2 must be positive");
  }
};

struct TreeShape {
  std::size_t depth = 1;
  std::size_t width = 1;

  friend bool operator==(const TreeShape&, const TreeShape&) = default;
};

// d = clip(D_max, D_min, floor(B1 / (n + c1)) - 1)
// w = clip(W_max, 1, floor(B2 / n) + c2)
inline TreeShape adaptive_params(std::size_t n_active,
                                 const AdaptiveConfig& cfg) {
  require(n_active >= 1, ErrorCode::kInvalidArgument, "n_active must be >= 1");
  using I = long long;
  const I d = clip<I>(static_cast<I>(cfg.d_max), static_cast<I>(cfg.d_min),
                      static_cast<I>(cfg.b1 / (n_active + cfg.c1)) - 1);
  const I w = clip<I>(static_cast<I>(cfg.w_max), 1,
                      static_cast<I>(cfg.b2 / n_active + cfg.c2));
  return {static_cast<std::size_t>(d), static_cast<std::size_t>(w)};
}

struct SchedulerPolicy {
  enum class Kind { kSloCustomized, kContinuousBatching, kFixedSpec };
  Kind kind = Kind::kSloCustomized;
  std::size_t k = 0;  // chain length for kFixedSpec

  static SchedulerPolicy slo_customized() { return {Kind::kSloCustomized, 0}; }
  static SchedulerPolicy continuous_batching() {
    return {Kind::kContinuousBatching, 0};
  }
  static SchedulerPolicy fixed_spec(std::size_t k) {
    require(k >= 1, ErrorCode::kInvalidArgument, "fixed-spec needs k >= 1");
    return {Kind::kFixedSpec, k};
  }

  std::string name() const {
    switch (kind) {
      case Kind::kSloCustomized: return "slo-customized";
      case Kind::kContinuousBatching: return "continuous-batching";
      case Kind::kFixedSpec: return "fixed-spec-" + std::to_string(k);
    }
    return "unknown";
  }

  static SchedulerPolicy parse(const std::string& s) {
    if (s == "slo-customized" || s == "slo") return slo_customized();
    if (s == "continuous-batching" || s == "cb") return continuous_batching();
    for (const std::string prefix : {"fixed-spec-", "spec-"}) {
      if (s.rfind(prefix, 0) == 0 && s.size() > prefix.size()) {
        const std::string digits = s.substr(prefix.size());
        if (digits.find_first_not_of("0123456789") == std::string::npos) {
          return fixed_spec(std::stoul(digits));
        }
      }
    }
    throw Error(ErrorCode::kInvalidConfig, "unknown policy '" + s + "'");
  }

  friend bool operator==(const SchedulerPolicy&, const SchedulerPolicy&) =
      default;
};

// Parameters of the synthetic target/draft pair.
struct OracleParams {
  std::size_t vocab_size = 32;
  std::uint64_t seed = 1;
  double sharpness = 3.0;
  double drift = 0.1;
  std::size_t context_window = 8;

  LmOracle target() const {
    return LmOracle::target(Vocab{vocab_size}, seed, sharpness, context_window);
  }
  LmOracle draft() const {
    return LmOracle::draft(Vocab{vocab_size}, seed, sharpness, drift,
                           context_window);
  }
};

struct EngineConfig {
  SchedulerPolicy policy;
  std::size_t budget = 128;
  // Admission cap; the effective cap never exceeds the budget.
  std::size_t max_active = 32;
  std::optional<std::size_t> n_max;
  std::optional<TreeShape> fixed_tree;  // disables adaptive control
  AdaptiveConfig adaptive;
  LatencyModel latency;
  std::uint64_t seed = 1;
  std::size_t record_plans = 0;  // plan log length (iterations)

  std::size_t active_cap() const {
    return std::min(max_active, budget);
  }

  void validate() const {
    require(budget >= 1, ErrorCode::kInvalidConfig, "budget must be >= 1");
    require(max_active >= 1, ErrorCode::kInvalidConfig,
            "max_active must be >= 1");
    require(!n_max || *n_max >= 1, ErrorCode::kInvalidConfig,
            "n_max must be >= 1");
    require(!fixed_tree || (fixed_tree->depth >= 1 && fixed_tree->width >= 1),
            ErrorCode::kInvalidConfig, "fixed tree depth and width must be >= 1");
    adaptive.validate();
    latency.validate();
  }
};

inline nlohmann::json to_json(const EngineConfig& c) {
  nlohmann::json j = {
      {"policy", c.policy.name()},
      {"budget", c.budget},
      {"max_active", c.active_cap()},
      {"seed", c.seed},
      {"record_plans", c.record_plans},
      {"latency",
       {{"verify_base_s", c.latency.verify_base},
        {"verify_budget", c.latency.verify_budget},
        {"draft_step_base_s", c.latency.draft_step_base},
        {"draft_per_token_s", c.latency.draft_per_token},
        {"draft_graph_discount", c.latency.draft_graph_discount},
        {"select_per_token_s", c.latency.select_per_token},
        {"prefill_per_token_s", c.latency.prefill_per_token}}}};
  j["n_max"] = c.n_max ? nlohmann::json(*c.n_max)
                       : nlohmann::json("depth+1+ceil(width/2)");
  if (c.fixed_tree) {
    j["fixed_tree"] = {{"depth", c.fixed_tree->depth},
                       {"width", c.fixed_tree->width}};
  } else {
    j["adaptive"] = {{"d_max", c.adaptive.d_max}, {"d_min", c.adaptive.d_min},
                     {"w_max", c.adaptive.w_max}, {"b1", c.adaptive.b1},
                     {"b2", c.adaptive.b2},       {"c1", c.adaptive.c1},
                     {"c2", c.adaptive.c2}};
  }
  return j;
}

// A request as handed to the engine. Queueing starts at arrival_s.
struct IncomingRequest {
  std::uint64_t id = 0;
  std::string category;
  double arrival_s = 0.0;
  double tpot_slo = 0.0;
  std::vector<Token> prompt;
  std::size_t output_len = 1;
};

struct IterationOutcome {
  std::size_t index = 0;
  std::size_t n_active = 0;
  TreeShape shape;
  std::size_t tokens_used = 0;
  double draft_s = 0.0;
  double select_s = 0.0;
  double verify_s = 0.0;
  double latency_s = 0.0;
  std::vector<std::uint64_t> request_ids;
  std::vector<std::size_t> accepted;  // per request, before output clipping
  std::vector<double> deficits;       // SLO-customized only
  std::optional<DraftPlan> plan;      // SLO-customized only
  std::size_t completed = 0;
};

template <NextTokenModel TargetModel = LmOracle,
          NextTokenModel DraftModel = LmOracle>
class Engine {
 public:
  Engine(EngineConfig config, TargetModel target, DraftModel draft)
      : config_(std::move(config)),
        target_(std::move(target)),
        draft_(std::move(draft)) {
    config_.validate();
    require(target_.vocab_size() == draft_.vocab_size(),
            ErrorCode::kInvalidConfig,
            "target and draft vocabularies must match");
  }

  const EngineConfig& config() const { return config_; }
  double clock() const { return clock_; }
  std::size_t iteration() const { return iteration_; }
  std::size_t pending_size() const { return pending_.size(); }
  const std::vector<RequestRecord>& completed() const { return completed_; }
  bool done() const { return pending_.empty() && active_.empty(); }

  std::vector<const RequestState*> active() const {
    std::vector<const RequestState*> out;
    for (const Active& a : active_) out.push_back(&a.state);
    return out;
  }

  // Requests must be submitted in non-decreasing arrival order.
  void submit(IncomingRequest req) {
    require(!req.prompt.empty(), ErrorCode::kMalformedTrace,
            "request needs a non-empty prompt");
    require(req.output_len >= 1 && req.tpot_slo > 0.0,
            ErrorCode::kMalformedTrace,
            "request needs output_len >= 1 and a positive TPOT target");
    require(pending_.empty() || pending_.back().arrival_s <= req.arrival_s,
            ErrorCode::kMalformedTrace, "requests must arrive in order");
    require(std::isfinite(req.arrival_s) && req.arrival_s >= 0.0,
            ErrorCode::kMalformedTrace, "arrival time must be non-negative");
    pending_.push_back(std::move(req));
  }

  // Runs one batch iteration, admitting arrivals first. Returns nullopt
  // once nothing is left to do.
  std::optional<IterationOutcome> step() {
    admit();
    if (active_.empty()) return std::nullopt;

    IterationOutcome out;
    out.index = iteration_;
    out.n_active = active_.size();
    for (Active& a : active_) {
      a.state.decode_latency = clock_ - a.first_decode_s;
      out.request_ids.push_back(a.state.id);
    }

    std::vector<std::span<const Token>> contexts;
    contexts.reserve(active_.size());
    for (const Active& a : active_) contexts.emplace_back(a.state.sequence);

    std::vector<TokenTree> trees;
    switch (config_.policy.kind) {
      case SchedulerPolicy::Kind::kSloCustomized:
        trees = plan_slo_customized(contexts, out);
        break;
      case SchedulerPolicy::Kind::kFixedSpec: {
        const std::size_t k = config_.policy.k;
        out.shape = {k, 1};
        for (std::size_t i = 0; i < contexts.size(); ++i) {
          trees.push_back(speculate_one(draft_, contexts[i], k, 1, i));
        }
        out.tokens_used = 0;
        for (const TokenTree& t : trees) out.tokens_used += t.size();
        out.draft_s = config_.latency.draft_latency(k, 1, active_.size());
        break;
      }
      case SchedulerPolicy::Kind::kContinuousBatching:
        out.shape = {0, 0};
        for (const std::span<const Token>& ctx : contexts) {
          trees.emplace_back(ctx.back());
        }
        out.tokens_used = trees.size();
        break;
    }
    out.verify_s = config_.latency.verify_latency(out.tokens_used);
    out.latency_s = out.draft_s + out.select_s + out.verify_s;

    std::vector<VerifyOutcome> verdicts;
    verdicts.reserve(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i) {
      RngStream rng =
          RngStream::derive(config_.seed, active_[i].state.id, iteration_);
      verdicts.push_back(
          verify_tree(target_, contexts[i], trees[i], rng));
    }

    clock_ += out.latency_s;
    last_latency_ = out.latency_s;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      RequestState& s = active_[i].state;
      const VerifyOutcome& v = verdicts[i];
      out.accepted.push_back(v.accepted_count);
      accepted_total_ += v.accepted_count;
      ++verifications_;
      const std::size_t take = std::min(v.accepted_path.size(),
                                        s.remaining_output);
      s.sequence.insert(s.sequence.end(), v.accepted_path.begin(),
                        v.accepted_path.begin() + static_cast<long>(take));
      s.emitted += take;
      s.remaining_output -= take;
      s.decode_latency = clock_ - active_[i].first_decode_s;
    }
    retire(out);
    if (out.plan && plans_.size() < config_.record_plans) {
      nlohmann::json entry = {{"iteration", out.index},
                              {"depth", out.shape.depth},
                              {"width", out.shape.width},
                              {"request_ids", out.request_ids},
                              {"deficits", out.deficits},
                              {"plan", to_json(*out.plan)}};
      plans_.push_back(std::move(entry));
    }
    ++iteration_;
    return out;
  }

  RunReport report() const {
    RunReport r;
    r.policy = config_.policy.name();
    r.seed = config_.seed;
    r.config = to_json(config_);
    r.records = completed_;
    std::sort(r.records.begin(), r.records.end(),
              [](const RequestRecord& a, const RequestRecord& b) {
                return a.id < b.id;
              });
    double first_arrival = 0.0;
    double last_completion = 0.0;
    for (std::size_t k = 0; k < r.records.size(); ++k) {
      first_arrival = k == 0 ? r.records[k].arrival_s
                             : std::min(first_arrival, r.records[k].arrival_s);
      last_completion = std::max(last_completion, r.records[k].completion_s);
    }
    r.aggregates = aggregate(r.records, r.records.empty()
                                            ? 0.0
                                            : last_completion - first_arrival);
    r.iterations = iteration_;
    r.verifications = verifications_;
    r.mean_accepted_per_verify =
        verifications_ == 0 ? 0.0
                            : static_cast<double>(accepted_total_) /
                                  static_cast<double>(verifications_);
    r.plans = plans_;
    return r;
  }

  RunReport run_to_completion() {
    while (step()) {
    }
    return report();
  }

 private:
  struct Active {
    RequestState state;
    std::string category;
    double arrival_s = 0.0;
    double first_decode_s = 0.0;
  };

  void admit() {
    if (active_.empty() && !pending_.empty() &&
        pending_.front().arrival_s > clock_) {
      clock_ = pending_.front().arrival_s;  // idle until the next arrival
    }
    const std::size_t first_new = active_.size();
    while (!pending_.empty() && pending_.front().arrival_s <= clock_ &&
           active_.size() < config_.active_cap()) {
      IncomingRequest req = std::move(pending_.front());
      pending_.pop_front();
      clock_ += config_.latency.prefill_latency(req.prompt.size());
      Active a;
      a.state.id = req.id;
      a.state.tpot_slo = req.tpot_slo;
      a.state.prompt_len = req.prompt.size();
      a.state.remaining_output = req.output_len;
      a.state.sequence = std::move(req.prompt);
      a.category = std::move(req.category);
      a.arrival_s = req.arrival_s;
      active_.push_back(std::move(a));
    }
    // Prefills are serialized ahead of the batch; decoding starts after all.
    for (std::size_t i = first_new; i < active_.size(); ++i) {
      active_[i].first_decode_s = clock_;
    }
  }

  std::vector<TokenTree> plan_slo_customized(
      const std::vector<std::span<const Token>>& contexts,
      IterationOutcome& out) {
    const std::size_t n = contexts.size();
    out.shape = config_.fixed_tree ? *config_.fixed_tree
                                   : adaptive_params(n, config_.adaptive);
    SpecParams params;
    params.depth = out.shape.depth;
    params.width = out.shape.width;
    params.budget = config_.budget;
    params.n_max = config_.n_max.value_or(
        SpecParams::default_n_max(params.depth, params.width));

    // The upcoming iteration's latency is estimated by the previous one;
    // the very first estimate comes from the latency model.
    const double t_spec = last_latency_.value_or(
        config_.latency.draft_latency(params.depth, params.width, n) +
        config_.latency.select_latency(params.budget) +
        config_.latency.verify_latency(params.budget));

    std::vector<SloTarget> targets;
    targets.reserve(n);
    for (const Active& a : active_) {
      const double deficit = slo_deficit(a.state, t_spec);
      targets.push_back({deficit, slo_deficit_capped(deficit, params.depth)});
      out.deficits.push_back(deficit);
    }
    DraftPlan plan = plan_iteration(draft_, contexts, params, targets);
    out.tokens_used = plan.tokens_used;
    out.draft_s = config_.latency.draft_latency(params.depth, params.width, n);
    out.select_s = config_.latency.select_latency(plan.tokens_used);
    std::vector<TokenTree> trees = plan.trees;
    out.plan = std::move(plan);
    return trees;
  }

  void retire(IterationOutcome& out) {
    std::vector<Active> still;
    still.reserve(active_.size());
    for (Active& a : active_) {
      if (a.state.remaining_output > 0) {
        still.push_back(std::move(a));
        continue;
      }
      RequestRecord r;
      r.id = a.state.id;
      r.category = a.category;
      r.arrival_s = a.arrival_s;
      r.first_decode_s = a.first_decode_s;
      r.completion_s = clock_;
      r.prompt_len = a.state.prompt_len;
      r.emitted = a.state.emitted;
      r.decode_latency_s = a.state.decode_latency;
      r.queueing_delay_s = a.first_decode_s - a.arrival_s;
      r.tpot_slo_s = a.state.tpot_slo;
      r.avg_tpot_s = r.decode_latency_s / static_cast<double>(r.emitted);
      r.slo_met = judge_request(r);
      completed_.push_back(std::move(r));
      ++out.completed;
    }
    active_ = std::move(still);
  }

  EngineConfig config_;
  TargetModel target_;
  DraftModel draft_;
  std::deque<IncomingRequest> pending_;
  std::vector<Active> active_;
  std::vector<RequestRecord> completed_;
  double clock_ = 0.0;
  std::size_t iteration_ = 0;
  std::optional<double> last_latency_;
  std::size_t accepted_total_ = 0;
  std::size_t verifications_ = 0;
  nlohmann::json plans_ = nlohmann::json::array();
};

// Synthesizes prompt tokens for trace records (uniform over the vocabulary,
// keyed by seed and request index) and builds engine requests.
inline std::vector<IncomingRequest> requests_from_trace(
    const std::vector<TraceRecord>& trace,
    const std::vector<SloCategory>& categories, std::size_t vocab_size,
    std::uint64_t seed) {
  std::map<std::string, double> tpot;
  for (const SloCategory& c : categories) tpot[c.name] = c.tpot_slo;
  std::vector<IncomingRequest> out;
  out.reserve(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceRecord& r = trace[i];
    const auto it = tpot.find(r.category);
    require(it != tpot.end(), ErrorCode::kUnknownCategory, r.category);
    require(r.prompt_len >= 1 && r.output_len >= 1, ErrorCode::kMalformedTrace,
            "trace record " + std::to_string(i) + " has an empty length");
    IncomingRequest req;
    req.id = i;
    req.category = r.category;
    req.arrival_s = r.arrival_time_s;
    req.tpot_slo = it->second;
    req.output_len = r.output_len;
    RngStream rng = RngStream::derive(seed, i, 0x50);
    req.prompt.resize(r.prompt_len);
    for (Token& t : req.prompt) {
      t = static_cast<Token>(rng.next() % vocab_size);
    }
    out.push_back(std::move(req));
  }
  return out;
}

template <NextTokenModel TargetModel, NextTokenModel DraftModel>
RunReport run(const std::vector<TraceRecord>& trace,
              const std::vector<SloCategory>& categories,
              const EngineConfig& config, TargetModel target,
              DraftModel draft) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    require(trace[i - 1].arrival_time_s <= trace[i].arrival_time_s,
            ErrorCode::kMalformedTrace, "trace must be sorted by arrival");
  }
  const std::size_t vocab = target.vocab_size();
  Engine<TargetModel, DraftModel> engine(config, std::move(target),
                                         std::move(draft));
  for (IncomingRequest& r :
       requests_from_trace(trace, categories, vocab, config.seed)) {
    engine.submit(std::move(r));
  }
  return engine.run_to_completion();
}

inline RunReport run(const std::vector<TraceRecord>& trace,
                     const std::vector<SloCategory>& categories,
                     const EngineConfig& config, const OracleParams& oracle) {
  RunReport r = run(trace, categories, config, oracle.target(), oracle.draft());
  r.config["oracle"] = {{"vocab_size", oracle.vocab_size},
                        {"seed", oracle.seed},
                        {"sharpness", oracle.sharpness},
                        {"drift", oracle.drift},
                        {"context_window", oracle.context_window}};
  return r;
}

}  // namespace slosched
