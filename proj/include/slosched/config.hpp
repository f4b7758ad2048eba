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

// Run configuration documents: parsing, validation and the config echo that
// goes into every report.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slosched/engine.hpp"
#include "slosched/lm_sim.hpp"
#include "slosched/spec_sched.hpp"
#include "slosched/workload.hpp"

namespace slosched {

struct WorkloadSpec {
  double duration_s = 60.0;
  RpsProfile profile;
};

// A single scripted planning step over a hand-written draft table.
struct PlanScenario {
  SpecParams params;
  TableModel draft{2};
  std::vector<std::vector<Token>> contexts;
  std::vector<double> deficits;
};

struct RunConfig {
  EngineConfig engine;
  OracleParams oracle;
  std::vector<SloCategory> categories;
  std::string categories_source = "defaults";
  std::optional<std::string> trace_path;
  std::optional<WorkloadSpec> workload;
  std::optional<std::string> out_dir;
  std::optional<PlanScenario> plan_scenario;
};

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& scope, const std::string& key) {
  return scope.empty() ? key : scope + "." + key;
}

[[noreturn]] inline void bad_field(const std::string& field,
                                   const std::string& what) {
  throw Error(ErrorCode::kInvalidConfig, "field '" + field + "': " + what);
}

inline void reject_unknown(const json& obj, const std::string& scope,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    bad_field(scope.empty() ? "<root>" : scope, "expected an object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) {
      bad_field(join_path(scope, item.key()), "unknown key");
    }
  }
}

template <typename T>
T field(const json& obj, const std::string& scope, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad_field(join_path(scope, key), "wrong type");
  }
}

inline std::size_t positive(const json& obj, const std::string& scope,
                            const char* key, std::size_t fallback) {
  if (obj.contains(key) && !obj.at(key).is_number_unsigned()) {
    bad_field(join_path(scope, key), "expected a non-negative integer");
  }
  const std::size_t v = field<std::size_t>(obj, scope, key, fallback);
  if (v == 0) bad_field(join_path(scope, key), "must be positive");
  return v;
}

inline std::size_t non_negative(const json& obj, const std::string& scope,
                                const char* key, std::size_t fallback) {
  if (obj.contains(key) && !obj.at(key).is_number_unsigned()) {
    bad_field(join_path(scope, key), "expected a non-negative integer");
  }
  return field<std::size_t>(obj, scope, key, fallback);
}

inline std::vector<RateSegment> parse_segments(const json& j,
                                               const std::string& scope) {
  if (j.is_number()) return {{0.0, j.get<double>()}};
  if (!j.is_array()) bad_field(scope, "expected a rate or a segment list");
  std::vector<RateSegment> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string s = scope + "[" + std::to_string(k) + "]";
    reject_unknown(j[k], s, {"start_s", "rps"});
    out.push_back({field<double>(j[k], s, "start_s", 0.0),
                   field<double>(j[k], s, "rps", -1.0)});
  }
  return out;
}

inline TableModel parse_table(const json& j, const std::string& scope) {
  reject_unknown(j, scope, {"vocab_size", "entries"});
  TableModel table(positive(j, scope, "vocab_size", 16));
  const std::size_t vocab = table.vocab_size();
  const json entries = j.value("entries", json::array());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const std::string s = scope + ".entries[" + std::to_string(k) + "]";
    reject_unknown(entries[k], s, {"context", "probs", "top"});
    const auto ctx = field<std::vector<Token>>(entries[k], s, "context", {});
    if (ctx.empty()) bad_field(s + ".context", "must be non-empty");
    std::vector<double> probs;
    if (entries[k].contains("probs")) {
      probs = field<std::vector<double>>(entries[k], s, "probs", {});
    } else {
      // Listed tokens get their mass; the rest is spread evenly.
      const auto top = field<std::vector<std::pair<Token, double>>>(
          entries[k], s, "top", {});
      probs.assign(vocab, -1.0);
      double listed = 0.0;
      for (const auto& [tok, p] : top) {
        if (tok < 0 || static_cast<std::size_t>(tok) >= vocab) {
          bad_field(s + ".top", "token outside the vocabulary");
        }
        probs[static_cast<std::size_t>(tok)] = p;
        listed += p;
      }
      const std::size_t rest = vocab - top.size();
      for (double& p : probs) {
        if (p < 0.0) p = rest == 0 ? 0.0 : (1.0 - listed) / static_cast<double>(rest);
      }
    }
    try {
      table.set(ctx, std::move(probs));
    } catch (const Error& e) {
      bad_field(s, e.what());
    }
  }
  return table;
}

inline PlanScenario parse_scenario(const json& j) {
  const std::string scope = "plan_scenario";
  reject_unknown(j, scope,
                 {"budget", "depth", "width", "n_max", "draft_table", "requests"});
  PlanScenario sc;
  sc.params.budget = positive(j, scope, "budget", 8);
  sc.params.depth = positive(j, scope, "depth", 3);
  sc.params.width = positive(j, scope, "width", 2);
  sc.params.n_max = positive(
      j, scope, "n_max",
      SpecParams::default_n_max(sc.params.depth, sc.params.width));
  if (!j.contains("draft_table")) bad_field(scope + ".draft_table", "missing");
  sc.draft = parse_table(j.at("draft_table"), scope + ".draft_table");
  const json reqs = j.value("requests", json::array());
  for (std::size_t k = 0; k < reqs.size(); ++k) {
    const std::string s = scope + ".requests[" + std::to_string(k) + "]";
    reject_unknown(reqs[k], s, {"context", "deficit"});
    auto ctx = field<std::vector<Token>>(reqs[k], s, "context", {});
    if (ctx.empty()) bad_field(s + ".context", "must be non-empty");
    sc.contexts.push_back(std::move(ctx));
    sc.deficits.push_back(field<double>(reqs[k], s, "deficit", 0.0));
  }
  if (sc.contexts.empty()) bad_field(scope + ".requests", "must be non-empty");
  try {
    sc.params.validate(sc.contexts.size());
  } catch (const Error& e) {
    bad_field(scope + ".budget", e.what());
  }
  return sc;
}

inline std::string resolve(const std::string& base_dir, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return p;
  return (std::filesystem::path(base_dir) / path).string();
}

}  // namespace detail

// Relative paths inside the document resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& j,
                                  const std::string& base_dir = "") {
  using detail::field;
  using detail::non_negative;
  using detail::positive;
  detail::reject_unknown(
      j, "",
      {"policy", "seed", "budget", "max_active", "n_max", "adaptive",
       "fixed_tree", "latency", "oracle", "categories", "trace", "workload",
       "out", "record_plans", "plan_scenario"});
  if (j.contains("fixed_tree") && j.contains("adaptive")) {
    detail::bad_field("fixed_tree",
                      "fixed_tree and adaptive are mutually exclusive");
  }

  RunConfig rc;
  EngineConfig& e = rc.engine;
  try {
    e.policy = SchedulerPolicy::parse(
        field<std::string>(j, "", "policy", "slo-customized"));
  } catch (const Error& err) {
    detail::bad_field("policy", err.what());
  }
  e.seed = field<std::uint64_t>(j, "", "seed", 1);
  e.budget = positive(j, "", "budget", 128);
  e.max_active = positive(j, "", "max_active", 32);
  if (j.contains("max_active") && e.max_active > e.budget) {
    detail::bad_field("max_active", "must not exceed budget");
  }
  if (j.contains("n_max")) e.n_max = positive(j, "", "n_max", 1);
  e.record_plans = non_negative(j, "", "record_plans", 0);

  e.latency.verify_budget = e.budget;
  if (j.contains("latency")) {
    const auto& l = j.at("latency");
    const std::string s = "latency";
    detail::reject_unknown(
        l, s,
        {"verify_base_s", "verify_budget", "draft_step_base_s",
         "draft_per_token_s", "draft_graph_discount", "select_per_token_s",
         "prefill_per_token_s"});
    LatencyModel& m = e.latency;
    m.verify_base = field<double>(l, s, "verify_base_s", m.verify_base);
    m.verify_budget = positive(l, s, "verify_budget", m.verify_budget);
    m.draft_step_base = field<double>(l, s, "draft_step_base_s", m.draft_step_base);
    m.draft_per_token = field<double>(l, s, "draft_per_token_s", m.draft_per_token);
    m.draft_graph_discount =
        field<double>(l, s, "draft_graph_discount", m.draft_graph_discount);
    m.select_per_token =
        field<double>(l, s, "select_per_token_s", m.select_per_token);
    m.prefill_per_token =
        field<double>(l, s, "prefill_per_token_s", m.prefill_per_token);
  }

  e.adaptive.b1 = e.budget;
  if (j.contains("adaptive")) {
    const auto& a = j.at("adaptive");
    const std::string s = "adaptive";
    detail::reject_unknown(a, s,
                           {"d_max", "d_min", "w_max", "b1", "b2", "c1", "c2"});
    AdaptiveConfig& c = e.adaptive;
    c.d_max = positive(a, s, "d_max", c.d_max);
    c.d_min = positive(a, s, "d_min", c.d_min);
    c.w_max = positive(a, s, "w_max", c.w_max);
    c.b1 = positive(a, s, "b1", c.b1);
    c.b2 = positive(a, s, "b2", c.b2);
    c.c1 = non_negative(a, s, "c1", c.c1);
    c.c2 = non_negative(a, s, "c2", c.c2);
    if (c.d_min > c.d_max) detail::bad_field("adaptive.d_min", "exceeds d_max");
  }
  if (j.contains("fixed_tree")) {
    const auto& f = j.at("fixed_tree");
    detail::reject_unknown(f, "fixed_tree", {"depth", "width"});
    e.fixed_tree = TreeShape{positive(f, "fixed_tree", "depth", 3),
                             positive(f, "fixed_tree", "width", 2)};
  }

  if (j.contains("oracle")) {
    const auto& o = j.at("oracle");
    const std::string s = "oracle";
    detail::reject_unknown(
        o, s, {"vocab_size", "seed", "sharpness", "drift", "context_window"});
    OracleParams& p = rc.oracle;
    p.vocab_size = positive(o, s, "vocab_size", p.vocab_size);
    p.seed = field<std::uint64_t>(o, s, "seed", p.seed);
    p.sharpness = field<double>(o, s, "sharpness", p.sharpness);
    p.drift = field<double>(o, s, "drift", p.drift);
    p.context_window = positive(o, s, "context_window", p.context_window);
    if (p.vocab_size < 2) detail::bad_field("oracle.vocab_size", "must be >= 2");
    if (!(p.sharpness >= 0.0)) {
      detail::bad_field("oracle.sharpness", "must be non-negative");
    }
    if (!(p.drift >= 0.0 && p.drift <= 1.0)) {
      detail::bad_field("oracle.drift", "must lie in [0, 1]");
    }
  }

  try {
    e.validate();
  } catch (const Error& err) {
    detail::bad_field("latency", err.what());
  }

  const double baseline = e.latency.baseline_latency();
  if (!j.contains("categories")) {
    rc.categories = default_categories(baseline);
  } else if (j.at("categories").is_string()) {
    const std::string path =
        detail::resolve(base_dir, j.at("categories").get<std::string>());
    std::ifstream in(path);
    if (!in) detail::bad_field("categories", "cannot open " + path);
    try {
      rc.categories = categories_from_json(nlohmann::json::parse(in), baseline);
    } catch (const nlohmann::json::exception& err) {
      detail::bad_field("categories", err.what());
    } catch (const Error& err) {
      detail::bad_field("categories", err.what());
    }
    rc.categories_source = path;
  } else {
    try {
      rc.categories = categories_from_json(j.at("categories"), baseline);
    } catch (const Error& err) {
      detail::bad_field("categories", err.what());
    }
    rc.categories_source = "inline";
  }

  if (j.contains("trace") && j.contains("workload")) {
    detail::bad_field("trace", "trace and workload are mutually exclusive");
  }
  if (j.contains("trace")) {
    rc.trace_path =
        detail::resolve(base_dir, field<std::string>(j, "", "trace", ""));
  }
  if (j.contains("workload")) {
    const auto& w = j.at("workload");
    const std::string s = "workload";
    detail::reject_unknown(w, s, {"duration_s", "rps", "per_category"});
    WorkloadSpec spec;
    spec.duration_s = field<double>(w, s, "duration_s", spec.duration_s);
    if (!(spec.duration_s > 0.0)) {
      detail::bad_field("workload.duration_s", "must be positive");
    }
    if (w.contains("rps")) {
      spec.profile.total = detail::parse_segments(w.at("rps"), "workload.rps");
    }
    if (w.contains("per_category")) {
      if (!w.at("per_category").is_object()) {
        detail::bad_field("workload.per_category", "expected an object");
      }
      for (const auto& item : w.at("per_category").items()) {
        spec.profile.per_category[item.key()] = detail::parse_segments(
            item.value(), "workload.per_category." + item.key());
      }
    }
    rc.workload = std::move(spec);
  }
  if (j.contains("out")) {
    rc.out_dir = detail::resolve(base_dir, field<std::string>(j, "", "out", ""));
  }
  if (j.contains("plan_scenario")) {
    rc.plan_scenario = detail::parse_scenario(j.at("plan_scenario"));
  }
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kInvalidConfig,
          "cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig,
                "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(
      j, std::filesystem::path(path).parent_path().string());
}

// Builds (or loads) the trace the config describes.
inline std::vector<TraceRecord> resolve_trace(const RunConfig& rc,
                                              std::vector<std::string>& warnings) {
  if (rc.trace_path) {
    LoadedTrace t = load_trace(*rc.trace_path, rc.categories);
    if (t.was_unsorted) warnings.push_back("trace was not sorted; re-sorted");
    return std::move(t.records);
  }
  if (rc.workload) {
    try {
      return gen_trace(rc.categories, rc.workload->profile,
                       rc.workload->duration_s, rc.engine.seed);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidConfig,
                  std::string("field 'workload': ") + e.what());
    }
  }
  warnings.push_back("no trace or workload configured; trace is empty");
  return {};
}

inline nlohmann::json config_echo(const RunConfig& rc) {
  nlohmann::json j = to_json(rc.engine);
  j["oracle"] = {{"vocab_size", rc.oracle.vocab_size},
                 {"seed", rc.oracle.seed},
                 {"sharpness", rc.oracle.sharpness},
                 {"drift", rc.oracle.drift},
                 {"context_window", rc.oracle.context_window}};
  j["categories"] = to_json(rc.categories)["categories"];
  j["categories_source"] = rc.categories_source;
  if (rc.trace_path) j["trace"] = *rc.trace_path;
  if (rc.workload) {
    auto segs = [](const std::vector<RateSegment>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const RateSegment& s : v) {
        a.push_back({{"start_s", s.start_s}, {"rps", s.rps}});
      }
      return a;
    };
    nlohmann::json w = {{"duration_s", rc.workload->duration_s},
                        {"rps", segs(rc.workload->profile.total)}};
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [name, s] : rc.workload->profile.per_category) {
      pc[name] = segs(s);
    }
    w["per_category"] = std::move(pc);
    j["workload"] = std::move(w);
  }
  return j;
}

// Executes the configured run; the report echoes the resolved config.
inline RunReport execute(const RunConfig& rc) {
  std::vector<std::string> warnings;
  const std::vector<TraceRecord> trace = resolve_trace(rc, warnings);
  RunReport r = run(trace, rc.categories, rc.engine, rc.oracle.target(),
                    rc.oracle.draft());
  r.config = config_echo(rc);
  r.warnings = std::move(warnings);
  return r;
}

struct ScenarioResult {
  DraftPlan plan;
  CandidateForest candidates;
};

inline ScenarioResult run_scenario(const PlanScenario& sc) {
  std::vector<std::span<const Token>> contexts(sc.contexts.begin(),
                                               sc.contexts.end());
  std::vector<SloTarget> targets;
  for (double a : sc.deficits) {
    targets.push_back({a, slo_deficit_capped(a, sc.params.depth)});
  }
  ScenarioResult out;
  out.plan = plan_iteration(sc.draft, contexts, sc.params, targets,
                            &out.candidates);
  return out;
}

inline nlohmann::json scenario_report(const PlanScenario& sc,
                                      const ScenarioResult& res) {
  nlohmann::json reqs = nlohmann::json::array();
  for (std::size_t i = 0; i < sc.contexts.size(); ++i) {
    reqs.push_back({{"context", sc.contexts[i]},
                    {"deficit", sc.deficits[i]},
                    {"capped_deficit",
                     slo_deficit_capped(sc.deficits[i], sc.params.depth)}});
  }
  return {{"scenario",
           {{"budget", sc.params.budget},
            {"depth", sc.params.depth},
            {"width", sc.params.width},
            {"n_max", sc.params.n_max},
            {"requests", std::move(reqs)}}},
          {"plan", to_json(res.plan)}};
}

}  // namespace slosched
