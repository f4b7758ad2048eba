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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances, sample
// sizes and time limits are pinned below.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "slosched/slosched.hpp"
#include "support/two_request.hpp"
#include "support/oracles.hpp"

namespace {

using namespace slosched;
namespace fs = std::filesystem;

// Pinned parameters.
constexpr int kOptimalityInstances = 200;
constexpr double kOptimalityLimitS = 60;
constexpr int kConnectivityTrees = 1000;
constexpr double kConnectivityLimitS = 30;
constexpr int kAcceptanceSumTrees = 50;
constexpr int kAcceptanceSumTrials = 100000;
constexpr double kAcceptanceSumSigmas = 3.0;
constexpr double kAcceptanceSumLimitS = 120;
constexpr int kContainmentInstances = 200;
constexpr double kContainmentLimitS = 120;
constexpr double kAttainmentRatio = 1.2;
constexpr double kDirectionalRps = 24.0;
constexpr double kDirectionalLimitPerSeedS = 300;
constexpr double kTrendRps[] = {0.5, 4.0, 12.0, 24.0};
constexpr double kTrendInversionTolerance = 0.02;
constexpr int kTrendMaxInversions = 1;
constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr double kTraceSigmas = 3.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double x, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << x;
  return os.str();
}

Outcome optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  int mismatches = 0, feasible = 0, total = 0;
  for (; feasible < kOptimalityInstances; ++total) {
    const auto inst = testing::random_small_instance(rng, true);
    const OptimalPlan g = construct_optimal(inst.trees, inst.deficits, inst.budget);
    const OptimalPlan b = brute_force_optimal(inst.trees, inst.deficits, inst.budget);
    if (g.valid != b.valid || (g.valid && g.objective != b.objective)) ++mismatches;
    feasible += g.valid;
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < kOptimalityLimitS,
          std::to_string(total) + " instances (" + std::to_string(feasible) +
              " feasible), " + std::to_string(mismatches) +
              " mismatches, " + fmt(s) + "s"};
}

bool is_subtree(const TokenTree& sub, const TokenTree& source,
                const std::vector<NodeId>& ids) {
  if (!sub.check_invariants().empty() || ids.size() != sub.size()) return false;
  std::vector<bool> in(source.size(), false);
  for (NodeId v : ids) in[v] = true;
  for (NodeId v : ids) {
    if (!in[source.node(v).parent]) return false;
  }
  return true;
}

Outcome connectivity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(77001);
  int bad = 0, optimal_trees = 0, beam_trees = 0;
  while (optimal_trees < kConnectivityTrees) {
    const auto inst = testing::random_small_instance(rng, false);
    const OptimalPlan p = construct_optimal(inst.trees, inst.deficits, inst.budget);
    if (!p.valid) continue;
    for (std::size_t i = 0; i < p.trees.size() && optimal_trees < kConnectivityTrees; ++i, ++optimal_trees) {
      bad += !is_subtree(p.trees[i], inst.trees[i], p.selected[i]);
    }
  }
  std::uniform_real_distribution<double> a(-2.0, 8.0);
  while (beam_trees < kConnectivityTrees) {
    const std::size_t n = 1 + rng() % 4;
    const auto draft = LmOracle::draft(Vocab{2 + rng() % 30}, rng(), 2.0, 0.25);
    SpecParams sp{1 + rng() % 5, 1 + rng() % 4, n + rng() % 24, 1 + rng() % 8};
    std::vector<std::vector<Token>> ctx;
    std::vector<SloTarget> targets;
    for (std::size_t i = 0; i < n; ++i) {
      ctx.push_back(testing::random_context(draft.vocab_size(), 4, rng));
      const double d = a(rng);
      targets.push_back({d, slo_deficit_capped(d, sp.depth)});
    }
    const std::vector<std::span<const Token>> spans(ctx.begin(), ctx.end());
    CandidateForest forest;
    const DraftPlan plan = plan_iteration(draft, spans, sp, targets, &forest);
    for (std::size_t i = 0; i < n && beam_trees < kConnectivityTrees; ++i, ++beam_trees) {
      bad += !is_subtree(plan.trees[i], forest.trees[i], plan.selected[i]);
    }
  }
  const double s = seconds_since(t0);
  return {bad == 0 && s < kConnectivityLimitS,
          std::to_string(optimal_trees) + " + " + std::to_string(beam_trees) + " trees, " +
              std::to_string(bad) + " violations, " + fmt(s) + "s"};
}

Outcome acceptance_sum() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(31415);
  int outside = 0, sum_mismatch = 0;
  double worst = 0.0;
  for (int k = 0; k < kAcceptanceSumTrees; ++k) {
    const std::size_t vocab = 2 + rng() % 5;
    const auto target = LmOracle::target(Vocab{vocab}, rng(), 0.5 + (rng() % 6) * 0.5);
    const auto ctx = testing::random_context(vocab, 3, rng);
    const TokenTree tree = testing::random_true_tree(target, ctx, 3 + rng() % 14, 4, rng);
    RngStream walk = RngStream::derive(4711, static_cast<std::uint64_t>(k));
    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < kAcceptanceSumTrials; ++t) {
      const double c =
          static_cast<double>(verify_tree(target, ctx, tree, walk).accepted_count);
      sum += c;
      sum_sq += c * c;
    }
    const double n = kAcceptanceSumTrials;
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)));
    const double z = std::abs(mean - expected_accepted(tree)) / (sd / std::sqrt(n));
    worst = std::max(worst, z);
    outside += !(z <= kAcceptanceSumSigmas);
    std::vector<double> probs;
    for (const TreeNode& v : tree.nodes()) probs.push_back(v.path_prob);
    sum_mismatch += mean_acceptance(probs) != expected_accepted(tree);
  }
  const double s = seconds_since(t0);
  return {outside == 0 && sum_mismatch == 0 && s < kAcceptanceSumLimitS,
          std::to_string(kAcceptanceSumTrees) + " trees x " + std::to_string(kAcceptanceSumTrials) +
              " walks, worst |z| " + fmt(worst, 3) + ", " + std::to_string(outside) +
              " outside 3 sigma, " + std::to_string(sum_mismatch) +
              " sum-form mismatches, " + fmt(s) + "s"};
}

Outcome containment() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(27182);
  std::size_t violations = 0;
  int valid = 0, total = 0;
  for (; valid < kContainmentInstances; ++total) {
    const auto inst = testing::random_small_instance(rng, false);
    bool v = false;
    violations += testing::containment_violations(inst, &v);
    valid += v;
  }
  const double s = seconds_since(t0);
  return {violations == 0 && s < kContainmentLimitS,
          std::to_string(total) + " instances (" + std::to_string(valid) +
              " feasible), " + std::to_string(violations) + " violations, " + fmt(s) + "s"};
}

Outcome two_request() {
  const PlanScenario sc = testing::two_request_scenario();
  const ScenarioResult a = run_scenario(sc);
  const ScenarioResult b = run_scenario(sc);
  const bool trees = a.plan.selected[0] == std::vector<NodeId>{0, 1, 3, 5} &&
                     a.plan.selected[1] == std::vector<NodeId>{0, 1, 2, 3};
  const bool identical = to_json(a.plan).dump() == to_json(b.plan).dump();
  std::ifstream in(std::string(SLOSCHED_SOURCE_DIR) + "/tests/golden/two_request_plan.json");
  const bool golden =
      in.good() && nlohmann::json::parse(in) == scenario_report(sc, a);
  auto ids = [](const std::vector<NodeId>& v) {
    std::string out = "{";
    for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + std::to_string(v[k]);
    return out + "}";
  };
  return {trees && a.plan.tokens_used == 8 && identical && golden,
          "T0 " + ids(a.plan.selected[0]) + ", T1 " + ids(a.plan.selected[1]) +
              ", tokens_used " + std::to_string(a.plan.tokens_used) +
              ", repeat " + (identical ? "identical" : "differs") + ", golden " +
              (golden ? "match" : "mismatch")};
}

Outcome adaptive_table() {
  struct Row {
    std::size_t n;
    AdaptiveConfig c;
    TreeShape want;
  };
  // {d_max, d_min, w_max, b1, b2, c1, c2}
  const std::vector<Row> rows = {
      {7, {8, 1, 4, 64, 16, 1, 0}, {7, 2}},     // 64/8-1 = 7; 16/7 = 2
      {64, {8, 1, 4, 64, 16, 1, 0}, {1, 1}},    // 64/65-1 = -1 -> 1; 16/64 = 0 -> 1
      {1, {8, 1, 4, 64, 16, 1, 0}, {8, 4}},     // 31 -> 8; 16 -> 4
      {1, {8, 1, 4, 128, 32, 1, 1}, {8, 4}},    // 63 -> 8; 33 -> 4
      {4, {8, 1, 4, 128, 32, 1, 1}, {8, 4}},    // 24 -> 8; 9 -> 4
      {16, {8, 1, 4, 128, 32, 1, 1}, {6, 3}},   // 128/17 = 7, -1 = 6; 2+1 = 3
      {32, {8, 1, 4, 128, 32, 1, 1}, {2, 2}},   // 128/33 = 3, -1 = 2; 1+1 = 2
      {64, {8, 1, 4, 128, 32, 1, 1}, {1, 1}},   // 128/65 = 1, -1 = 0 -> 1; 0+1 = 1
      {10, {6, 2, 3, 100, 20, 0, 0}, {6, 2}},   // 100/10-1 = 9 -> 6; 20/10 = 2
      {40, {6, 2, 3, 100, 20, 0, 0}, {2, 1}},   // 100/40-1 = 1 -> 2; 0 -> 1
      {3, {5, 3, 8, 30, 60, 2, 5}, {5, 8}},     // 30/5-1 = 5; 20+5 = 25 -> 8
      {9, {5, 3, 8, 30, 60, 2, 5}, {3, 8}},     // 30/11-1 = 1 -> 3; 6+5 = 11 -> 8
      {50, {5, 3, 8, 30, 60, 2, 0}, {3, 1}},    // 30/52-1 -> 3; 60/50 = 1
  };
  int bad = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    bad += !(adaptive_params(rows[k].n, rows[k].c) == rows[k].want);
  }
  return {bad == 0, std::to_string(rows.size()) + " table rows, " +
                        std::to_string(bad) + " mismatches"};
}

RunConfig mixed_config(double rps, std::uint64_t seed) {
  RunConfig rc = parse_run_config(nlohmann::json::parse(R"({
    "budget": 128,
    "max_active": 32,
    "oracle": {"vocab_size": 32, "seed": 11, "sharpness": 3.0, "drift": 0.25},
    "workload": {"duration_s": 60}
  })"));
  rc.workload->profile = RpsProfile::constant(rps);
  rc.engine.seed = seed;
  return rc;
}

RunReport run_policy(RunConfig rc, const std::string& policy) {
  rc.engine.policy = SchedulerPolicy::parse(policy);
  return execute(rc);
}

Outcome directional() {
  bool ok = true;
  std::ostringstream detail;
  for (std::uint64_t seed : kSeeds) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig rc = mixed_config(kDirectionalRps, seed);
    const RunReport slo = run_policy(rc, "slo-customized");
    const RunReport cb = run_policy(rc, "continuous-batching");
    double best_fixed = 0.0;
    std::string best_name;
    for (const char* name : {"fixed-spec-1", "fixed-spec-3", "fixed-spec-5"}) {
      const RunReport r = run_policy(rc, name);
      if (r.aggregates.goodput > best_fixed) {
        best_fixed = r.aggregates.goodput;
        best_name = name;
      }
    }
    const double s = seconds_since(t0);
    const double ratio = slo.aggregates.slo_attainment / cb.aggregates.slo_attainment;
    const bool seed_ok = ratio >= kAttainmentRatio &&
                         slo.aggregates.goodput > cb.aggregates.goodput &&
                         slo.aggregates.goodput > best_fixed &&
                         s < kDirectionalLimitPerSeedS;
    ok = ok && seed_ok;
    detail << (seed == kSeeds[0] ? "" : "; ") << "seed " << seed << ": attainment "
           << fmt(slo.aggregates.slo_attainment, 3) << " vs CB "
           << fmt(cb.aggregates.slo_attainment, 3) << " (x" << fmt(ratio, 3)
           << "), goodput " << fmt(slo.aggregates.goodput, 5) << " vs CB "
           << fmt(cb.aggregates.goodput, 5) << " / " << best_name << " "
           << fmt(best_fixed, 5) << ", " << fmt(s, 3) << "s";
  }
  return {ok, detail.str()};
}

Outcome trend() {
  bool ok = true;
  std::ostringstream detail;
  for (std::uint64_t seed : kSeeds) {
    std::vector<double> acc;
    for (double rps : kTrendRps) {
      acc.push_back(run_policy(mixed_config(rps, seed), "slo-customized")
                        .mean_accepted_per_verify);
    }
    int inversions = 0;
    bool small = true;
    for (std::size_t k = 1; k < acc.size(); ++k) {
      if (acc[k] > acc[k - 1]) {
        ++inversions;
        small = small && acc[k] <= acc[k - 1] * (1 + kTrendInversionTolerance);
      }
    }
    ok = ok && inversions <= kTrendMaxInversions && small;
    detail << (seed == kSeeds[0] ? "" : "; ") << "seed " << seed << ":";
    for (double a : acc) detail << " " << fmt(a, 4);
  }
  return {ok, detail.str()};
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SLOSCHED_CLI) + " " + args + " > /dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "slosched_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"seed": 5, "workload": {"duration_s": 20, "rps": 10},
                           "record_plans": 5})";
  const int a = run_cli("run --config " + cfg.string() + " --out " + (dir / "a").string());
  const int b = run_cli("run --config " + cfg.string() + " --out " + (dir / "b").string());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  const std::string ra = slurp(dir / "a" / "report.json");
  const std::string rb = slurp(dir / "b" / "report.json");
  const bool same = a == 0 && b == 0 && !ra.empty() && ra == rb;
  return {same, "two CLI runs, " + std::to_string(ra.size()) + " bytes, " +
                    (same ? "byte-identical" : "DIFFERENT")};
}

Outcome trace_stats() {
  const auto cats = default_categories(0.030);
  constexpr double kRps = 4.0, kDuration = 300.0;
  bool ok = true;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = gen_trace(cats, RpsProfile::constant(kRps), kDuration, seed);
    const double lambda = kRps * kDuration;
    const double n = static_cast<double>(t.size());
    const double z_total = std::abs(n - lambda) / std::sqrt(lambda);
    worst = std::max(worst, z_total);
    ok = ok && z_total <= kTraceSigmas;
    for (const SloCategory& c : cats) {
      double k = 0;
      for (const auto& r : t) k += r.category == c.name;
      const double p = c.mix_weight;
      const double z = std::abs(k / n - p) / std::sqrt(p * (1 - p) / n);
      worst = std::max(worst, z);
      ok = ok && z <= kTraceSigmas;
    }
  }
  return {ok, "5 seeds, totals and 3 category fractions, worst |z| " + fmt(worst, 3)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 optimality vs brute force", optimality},
      {"2 connectivity", connectivity},
      {"3 expected acceptance decomposition", acceptance_sum},
      {"4 beam containment of optimal plan", containment},
      {"5 two-request golden plan", two_request},
      {"6 adaptive control table", adaptive_table},
      {"7 directional end-to-end", directional},
      {"8 acceptance vs load trend", trend},
      {"9 determinism", determinism},
      {"10 trace statistics", trace_stats},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << name << "] " << o.detail
              << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
