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

// slosched command-line front end: run, compare, sweep, gen-trace, oracle.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slosched/slosched.hpp"

namespace fs = std::filesystem;
using namespace slosched;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitInvalid = 2;

struct CommonOptions {
  std::string config;
  std::string trace;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> policies;
};

void write_atomically(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kInvalidConfig,
            "cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

RunConfig load_with_overrides(const CommonOptions& opt) {
  RunConfig rc = load_run_config(opt.config);
  if (opt.seed) rc.engine.seed = *opt.seed;
  if (!opt.trace.empty()) {
    rc.trace_path = opt.trace;
    rc.workload.reset();
  }
  if (!opt.out.empty()) rc.out_dir = opt.out;
  return rc;
}

fs::path out_dir(const RunConfig& rc) {
  return rc.out_dir ? fs::path(*rc.out_dir) : fs::path("slosched-out");
}

std::string summary_line(const RunReport& r) {
  std::ostringstream os;
  os << r.policy << ": requests=" << r.aggregates.requests
     << " slo_attainment=" << format_double(r.aggregates.slo_attainment)
     << " goodput=" << format_double(r.aggregates.goodput)
     << " mean_accepted=" << format_double(r.mean_accepted_per_verify);
  return os.str();
}

int cmd_run(const CommonOptions& opt) {
  RunConfig rc = load_with_overrides(opt);
  if (!opt.policies.empty()) {
    rc.engine.policy = SchedulerPolicy::parse(opt.policies.back());
  }
  const fs::path dir = out_dir(rc);
  if (rc.plan_scenario) {
    const ScenarioResult res = run_scenario(*rc.plan_scenario);
    write_atomically(dir / "plan.json",
                     dump(scenario_report(*rc.plan_scenario, res)));
    std::cout << "plan: tokens_used=" << res.plan.tokens_used << " -> "
              << (dir / "plan.json").string() << "\n";
    return kExitOk;
  }
  const RunReport report = execute(rc);
  write_atomically(dir / "report.json", dump(to_json(report)));
  write_atomically(dir / "records.csv", to_csv(report.records));
  for (const std::string& w : report.warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  std::cout << summary_line(report) << "\n";
  return kExitOk;
}

std::vector<std::string> default_policies() {
  return {"slo-customized", "continuous-batching", "fixed-spec-1",
          "fixed-spec-3", "fixed-spec-5"};
}

int cmd_compare(const CommonOptions& opt) {
  const RunConfig base = load_with_overrides(opt);
  const std::vector<std::string> names =
      opt.policies.empty() ? default_policies() : opt.policies;
  const fs::path dir = out_dir(base);
  std::string csv =
      "policy,requests,slo_attainment,goodput,throughput,mean_accepted\n";
  for (const std::string& name : names) {
    RunConfig rc = base;
    rc.engine.policy = SchedulerPolicy::parse(name);
    const RunReport r = execute(rc);
    write_atomically(dir / ("report_" + r.policy + ".json"), dump(to_json(r)));
    csv += r.policy + "," + std::to_string(r.aggregates.requests) + "," +
           format_double(r.aggregates.slo_attainment) + "," +
           format_double(r.aggregates.goodput) + "," +
           format_double(r.aggregates.throughput) + "," +
           format_double(r.mean_accepted_per_verify) + "\n";
    std::cout << summary_line(r) << "\n";
  }
  write_atomically(dir / "compare.csv", csv);
  return kExitOk;
}

int cmd_sweep(const CommonOptions& opt, const std::vector<double>& rps_list,
              std::size_t jobs) {
  const RunConfig base = load_with_overrides(opt);
  require(base.workload.has_value() || !base.trace_path,
          ErrorCode::kInvalidConfig,
          "field 'trace': sweep generates traces; use a workload section");
  for (double rps : rps_list) {
    require(rps > 0.0, ErrorCode::kInvalidConfig,
            "field 'rps': rates must be positive");
  }
  const std::vector<std::string> names =
      opt.policies.empty() ? std::vector<std::string>{"slo-customized"}
                           : opt.policies;
  struct Point {
    double rps;
    RunConfig rc;
    std::optional<RunReport> report;
    std::string error;
  };
  std::vector<Point> points;
  for (double rps : rps_list) {
    for (const std::string& name : names) {
      RunConfig rc = base;
      rc.engine.policy = SchedulerPolicy::parse(name);
      WorkloadSpec w = base.workload.value_or(WorkloadSpec{});
      w.profile = RpsProfile::constant(rps);
      rc.workload = w;
      points.push_back({rps, std::move(rc), std::nullopt, {}});
    }
  }
  const fs::path dir = out_dir(base);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < points.size(); k = next++) {
      Point& p = points[k];
      try {
        p.report = execute(p.rc);
        const std::string file = p.report->policy + "_rps" +
                                 format_double(p.rps) + ".json";
        write_atomically(dir / file, dump(to_json(*p.report)));
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::max<std::size_t>(jobs, 1); ++t) {
    pool.emplace_back(worker);
  }
  for (std::thread& t : pool) t.join();

  std::string csv = "rps,policy,attainment,goodput,mean_accepted\n";
  for (const Point& p : points) {
    if (!p.report) throw Error(ErrorCode::kInvalidConfig, p.error);
    const RunReport& r = *p.report;
    csv += format_double(p.rps) + "," + r.policy + "," +
           format_double(r.aggregates.slo_attainment) + "," +
           format_double(r.aggregates.goodput) + "," +
           format_double(r.mean_accepted_per_verify) + "\n";
  }
  write_atomically(dir / "sweep.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_gen_trace(const CommonOptions& opt, std::optional<double> rps,
                  std::optional<double> duration) {
  RunConfig rc = load_with_overrides(opt);
  WorkloadSpec w = rc.workload.value_or(WorkloadSpec{});
  if (rps) w.profile = RpsProfile::constant(*rps);
  if (duration) w.duration_s = *duration;
  require(!w.profile.total.empty() || !w.profile.per_category.empty(),
          ErrorCode::kInvalidConfig,
          "field 'workload.rps': no arrival rate given (config or --rps)");
  const auto trace = gen_trace(rc.categories, w.profile, w.duration_s,
                               rc.engine.seed);
  const fs::path path = opt.out.empty() ? fs::path("trace.jsonl")
                                        : fs::path(opt.out);
  write_atomically(path, to_jsonl(trace));
  std::cout << trace.size() << " requests -> " << path.string() << "\n";
  return kExitOk;
}

int cmd_oracle(const std::string& instance_path) {
  std::ifstream in(instance_path);
  require(static_cast<bool>(in), ErrorCode::kInvalidConfig,
          "cannot open instance " + instance_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  const OracleInstance inst = oracle_instance_from_json(j);
  const OptimalPlan greedy =
      construct_optimal(inst.trees, inst.deficits, inst.budget);
  const OptimalPlan brute =
      brute_force_optimal(inst.trees, inst.deficits, inst.budget);
  auto show = [](const OptimalPlan& p) {
    return p.valid ? format_double(p.objective) : std::string("INVALID");
  };
  const bool agree =
      greedy.valid == brute.valid && (!greedy.valid ||
                                      greedy.objective == brute.objective);
  std::cout << "construct_optimal: " << show(greedy) << "\n"
            << "brute_force_optimal: " << show(brute) << "\n"
            << "verdict: " << (agree ? "agree" : "MISMATCH") << "\n";
  return agree ? kExitOk : kExitMismatch;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool need_config) {
  auto* c = cmd->add_option("--config", opt.config, "run configuration (JSON)")
                ->check(CLI::ExistingFile);
  if (need_config) c->required();
  cmd->add_option("--trace", opt.trace, "trace file (JSONL), overrides config");
  cmd->add_option("--seed", opt.seed, "run seed, overrides config");
  cmd->add_option("--out", opt.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SLO-customized speculative decoding scheduler simulator"};
  app.require_subcommand(1);
  app.allow_extras(false);

  CommonOptions run_opt, cmp_opt, sweep_opt, gen_opt;
  std::vector<double> rps_list;
  std::size_t jobs = 1;
  std::optional<double> gen_rps, gen_duration;
  std::string instance;

  auto* run = app.add_subcommand("run", "simulate one policy over a trace");
  add_common(run, run_opt, true);
  run->add_option("--policy", run_opt.policies, "policy override")
      ->expected(1);

  auto* cmp = app.add_subcommand("compare", "run several policies on one trace");
  add_common(cmp, cmp_opt, true);
  cmp->add_option("--policy", cmp_opt.policies,
                  "policy to include (repeatable)");

  auto* sweep = app.add_subcommand("sweep", "sweep arrival rates");
  add_common(sweep, sweep_opt, true);
  sweep->add_option("--policy", sweep_opt.policies,
                    "policy to include (repeatable)");
  sweep->add_option("--rps", rps_list, "arrival rates (requests/s)")
      ->required()
      ->delimiter(',');
  sweep->add_option("--jobs", jobs, "parallel sweep points")
      ->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("gen-trace", "generate a JSONL trace");
  add_common(gen, gen_opt, true);
  gen->add_option("--rps", gen_rps, "constant arrival rate override");
  gen->add_option("--duration", gen_duration, "trace duration (s) override");

  auto* oracle =
      app.add_subcommand("oracle", "check construct_optimal against brute force");
  oracle->add_option("--instance", instance, "instance file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*run) return cmd_run(run_opt);
    if (*cmp) return cmd_compare(cmp_opt);
    if (*sweep) return cmd_sweep(sweep_opt, rps_list, jobs);
    if (*gen) return cmd_gen_trace(gen_opt, gen_rps, gen_duration);
    if (*oracle) return cmd_oracle(instance);
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what()
              << "\n";
    return e.code() == ErrorCode::kInternal ? kExitMismatch : kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
