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

#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slosched/common.hpp"

namespace slosched {

struct RequestRecord {
  std::uint64_t id = 0;
  std::string category;
  double arrival_s = 0.0;
  double first_decode_s = 0.0;
  double completion_s = 0.0;
  std::size_t prompt_len = 0;
  std::size_t emitted = 0;
  double decode_latency_s = 0.0;
  double queueing_delay_s = 0.0;
  double tpot_slo_s = 0.0;
  double avg_tpot_s = 0.0;
  bool slo_met = false;
};

// A request meets its SLO when its average per-token decode latency is no
// greater than the target (boundary inclusive).
inline bool judge_request(double decode_latency_s, std::size_t emitted,
                          double tpot_slo_s) {
  require(emitted >= 1, ErrorCode::kInvalidArgument,
          "a judged request has emitted at least one token");
  return decode_latency_s / static_cast<double>(emitted) <= tpot_slo_s;
}

inline bool judge_request(const RequestRecord& r) {
  return judge_request(r.decode_latency_s, r.emitted, r.tpot_slo_s);
}

struct CategoryStats {
  std::size_t requests = 0;
  std::size_t met = 0;
  std::size_t emitted = 0;
  std::size_t met_tokens = 0;
  double slo_attainment = 0.0;
  double goodput = 0.0;
};

struct Aggregates {
  std::size_t requests = 0;
  std::size_t met = 0;
  std::size_t total_tokens = 0;
  std::size_t met_tokens = 0;
  double makespan_s = 0.0;
  double slo_attainment = 0.0;
  double goodput = 0.0;     // tokens/s over SLO-meeting requests
  double throughput = 0.0;  // tokens/s over all requests
  std::map<std::string, CategoryStats> per_category;
};

// Goodput and throughput share the makespan (first arrival to last
// completion) as denominator.
inline Aggregates aggregate(const std::vector<RequestRecord>& records,
                            double makespan_s) {
  Aggregates a;
  a.makespan_s = makespan_s;
  for (const RequestRecord& r : records) {
    ++a.requests;
    a.total_tokens += r.emitted;
    CategoryStats& c = a.per_category[r.category];
    ++c.requests;
    c.emitted += r.emitted;
    if (r.slo_met) {
      ++a.met;
      a.met_tokens += r.emitted;
      ++c.met;
      c.met_tokens += r.emitted;
    }
  }
  auto rate = [&](std::size_t tokens) {
    return makespan_s > 0.0 ? static_cast<double>(tokens) / makespan_s : 0.0;
  };
  if (a.requests > 0) {
    a.slo_attainment =
        static_cast<double>(a.met) / static_cast<double>(a.requests);
  }
  a.goodput = rate(a.met_tokens);
  a.throughput = rate(a.total_tokens);
  for (auto& [name, c] : a.per_category) {
    c.slo_attainment =
        static_cast<double>(c.met) / static_cast<double>(c.requests);
    c.goodput = rate(c.met_tokens);
  }
  return a;
}

struct RunReport {
  std::string policy;
  std::uint64_t seed = 0;
  nlohmann::json config;  // fully resolved configuration echo
  std::vector<RequestRecord> records;
  Aggregates aggregates;
  std::size_t iterations = 0;
  std::size_t verifications = 0;
  double mean_accepted_per_verify = 0.0;
  std::vector<std::string> warnings;
  nlohmann::json plans = nlohmann::json::array();  // optional plan log
};

inline nlohmann::json to_json(const Aggregates& a) {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [name, c] : a.per_category) {
    cats[name] = {{"requests", c.requests},
                  {"slo_met", c.met},
                  {"emitted", c.emitted},
                  {"slo_attainment", c.slo_attainment},
                  {"goodput_tok_s", c.goodput}};
  }
  return {{"requests", a.requests},
          {"slo_met", a.met},
          {"total_tokens", a.total_tokens},
          {"slo_met_tokens", a.met_tokens},
          {"makespan_s", a.makespan_s},
          {"goodput_window", "first-arrival-to-last-completion"},
          {"slo_attainment", a.slo_attainment},
          {"goodput_tok_s", a.goodput},
          {"throughput_tok_s", a.throughput},
          {"per_category", std::move(cats)}};
}

inline nlohmann::json to_json(const RequestRecord& r) {
  return {{"request_id", r.id},
          {"category", r.category},
          {"arrival_s", r.arrival_s},
          {"first_decode_s", r.first_decode_s},
          {"completion_s", r.completion_s},
          {"prompt_len", r.prompt_len},
          {"emitted", r.emitted},
          {"decode_latency_s", r.decode_latency_s},
          {"queueing_delay_s", r.queueing_delay_s},
          {"tpot_slo_s", r.tpot_slo_s},
          {"avg_tpot_s", r.avg_tpot_s},
          {"slo_met", r.slo_met}};
}

inline nlohmann::json to_json(const RunReport& report) {
  nlohmann::json recs = nlohmann::json::array();
  for (const RequestRecord& r : report.records) recs.push_back(to_json(r));
  nlohmann::json j = {{"policy", report.policy},
                      {"seed", report.seed},
                      {"config", report.config},
                      {"aggregates", to_json(report.aggregates)},
                      {"iterations", report.iterations},
                      {"verifications", report.verifications},
                      {"mean_accepted_per_verify",
                       report.mean_accepted_per_verify},
                      {"warnings", report.warnings},
                      {"requests", std::move(recs)}};
  if (!report.plans.empty()) j["plans"] = report.plans;
  return j;
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline std::string to_csv(const std::vector<RequestRecord>& records) {
  std::string out =
      "request_id,category,arrival_s,first_decode_s,completion_s,emitted,"
      "avg_tpot_s,slo_met\n";
  for (const RequestRecord& r : records) {
    out += std::to_string(r.id) + ',' + r.category + ',' +
           format_double(r.arrival_s) + ',' + format_double(r.first_decode_s) +
           ',' + format_double(r.completion_s) + ',' +
           std::to_string(r.emitted) + ',' + format_double(r.avg_tpot_s) +
           ',' + (r.slo_met ? "true" : "false") + '\n';
  }
  return out;
}

}  // namespace slosched
