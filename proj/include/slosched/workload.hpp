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

// Multi-SLO request traces: category definitions, synthetic Poisson trace
// generation over piecewise-constant rate profiles, and JSON Lines I/O.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slosched/common.hpp"

namespace slosched {

// Length distribution on [min, max] with pmf proportional to r^(k - min);
// r is fitted so the mean matches. r < 1 is a truncated geometric, r = 1
// uniform, r > 1 a reversed geometric for means above the midpoint.
class LengthDist {
 public:
  LengthDist() = default;
  LengthDist(std::size_t min, std::size_t mean, std::size_t max)
      : min_(min), mean_(mean), max_(max) {
    require(min >= 1 && min <= mean && mean <= max, ErrorCode::kInvalidArgument,
            "length distribution needs 1 <= min <= mean <= max");
    build();
  }

  std::size_t min() const { return min_; }
  std::size_t mean() const { return mean_; }
  std::size_t max() const { return max_; }

  // Exact mean of the fitted distribution.
  double fitted_mean() const {
    double m = 0.0;
    double prev = 0.0;
    for (std::size_t k = 0; k < cdf_.size(); ++k) {
      m += static_cast<double>(base_ + k) * (cdf_[k] - prev);
      prev = cdf_[k];
    }
    return m;
  }

  std::size_t sample(RngStream& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto k = static_cast<std::size_t>(it - cdf_.begin());
    return base_ + std::min(k, cdf_.size() - 1);
  }

  friend bool operator==(const LengthDist& a, const LengthDist& b) {
    return a.min_ == b.min_ && a.mean_ == b.mean_ && a.max_ == b.max_;
  }

 private:
  static std::vector<double> weights(double log_r, std::size_t span) {
    std::vector<double> w(span + 1);
    const double top = log_r > 0 ? log_r * static_cast<double>(span) : 0.0;
    for (std::size_t k = 0; k <= span; ++k) {
      w[k] = std::exp(log_r * static_cast<double>(k) - top);
    }
    return w;
  }

  static double offset_mean(double log_r, std::size_t span) {
    const std::vector<double> w = weights(log_r, span);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      num += static_cast<double>(k) * w[k];
      den += w[k];
    }
    return num / den;
  }

  void build() {
    const std::size_t span = max_ - min_;
    base_ = min_;
    if (span == 0 || mean_ == min_ || mean_ == max_) {
      // Point mass at whichever end the mean sits on.
      base_ = mean_;
      cdf_.assign(1, 1.0);
      return;
    }
    const double target = static_cast<double>(mean_ - min_);
    double lo = -50.0;
    double hi = 50.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (offset_mean(mid, span) < target ? lo : hi) = mid;
    }
    const std::vector<double> w = weights(0.5 * (lo + hi), span);
    double total = 0.0;
    for (double x : w) total += x;
    cdf_.resize(w.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      acc += w[k] / total;
      cdf_[k] = acc;
    }
    cdf_.back() = 1.0;
  }

  std::size_t min_ = 1;
  std::size_t mean_ = 1;
  std::size_t max_ = 1;
  std::size_t base_ = 1;
  std::vector<double> cdf_{1.0};
};

struct SloCategory {
  std::string name;
  double tpot_slo = 0.0;  // seconds
  LengthDist prompt_len;
  LengthDist output_len;
  double mix_weight = 0.0;
};

inline void validate_categories(const std::vector<SloCategory>& cats) {
  require(!cats.empty(), ErrorCode::kInvalidConfig, "no request categories");
  double total = 0.0;
  std::set<std::string> names;
  for (const SloCategory& c : cats) {
    require(!c.name.empty() && names.insert(c.name).second,
            ErrorCode::kInvalidConfig, "category names must be unique");
    require(c.tpot_slo > 0.0, ErrorCode::kInvalidConfig,
            "category " + c.name + " needs a positive tpot_slo");
    require(c.mix_weight >= 0.0 && c.mix_weight <= 1.0,
            ErrorCode::kInvalidConfig,
            "category " + c.name + " mix_weight must lie in [0, 1]");
    total += c.mix_weight;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorCode::kInvalidConfig,
          "category mix weights must sum to 1");
}

// Coding copilot at 1.2x the idle per-token latency, chatbot at 50 ms and
// summarization at 150 ms per token, mixed 60/20/20.
inline std::vector<SloCategory> default_categories(double baseline_latency) {
  return {
      {"coding-copilot", 1.2 * baseline_latency, LengthDist(32, 128, 512),
       LengthDist(16, 64, 256), 0.6},
      {"chatbot", 0.050, LengthDist(16, 96, 512), LengthDist(32, 160, 512),
       0.2},
      {"summarization", 0.150, LengthDist(256, 1024, 4096),
       LengthDist(32, 96, 256), 0.2},
  };
}

inline nlohmann::json length_to_json(const LengthDist& d) {
  return {{"min", d.min()}, {"mean", d.mean()}, {"max", d.max()}};
}

// Category documents name either an absolute `tpot_slo_s` or a
// `tpot_baseline_scale` resolved against the idle per-token latency.
inline std::vector<SloCategory> categories_from_json(const nlohmann::json& j,
                                                     double baseline_latency) {
  try {
    const nlohmann::json& arr = j.is_array() ? j : j.at("categories");
    std::vector<SloCategory> out;
    for (const auto& c : arr) {
      SloCategory cat;
      cat.name = c.at("name").get<std::string>();
      if (c.contains("tpot_slo_s")) {
        cat.tpot_slo = c.at("tpot_slo_s").get<double>();
      } else {
        cat.tpot_slo =
            c.at("tpot_baseline_scale").get<double>() * baseline_latency;
      }
      auto len = [&](const char* key) {
        const auto& l = c.at(key);
        return LengthDist(l.at("min").get<std::size_t>(),
                          l.at("mean").get<std::size_t>(),
                          l.at("max").get<std::size_t>());
      };
      cat.prompt_len = len("prompt_len");
      cat.output_len = len("output_len");
      cat.mix_weight = c.at("mix_weight").get<double>();
      out.push_back(std::move(cat));
    }
    validate_categories(out);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("categories: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidArgument) {
      throw Error(ErrorCode::kInvalidConfig, e.what());
    }
    throw;
  }
}

inline nlohmann::json to_json(const std::vector<SloCategory>& cats) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SloCategory& c : cats) {
    arr.push_back({{"name", c.name},
                   {"tpot_slo_s", c.tpot_slo},
                   {"prompt_len", length_to_json(c.prompt_len)},
                   {"output_len", length_to_json(c.output_len)},
                   {"mix_weight", c.mix_weight}});
  }
  return {{"categories", std::move(arr)}};
}

struct RateSegment {
  double start_s = 0.0;
  double rps = 0.0;
};

// Piecewise-constant arrival rate. `total` is split across categories by
// mix weight unless a category has its own profile.
struct RpsProfile {
  std::vector<RateSegment> total;
  std::map<std::string, std::vector<RateSegment>> per_category;

  static RpsProfile constant(double rps) { return {{{0.0, rps}}, {}}; }
};

struct TraceRecord {
  double arrival_time_s = 0.0;
  std::string category;
  std::size_t prompt_len = 1;
  std::size_t output_len = 1;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

namespace detail {

inline void validate_segments(const std::vector<RateSegment>& segs) {
  double prev = 0.0;
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const RateSegment& s = segs[k];
    require(std::isfinite(s.rps) && s.rps >= 0.0, ErrorCode::kInvalidProfile,
            "rates must be finite and non-negative");
    require(std::isfinite(s.start_s) && s.start_s >= 0.0 &&
                (k == 0 || s.start_s >= prev),
            ErrorCode::kInvalidProfile,
            "segment starts must be non-negative and non-decreasing");
    prev = s.start_s;
  }
}

}  // namespace detail

inline std::vector<TraceRecord> gen_trace(
    const std::vector<SloCategory>& categories, const RpsProfile& profile,
    double duration_s, std::uint64_t seed) {
  require(std::isfinite(duration_s) && duration_s > 0.0,
          ErrorCode::kInvalidProfile, "duration must be positive");
  detail::validate_segments(profile.total);
  for (const auto& [name, segs] : profile.per_category) {
    detail::validate_segments(segs);
    const bool known =
        std::any_of(categories.begin(), categories.end(),
                    [&](const SloCategory& c) { return c.name == name; });
    require(known, ErrorCode::kInvalidProfile,
            "profile names unknown category " + name);
  }

  std::vector<TraceRecord> out;
  for (std::size_t ci = 0; ci < categories.size(); ++ci) {
    const SloCategory& cat = categories[ci];
    std::vector<RateSegment> segs;
    if (auto it = profile.per_category.find(cat.name);
        it != profile.per_category.end()) {
      segs = it->second;
    } else {
      for (const RateSegment& s : profile.total) {
        segs.push_back({s.start_s, s.rps * cat.mix_weight});
      }
    }
    RngStream arrivals = RngStream::derive(seed, ci, 0xA7);
    RngStream lengths = RngStream::derive(seed, ci, 0x1E);
    for (std::size_t k = 0; k < segs.size(); ++k) {
      const double begin = segs[k].start_s;
      const double end = std::min(
          duration_s, k + 1 < segs.size() ? segs[k + 1].start_s : duration_s);
      if (segs[k].rps <= 0.0 || begin >= end) continue;
      std::exponential_distribution<double> gap(segs[k].rps);
      for (double t = begin + gap(arrivals.engine()); t < end;
           t += gap(arrivals.engine())) {
        const std::size_t p = cat.prompt_len.sample(lengths);
        const std::size_t o = cat.output_len.sample(lengths);
        out.push_back({t, cat.name, p, o});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TraceRecord& a, const TraceRecord& b) {
                     return a.arrival_time_s < b.arrival_time_s;
                   });
  return out;
}

inline std::string to_jsonl(const std::vector<TraceRecord>& records) {
  std::string out;
  for (const TraceRecord& r : records) {
    nlohmann::json j = {{"arrival_time_s", r.arrival_time_s},
                        {"category", r.category},
                        {"prompt_len", r.prompt_len},
                        {"output_len", r.output_len}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline void save_trace(const std::string& path,
                       const std::vector<TraceRecord>& records) {
  std::ofstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::kInvalidArgument,
          "cannot open " + path + " for writing");
  f << to_jsonl(records);
}

struct LoadedTrace {
  std::vector<TraceRecord> records;
  bool was_unsorted = false;
};

inline LoadedTrace parse_trace(std::istream& in,
                               const std::vector<SloCategory>& categories) {
  LoadedTrace out;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    TraceRecord r;
    for (const char* key :
         {"arrival_time_s", "category", "prompt_len", "output_len"}) {
      if (!j.is_object() || !j.contains(key)) {
        fail(std::string("missing key ") + key);
      }
    }
    try {
      r.arrival_time_s = j.at("arrival_time_s").get<double>();
      r.category = j.at("category").get<std::string>();
      const auto p = j.at("prompt_len").get<std::int64_t>();
      const auto o = j.at("output_len").get<std::int64_t>();
      if (!j.at("prompt_len").is_number_integer() ||
          !j.at("output_len").is_number_integer() || p < 1 || o < 1) {
        fail("prompt_len and output_len must be positive integers");
      }
      r.prompt_len = static_cast<std::size_t>(p);
      r.output_len = static_cast<std::size_t>(o);
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
    }
    if (!std::isfinite(r.arrival_time_s) || r.arrival_time_s < 0.0) {
      fail("arrival_time_s must be a non-negative number");
    }
    const bool known =
        std::any_of(categories.begin(), categories.end(),
                    [&](const SloCategory& c) { return c.name == r.category; });
    if (!known) {
      throw Error(ErrorCode::kUnknownCategory,
                  "line " + std::to_string(line_no) + ": " + r.category);
    }
    if (!out.records.empty() &&
        r.arrival_time_s < out.records.back().arrival_time_s) {
      out.was_unsorted = true;
    }
    out.records.push_back(std::move(r));
  }
  if (out.was_unsorted) {
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const TraceRecord& a, const TraceRecord& b) {
                       return a.arrival_time_s < b.arrival_time_s;
                     });
  }
  return out;
}

inline LoadedTrace load_trace(const std::string& path,
                              const std::vector<SloCategory>& categories) {
  std::ifstream f(path, std::ios::binary);
  require(static_cast<bool>(f), ErrorCode::kParseError,
          "cannot open trace " + path);
  return parse_trace(f, categories);
}

}  // namespace slosched
