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

#include "slosched/common.hpp"
#include "slosched/config.hpp"
#include "slosched/engine.hpp"
#include "slosched/lm_sim.hpp"
#include "slosched/metrics.hpp"
#include "slosched/optimal_sched.hpp"
#include "slosched/sched_math.hpp"
#include "slosched/spec_sched.hpp"
#include "slosched/token_tree.hpp"
#include "slosched/verify.hpp"
#include "slosched/workload.hpp"
