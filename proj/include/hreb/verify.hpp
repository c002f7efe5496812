// Copyright 2026 The HREB-CRF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "hreb/crf.hpp"

namespace hreb::verify {

struct CaseResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double error = 0.0;
  double tolerance = 0.0;
  std::string replay;  // inputs of a failing case
};

struct SuiteReport {
  std::vector<CaseResult> cases;
  double seconds = 0.0;
  bool passed() const;
};

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kPartitionTolerance = 1e-8;
inline constexpr double kViterbiScoreTolerance = 1e-10;
inline constexpr double kEmaTolerance = 1e-12;

SuiteReport run_grad_suite();
SuiteReport run_crf_suite(std::size_t instances = 200, std::uint64_t seed = 20240611);
SuiteReport run_ema_suite();
// "all" runs the three suites in order.
SuiteReport run_suite(const std::string& name);

// Exhaustive oracles over all C^n paths.
double brute_log_partition(const Tensor& emissions, const Tensor& trans, const crf::Transitions& open);
// Max-scoring path; among ties the one smallest when read from the last
// position backwards, matching crf::viterbi.
crf::Decoded brute_viterbi(const Tensor& emissions, const Tensor& trans, const crf::Transitions& open);

std::string format_table(const SuiteReport& r);

}  // namespace hreb::verify
