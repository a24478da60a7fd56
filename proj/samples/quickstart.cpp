// Copyright 2026 The slowbeam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the reduced N=32 reference scenario for a few trials and prints the
// per-method summary as CSV.

#include <iostream>

#include "slowbeam/slowbeam.hpp"

int main() {
  auto config = slowbeam::small_table1_scenario();
  config.monte_carlo_trials = 4;
  config.slow_time_steps = 50;
  config.mobility_alpha = 0.99;
  config.aoa_error_std_deg = 1.0;

  const auto methods = slowbeam::parse_method_list("geb-true,geb,geb-filtered,wiener,whitening,dft");
  const auto result = slowbeam::run_slow_time(config, methods);
  slowbeam::emit_summary_csv(slowbeam::summarize(result, 10), std::cout);
  return 0;
}
