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


// Command-line front end: run, sweep, pattern, spread and scenario.
//
// Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure.

#include "slowbeam/slowbeam.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
  std::string scenario;
  bool small = false;
  std::vector<std::string> sets;
  std::string methods = "geb,geb-filtered,wiener,whitening,dft";
  std::optional<double> alpha, beta, sigma_est, snr;
  std::optional<int> nq, rank, trials, steps, burn_in;
  std::optional<std::uint64_t> seed;
  int channel_draws = 32;
  int training = 0;
  int threads = 1;
  bool no_sinr = false;
  std::string out;
  std::string summary;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario, "Scenario JSON file (default: built-in reference scenario)");
  cmd->add_flag("--small", a.small, "Use the N=32 preset of the reference scenario");
  cmd->add_option("--set", a.sets, "Override a scenario field, e.g. --set groups.1.num_users=2");
  cmd->add_option("--methods", a.methods, "Comma-separated methods; name[:beta=B][:nq=Q][:rank=R]");
  cmd->add_option("--alpha", a.alpha, "Mobility AR(1) coefficient");
  cmd->add_option("--beta", a.beta, "Recursive filtering coefficient");
  cmd->add_option("--sigma-est", a.sigma_est, "AoA estimation error std (degrees)");
  cmd->add_option("--snr", a.snr, "Input SNR of the intended group (dB); sets the noise power");
  cmd->add_option("--nq", a.nq, "Quantizer depth N_q");
  cmd->add_option("--rank", a.rank, "Rank r of the patch kernel approximation");
  cmd->add_option("--trials", a.trials, "Monte Carlo trials");
  cmd->add_option("--steps", a.steps, "Slow-time horizon");
  cmd->add_option("--burn-in", a.burn_in, "Steps skipped when averaging");
  cmd->add_option("--seed", a.seed, "Master RNG seed");
  cmd->add_option("--channel-draws", a.channel_draws, "Channel draws per step on the Monte Carlo SINR path");
  cmd->add_option("--training", a.training, "Training length T; > 0 records analytical nMSE per step");
  cmd->add_option("--threads", a.threads, "Worker threads over trials");
  cmd->add_flag("--no-sinr", a.no_sinr, "Skip beamformer construction and SINR; record patch changes only");
  cmd->add_option("--out", a.out, "Per-step CSV output path")->required();
  cmd->add_option("--summary", a.summary, "Summary CSV output path");
}

slowbeam::ScenarioConfig build_config(const CommonArgs& a) {
  using namespace slowbeam;
  ScenarioConfig c;
  if (!a.scenario.empty()) c = load_scenario(a.scenario);
  else c = a.small ? small_table1_scenario() : default_table1_scenario();
  if (!a.scenario.empty() && a.small) c.num_antennas = 32;
  if (a.alpha) c.mobility_alpha = *a.alpha;
  if (a.beta) c.recursion_beta = *a.beta;
  if (a.sigma_est) c.aoa_error_std_deg = *a.sigma_est;
  if (a.nq) c.quantizer_depth = *a.nq;
  if (a.rank) c.d_rank = *a.rank;
  if (a.trials) c.monte_carlo_trials = *a.trials;
  if (a.steps) c.slow_time_steps = *a.steps;
  if (a.burn_in) c.burn_in = *a.burn_in;
  if (a.seed) c.rng_seed = *a.seed;
  if (a.snr) apply_axis_value(c, "snr", *a.snr);
  c = with_overrides(c, a.sets);
  validate(c);
  return c;
}

slowbeam::RunOptions build_options(const CommonArgs& a) {
  slowbeam::RunOptions o;
  o.channel_draws = a.channel_draws;
  o.training_length = a.training;
  o.threads = a.threads;
  o.evaluate_sinr = !a.no_sinr;
  o.build_beamformers = !a.no_sinr;
  return o;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  return os;
}

void write_results(const CommonArgs& a, const slowbeam::ScenarioConfig& c, const slowbeam::RunResult& r) {
  auto os = open_out(a.out);
  slowbeam::emit_csv(r, os);
  if (!a.summary.empty()) {
    auto ss = open_out(a.summary);
    slowbeam::emit_summary_csv(slowbeam::summarize(r, c.burn_in), ss);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slowbeam: slow-time adaptive statistical analog beamforming simulator"};
  app.require_subcommand(1);

  CommonArgs run_args;
  auto* run = app.add_subcommand("run", "Slow-time simulation of the selected methods");
  add_common(run, run_args);

  CommonArgs sweep_args;
  std::vector<std::string> axes;
  auto* sweep = app.add_subcommand("sweep", "Cross-product parameter sweep");
  add_common(sweep, sweep_args);
  sweep->add_option("--axis", axes, "Sweep axis name=v1,v2,... (alpha, beta, sigma_est, nq, rank, snr, sigma_v, "
                                    "training)")
      ->required();

  std::string pattern_out, pattern_scenario;
  bool pattern_small = false;
  auto* pattern = app.add_subcommand("pattern", "GEB and DFT beam patterns of the intended group");
  pattern->add_option("--out", pattern_out, "Output CSV path")->required();
  pattern->add_option("--scenario", pattern_scenario, "Scenario JSON file");
  pattern->add_flag("--small", pattern_small, "Use the N=32 preset");

  std::string spread_out, spread_scenario;
  std::vector<double> spread_sigmas{0.0, 0.5, 1.0, 2.0};
  auto* spread = app.add_subcommand("spread", "Beamspace profile of the mean filtered CCM");
  spread->add_option("--out", spread_out, "Output CSV path")->required();
  spread->add_option("--scenario", spread_scenario, "Scenario JSON file");
  spread->add_option("--sigma-est", spread_sigmas, "AoA error std values (degrees)")->delimiter(',');

  std::string scenario_out;
  bool scenario_small = false;
  auto* scenario = app.add_subcommand("scenario", "Write the built-in reference scenario as JSON");
  scenario->add_option("--out", scenario_out, "Output JSON path")->required();
  scenario->add_flag("--small", scenario_small, "Use the N=32 preset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  using namespace slowbeam;
  try {
    if (*run) {
      const auto c = build_config(run_args);
      const auto r = run_slow_time(c, parse_method_list(run_args.methods), build_options(run_args));
      write_results(run_args, c, r);
    } else if (*sweep) {
      const auto c = build_config(sweep_args);
      std::vector<SweepAxis> parsed;
      for (const auto& a : axes) parsed.push_back(parse_axis(a));
      const auto r = slowbeam::sweep(c, parsed, parse_method_list(sweep_args.methods), build_options(sweep_args));
      write_results(sweep_args, c, r);
    } else if (*pattern) {
      ScenarioConfig c = pattern_scenario.empty() ? (pattern_small ? small_table1_scenario() : default_table1_scenario())
                                                  : load_scenario(pattern_scenario);
      auto os = open_out(pattern_out);
      emit_pattern_csv(c, os);
    } else if (*spread) {
      ScenarioConfig c = spread_scenario.empty() ? default_table1_scenario() : load_scenario(spread_scenario);
      auto os = open_out(spread_out);
      emit_spread_csv(c, os, spread_sigmas);
    } else if (*scenario) {
      save_scenario(scenario_small ? small_table1_scenario() : default_table1_scenario(), scenario_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
