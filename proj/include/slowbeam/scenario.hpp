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

// Scenario description: user groups, their multipath components, mobility
// and simulation controls. Angles are kept in degrees here and converted to
// radians by the channel model.

#ifndef SLOWBEAM_SCENARIO_HPP
#define SLOWBEAM_SCENARIO_HPP

#include "slowbeam/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace slowbeam {

struct MpcSpec {
  double center_angle_deg = 0.0;
  double angular_spread_deg = 1.0;
  int delay = 0;
  // Relative share of the group's unit channel power. Equal weights give the
  // equal split used by default.
  double power_weight = 1.0;

  bool operator==(const MpcSpec&) const = default;
};

struct GroupSpec {
  std::vector<MpcSpec> mpcs;
  int num_users = 1;
  double symbol_energy = 1.0;
  std::vector<int> rf_chains_per_mpc;

  int rf_chains() const {
    int d = 0;
    for (int c : rf_chains_per_mpc) d += c;
    return d;
  }
  int max_delay() const {
    int m = 0;
    for (const auto& mpc : mpcs) m = std::max(m, mpc.delay);
    return m;
  }
  /// Fraction of the group's unit power carried by MPC `m`.
  double power_share(std::size_t m) const {
    double total = 0.0;
    for (const auto& mpc : mpcs) total += mpc.power_weight;
    return mpcs[m].power_weight / total;
  }

  bool operator==(const GroupSpec&) const = default;
};

struct ScenarioConfig {
  int num_antennas = 100;
  std::vector<GroupSpec> groups;
  int channel_memory = 1;
  double noise_power = 1e-3;
  double mobility_alpha = 0.999;
  double mobility_sigma_v_deg = 3.0;
  double aoa_error_std_deg = 0.5;
  double recursion_beta = 0.9;
  int quantizer_depth = 2;
  int d_rank = 2;
  int slow_time_steps = 200;
  int monte_carlo_trials = 10;
  std::uint64_t rng_seed = 1;
  // 0-based index of the group whose receiver is simulated.
  int intended_group = 0;
  int burn_in = 0;

  int num_groups() const { return static_cast<int>(groups.size()); }

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid scenario: " + what);
}

}  // namespace detail

/// Checks every invariant; throws ConfigError naming the first violation.
inline void validate(const ScenarioConfig& c) {
  using detail::require;
  require(c.num_antennas >= 1, "num_antennas must be >= 1");
  require(c.noise_power > 0.0, "noise_power must be > 0");
  require(c.mobility_alpha > 0.0 && c.mobility_alpha < 1.0, "mobility_alpha must lie in (0,1)");
  require(c.mobility_sigma_v_deg >= 0.0, "mobility_sigma_v_deg must be >= 0");
  require(c.aoa_error_std_deg >= 0.0, "aoa_error_std_deg must be >= 0");
  require(c.recursion_beta >= 0.0 && c.recursion_beta < 1.0, "recursion_beta must lie in [0,1)");
  require(c.quantizer_depth >= 1, "quantizer_depth must be >= 1");
  require(c.d_rank >= 1 && c.d_rank <= c.num_antennas, "d_rank must lie in [1, num_antennas]");
  require(c.slow_time_steps >= 1, "slow_time_steps must be >= 1");
  require(c.monte_carlo_trials >= 1, "monte_carlo_trials must be >= 1");
  require(c.burn_in >= 0 && c.burn_in < c.slow_time_steps, "burn_in must lie in [0, slow_time_steps)");
  require(c.channel_memory >= 1, "channel_memory must be >= 1");
  if (!c.groups.empty()) {
    require(c.intended_group >= 0 && c.intended_group < c.num_groups(),
            "intended_group out of range");
  }
  for (std::size_t g = 0; g < c.groups.size(); ++g) {
    const auto& grp = c.groups[g];
    const std::string tag = "group " + std::to_string(g + 1) + ": ";
    require(!grp.mpcs.empty(), tag + "needs at least one MPC");
    require(grp.num_users >= 1, tag + "num_users must be >= 1");
    require(grp.symbol_energy > 0.0, tag + "symbol_energy must be > 0");
    require(grp.rf_chains_per_mpc.size() == grp.mpcs.size(),
            tag + "rf_chains_per_mpc must have one entry per MPC");
    for (int d : grp.rf_chains_per_mpc) require(d >= 1, tag + "rf_chains_per_mpc entries must be >= 1");
    require(grp.rf_chains() <= c.num_antennas, tag + "total RF chains exceed num_antennas");
    std::set<int> delays;
    for (const auto& m : grp.mpcs) {
      require(m.angular_spread_deg > 0.0, tag + "angular_spread_deg must be > 0");
      require(std::abs(m.center_angle_deg) + m.angular_spread_deg / 2.0 < 90.0,
              tag + "MPC sector exceeds the +-90 degree support");
      require(m.delay >= 0, tag + "delay must be >= 0");
      require(m.delay < c.channel_memory, tag + "delay must be < channel_memory");
      require(m.power_weight > 0.0, tag + "power_weight must be > 0");
      require(delays.insert(m.delay).second, tag + "MPC delays must be distinct");
    }
  }
}

inline int derived_channel_memory(const ScenarioConfig& c) {
  int m = 0;
  for (const auto& g : c.groups) m = std::max(m, g.max_delay());
  return m + 1;
}

// JSON mapping ---------------------------------------------------------------

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["num_antennas"] = c.num_antennas;
  j["num_groups"] = c.num_groups();
  j["channel_memory"] = c.channel_memory;
  j["noise_power"] = c.noise_power;
  j["mobility_alpha"] = c.mobility_alpha;
  j["mobility_sigma_v_deg"] = c.mobility_sigma_v_deg;
  j["aoa_error_std_deg"] = c.aoa_error_std_deg;
  j["recursion_beta"] = c.recursion_beta;
  j["quantizer_depth"] = c.quantizer_depth;
  j["d_rank"] = c.d_rank;
  j["slow_time_steps"] = c.slow_time_steps;
  j["monte_carlo_trials"] = c.monte_carlo_trials;
  j["rng_seed"] = c.rng_seed;
  j["intended_group"] = c.intended_group + 1;
  j["burn_in"] = c.burn_in;
  j["groups"] = nlohmann::json::array();
  for (const auto& g : c.groups) {
    nlohmann::json jg;
    jg["num_users"] = g.num_users;
    jg["symbol_energy"] = g.symbol_energy;
    jg["rf_chains_per_mpc"] = g.rf_chains_per_mpc;
    jg["mpcs"] = nlohmann::json::array();
    for (const auto& m : g.mpcs) {
      jg["mpcs"].push_back({{"center_angle_deg", m.center_angle_deg},
                            {"angular_spread_deg", m.angular_spread_deg},
                            {"delay", m.delay},
                            {"power_weight", m.power_weight}});
    }
    j["groups"].push_back(jg);
  }
  return j;
}

/// Builds a config from a parsed document. Unknown keys are rejected so that
/// typos in sweep overrides do not pass silently.
inline ScenarioConfig from_json(const nlohmann::json& j) {
  static const std::set<std::string> kTop = {
      "num_antennas", "num_groups", "channel_memory", "noise_power", "mobility_alpha",
      "mobility_sigma_v_deg", "aoa_error_std_deg", "recursion_beta", "quantizer_depth",
      "d_rank", "slow_time_steps", "monte_carlo_trials", "rng_seed", "intended_group",
      "burn_in", "groups"};
  static const std::set<std::string> kGroup = {"num_users", "symbol_energy", "rf_chains_per_mpc",
                                               "mpcs"};
  static const std::set<std::string> kMpc = {"center_angle_deg", "angular_spread_deg", "delay",
                                             "power_weight"};
  auto check_keys = [](const nlohmann::json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : obj.items()) {
      if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
    }
  };

  ScenarioConfig c;
  try {
    check_keys(j, kTop, "scenario");
    c.num_antennas = j.value("num_antennas", c.num_antennas);
    c.noise_power = j.value("noise_power", c.noise_power);
    c.mobility_alpha = j.value("mobility_alpha", c.mobility_alpha);
    c.mobility_sigma_v_deg = j.value("mobility_sigma_v_deg", c.mobility_sigma_v_deg);
    c.aoa_error_std_deg = j.value("aoa_error_std_deg", c.aoa_error_std_deg);
    c.recursion_beta = j.value("recursion_beta", c.recursion_beta);
    c.quantizer_depth = j.value("quantizer_depth", c.quantizer_depth);
    c.d_rank = j.value("d_rank", c.d_rank);
    c.slow_time_steps = j.value("slow_time_steps", c.slow_time_steps);
    c.monte_carlo_trials = j.value("monte_carlo_trials", c.monte_carlo_trials);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.intended_group = j.value("intended_group", 1) - 1;
    c.burn_in = j.value("burn_in", c.burn_in);
    if (!j.contains("groups") || !j["groups"].is_array()) throw ConfigError("scenario needs a 'groups' array");
    int gi = 0;
    for (const auto& jg : j["groups"]) {
      ++gi;
      const std::string where = "group " + std::to_string(gi);
      check_keys(jg, kGroup, where);
      GroupSpec g;
      g.num_users = jg.value("num_users", 1);
      g.symbol_energy = jg.value("symbol_energy", 1.0);
      if (!jg.contains("mpcs") || !jg["mpcs"].is_array()) throw ConfigError(where + " needs an 'mpcs' array");
      for (const auto& jm : jg["mpcs"]) {
        check_keys(jm, kMpc, where + " mpc");
        MpcSpec m;
        m.center_angle_deg = jm.at("center_angle_deg").get<double>();
        m.angular_spread_deg = jm.at("angular_spread_deg").get<double>();
        m.delay = jm.at("delay").get<int>();
        m.power_weight = jm.value("power_weight", 1.0);
        g.mpcs.push_back(m);
      }
      if (jg.contains("rf_chains_per_mpc")) {
        g.rf_chains_per_mpc = jg["rf_chains_per_mpc"].get<std::vector<int>>();
      } else {
        g.rf_chains_per_mpc.assign(g.mpcs.size(), 1);
      }
      c.groups.push_back(std::move(g));
    }
    if (j.contains("num_groups") && j["num_groups"].get<int>() != c.num_groups()) {
      throw ConfigError("invalid scenario: num_groups does not match the groups array");
    }
    c.channel_memory = j.contains("channel_memory") ? j["channel_memory"].get<int>()
                                                    : derived_channel_memory(c);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  validate(c);
  return c;
}

/// Applies a `key=value` override. Keys are dotted paths; group and MPC
/// indices are 1-based, e.g. `groups.2.num_users=3` or
/// `groups.1.mpcs.2.center_angle_deg=10`.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + assignment + "'");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(parts[i]);
      } catch (const std::exception&) {
        throw ConfigError("override path expects an index at '" + parts[i] + "'");
      }
      if (idx < 1 || idx > node->size()) throw ConfigError("override index out of range: " + key);
      node = &(*node)[idx - 1];
    } else {
      if (!node->contains(parts[i])) throw ConfigError("unknown override path: " + key);
      node = &(*node)[parts[i]];
    }
  }
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  (*node)[parts.back()] = value;
}

inline ScenarioConfig parse_scenario(const std::string& text,
                                     const std::vector<std::string>& overrides = {}) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

inline ScenarioConfig load_scenario(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), overrides);
}

inline void save_scenario(const ScenarioConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file: " + path);
  out << to_json(c).dump(2) << "\n";
}

/// Re-applies overrides to an already built config.
inline ScenarioConfig with_overrides(const ScenarioConfig& c, const std::vector<std::string>& overrides) {
  auto doc = to_json(c);
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

/// The four-group reference scenario: N=100, 30 dB input SNR for group 1.
/// Mobility, filtering and estimation-error knobs keep their defaults.
inline ScenarioConfig default_table1_scenario() {
  ScenarioConfig c;
  c.num_antennas = 100;
  c.noise_power = 1e-3;
  auto group = [](std::vector<MpcSpec> mpcs, int users, double es) {
    GroupSpec g;
    g.mpcs = std::move(mpcs);
    g.num_users = users;
    g.symbol_energy = es;
    g.rf_chains_per_mpc.assign(g.mpcs.size(), 1);
    return g;
  };
  c.groups.push_back(group({{0.0, 3.0, 0}, {9.75, 2.5, 5}, {22.0, 3.5, 11}}, 1, 1.0));
  c.groups.push_back(group({{27.5, 3.0, 3}, {15.25, 2.0, 9}}, 2, 10.0));
  c.groups.push_back(group({{-6.25, 3.5, 8}, {-13.5, 3.0, 17}}, 3, 100.0));
  c.groups.push_back(group({{-20.25, 3.0, 20}, {-27.0, 3.5, 29}}, 4, 1000.0));
  c.channel_memory = derived_channel_memory(c);
  validate(c);
  return c;
}

/// Same geometry on a 32-element array; used for quick property runs.
inline ScenarioConfig small_table1_scenario() {
  auto c = default_table1_scenario();
  c.num_antennas = 32;
  validate(c);
  return c;
}

}  // namespace slowbeam

#endif  // SLOWBEAM_SCENARIO_HPP
