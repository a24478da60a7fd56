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

// Slow-time simulation loop, parameter sweeps and CSV output.

#ifndef SLOWBEAM_RUNNER_HPP
#define SLOWBEAM_RUNNER_HPP

#include "slowbeam/analytics.hpp"
#include "slowbeam/beamformers.hpp"
#include "slowbeam/channel_model.hpp"
#include "slowbeam/estimation.hpp"
#include "slowbeam/patch_engine.hpp"
#include "slowbeam/receiver.hpp"
#include "slowbeam/rng.hpp"
#include "slowbeam/scenario.hpp"
#include "slowbeam/types.hpp"

#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace slowbeam {

inline constexpr int kCsvSchemaVersion = 1;

/// A beamformer method with optional per-method overrides of the scenario's
/// beta, N_q and r.
struct MethodSpec {
  Method method = Method::kGeb;
  std::optional<double> beta;
  std::optional<int> nq;
  std::optional<int> rank;
};

/// Parses "name" or "name:beta=0.9:nq=2:rank=2".
inline MethodSpec parse_method_spec(const std::string& text) {
  std::stringstream ss(text);
  std::string part;
  std::getline(ss, part, ':');
  MethodSpec spec;
  try {
    spec.method = parse_method(part);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  while (std::getline(ss, part, ':')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("method option without '=': " + part);
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    try {
      if (key == "beta") spec.beta = std::stod(value);
      else if (key == "nq") spec.nq = std::stoi(value);
      else if (key == "rank") spec.rank = std::stoi(value);
      else throw ConfigError("unknown method option: " + key);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed method option: " + part);
    }
  }
  return spec;
}

inline std::vector<MethodSpec> parse_method_list(const std::string& text) {
  std::vector<MethodSpec> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_method_spec(item));
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

struct ResolvedMethod {
  Method method = Method::kGeb;
  double beta = 0.0;
  int nq = 1;
  int rank = 1;
};

inline ResolvedMethod resolve(const MethodSpec& spec, const ScenarioConfig& config) {
  ResolvedMethod r;
  r.method = spec.method;
  r.beta = spec.beta.value_or(config.recursion_beta);
  r.nq = spec.nq.value_or(config.quantizer_depth);
  r.rank = spec.rank.value_or(config.d_rank);
  if (!(r.beta >= 0.0 && r.beta < 1.0)) throw ConfigError("method beta must lie in [0,1)");
  if (r.nq < 1) throw ConfigError("method nq must be >= 1");
  if (r.rank < 1 || r.rank > config.num_antennas) throw ConfigError("method rank must lie in [1, N]");
  return r;
}

struct RunOptions {
  bool evaluate_sinr = true;
  bool build_beamformers = true;  // false: track patch-power changes only
  int channel_draws = 32;         // per step, for the Monte Carlo (SZF) path
  int training_length = 0;        // > 0 enables per-step analytical nMSE
  int threads = 1;
  int point = 0;                  // sweep point index written to every row
};

/// One row per (trial, step, method, user).
struct StepRecord {
  int point = 0;
  int trial = 0;
  int step = 0;
  int group = 0;  // 1-based
  int user = 0;   // 1-based
  std::string method;
  double alpha = 0.0;
  double beta = 0.0;
  double sigma_est_deg = 0.0;
  int nq = 0;
  int rank = 0;
  double snr_db = 0.0;
  double sinr_db = std::numeric_limits<double>::quiet_NaN();
  TermPowers terms;
  int n_delta_p = 0;
  int n_patch_l = 0;
  int complexity = 0;
  bool init = false;
  bool fallback = false;
  double nmse = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  std::vector<StepRecord> rows;
};

namespace detail {

struct PatchMethodState {
  std::shared_ptr<const DKernelBasis> basis;
  std::vector<std::vector<PatchPowerProfile>> filtered;  // [g][m]
  std::vector<std::vector<PatchPowerProfile>> quantized;
  QuantizedInverseState inverse;
  FilteredSteering steering;
  bool initialized = false;
};

struct MethodState {
  ResolvedMethod spec;
  FilteredCcmState filtered_ccms;
  PatchMethodState patch;
};

struct StepInputs {
  GroupCcms true_ccms;
  GroupCcms est_ccms;
  std::vector<std::vector<ThetaSector>> est_sectors;  // [g][m]
};

struct MethodOutput {
  CMatrix s;
  const GroupCcms* ccm_belief = nullptr;  // CCMs the method believes, for the estimator
  int n_delta_p = 0;
  int n_patch_l = 0;
  int complexity = 0;
  bool init = false;
  bool fallback = false;
};

inline CMatrix geb_beamformer(const GroupCcms& ccms, const CMatrix& ry, const ScenarioConfig& config) {
  const int gt = config.intended_group;
  const auto& grp = config.groups[gt];
  std::vector<std::pair<int, CMatrix>> blocks;
  for (std::size_t m = 0; m < grp.mpcs.size(); ++m)
    blocks.emplace_back(static_cast<int>(m), geb(ccms[gt][m], ry, grp.rf_chains_per_mpc[m]).vectors);
  return assemble(blocks).weights;
}

inline MethodOutput advance_patch_method(MethodState& ms, const StepInputs& in, const ScenarioConfig& config,
                                         int step, bool build) {
  auto& st = ms.patch;
  const int n = config.num_antennas;
  const int gt = config.intended_group;
  const auto& spec = ms.spec;
  if (!st.basis) st.basis = BasisCache::instance().patch_basis(n, spec.rank);

  std::vector<std::vector<PatchPowerProfile>> fresh(config.groups.size());
  for (std::size_t g = 0; g < config.groups.size(); ++g)
    for (std::size_t m = 0; m < config.groups[g].mpcs.size(); ++m) {
      const auto& sec = in.est_sectors[g][m];
      fresh[g].push_back(patch_profile(sec.mu, sec.sigma, config.groups[g].power_share(m), n));
    }
  if (!st.initialized) {
    st.filtered = fresh;
  } else {
    for (std::size_t g = 0; g < fresh.size(); ++g)
      for (std::size_t m = 0; m < fresh[g].size(); ++m)
        st.filtered[g][m] = recursive_filter_powers(st.filtered[g][m], fresh[g][m], spec.beta);
  }
  st.quantized = st.filtered;
  for (std::size_t g = 0; g < fresh.size(); ++g)
    for (std::size_t m = 0; m < fresh[g].size(); ++m) {
      const double h = quantizer_step_base(config.groups[g].power_share(m), in.est_sectors[g][m].sigma, n);
      st.quantized[g][m] = quantize_powers(st.filtered[g][m], h, spec.nq);
    }
  const PatchPowerProfile p_y_q = assemble_py(st.quantized, config);

  MethodOutput out;
  out.ccm_belief = &in.est_ccms;
  int n_pl = 0;
  for (const auto& p : st.quantized[gt]) n_pl = std::max(n_pl, p.support_size());
  out.n_patch_l = n_pl;

  if (!st.initialized) {
    out.init = true;
    out.n_delta_p = 0;
    out.complexity = n;
    if (build) st.inverse = init_inverse_state(p_y_q, *st.basis, step);
    else st.inverse.p_y_q = p_y_q;
  } else {
    if (build) {
      st.inverse = woodbury_update(std::move(st.inverse), p_y_q, *st.basis);
      st.inverse.step = step;
      out.n_delta_p = st.inverse.last.n_delta_p;
      out.fallback = st.inverse.last.fell_back;
    } else {
      out.n_delta_p = static_cast<int>(nonzero_patches(PatchPowerProfile(p_y_q.levels - st.inverse.p_y_q.levels)).size());
      st.inverse.p_y_q = p_y_q;
    }
    out.complexity = complexity_measure(spec.method, out.n_delta_p, n_pl, spec.rank, n);
  }

  if (build) {
    const auto& grp = config.groups[gt];
    std::vector<CMatrix> w;
    for (std::size_t m = 0; m < grp.mpcs.size(); ++m) {
      const auto& sec = in.est_sectors[gt][m];
      w.push_back(estimated_steering(sec.mu, sec.sigma, n, grp.rf_chains_per_mpc[m]));
    }
    st.steering = filter_steering(std::move(st.steering), w, spec.beta);
    std::vector<std::pair<int, CMatrix>> blocks;
    for (std::size_t m = 0; m < grp.mpcs.size(); ++m) {
      if (spec.method == Method::kWiener) {
        blocks.emplace_back(static_cast<int>(m), wiener_type(st.inverse, st.steering.per_mpc[m], step));
      } else {
        auto wo = whitening_type(st.inverse, st.quantized[gt][m], st.steering.per_mpc[m],
                                 grp.num_users * grp.symbol_energy, *st.basis, step);
        out.fallback = out.fallback || wo.fell_back;
        blocks.emplace_back(static_cast<int>(m), std::move(wo.block));
      }
    }
    out.s = assemble(blocks).weights;
  }
  st.initialized = true;
  return out;
}

inline MethodOutput advance_method(MethodState& ms, const StepInputs& in, const ScenarioConfig& config, int step,
                                   bool build) {
  const int n = config.num_antennas;
  const int gt = config.intended_group;
  MethodOutput out;
  switch (ms.spec.method) {
    case Method::kGebTrue:
      out.ccm_belief = &in.true_ccms;
      if (build) out.s = geb_beamformer(in.true_ccms, assemble_ry(in.true_ccms, config), config);
      break;
    case Method::kGeb:
      out.ccm_belief = &in.est_ccms;
      if (build) out.s = geb_beamformer(in.est_ccms, assemble_ry(in.est_ccms, config), config);
      break;
    case Method::kGebFiltered:
      ms.filtered_ccms = filter_ccms(std::move(ms.filtered_ccms), in.est_ccms, ms.spec.beta, config);
      out.ccm_belief = &ms.filtered_ccms.ccms;
      if (build) out.s = geb_beamformer(ms.filtered_ccms.ccms, ms.filtered_ccms.ry, config);
      break;
    case Method::kDft: {
      out.ccm_belief = &in.est_ccms;
      if (build) {
        std::vector<double> mu;
        for (const auto& sec : in.est_sectors[gt]) mu.push_back(sec.mu);
        out.s = dft_baseline(mu, config.groups[gt].rf_chains_per_mpc, n).weights;
      }
      break;
    }
    case Method::kWiener:
    case Method::kWhitening:
      return advance_patch_method(ms, in, config, step, build);
  }
  out.complexity = complexity_measure(ms.spec.method, 0, 0, ms.spec.rank, n);
  return out;
}

/// Per-user term powers of beamformer `s` against the true statistics.
inline std::vector<TermPowers> evaluate_terms(const CMatrix& s, const GroupCcms& true_ccms,
                                              const std::vector<ChannelRealization>& draws,
                                              const ScenarioConfig& config) {
  const int gt = config.intended_group;
  const int k_len = config.groups[gt].num_users;
  if (k_len == 1) {
    const auto eff = effective_set(s, nullptr, true_ccms, config);
    const auto a = cmf_sinr_analytical(eff, s, config, gt);
    TermPowers t;
    t.signal = a.p_s;
    t.isi = a.isi;
    t.mui = a.mui;
    t.igi = a.igi;
    t.noise = a.noise;
    return {t};
  }
  std::vector<TermPowers> acc(k_len);
  for (const auto& ch : draws) {
    const auto taps = effective_taps(s, channel_taps(ch, config));
    const auto y = szf(taps[gt]).y;
    const auto d = decompose_output(taps, taps[gt], y, s, config);
    for (int k = 0; k < k_len; ++k) {
      acc[k].signal += d.users[k].signal;
      acc[k].sicee += d.users[k].sicee;
      acc[k].isi += d.users[k].isi;
      acc[k].mui += d.users[k].mui;
      acc[k].igi += d.users[k].igi;
      acc[k].noise += d.users[k].noise;
    }
  }
  const double inv = 1.0 / static_cast<double>(draws.size());
  for (auto& t : acc) {
    t.signal *= inv;
    t.sicee *= inv;
    t.isi *= inv;
    t.mui *= inv;
    t.igi *= inv;
    t.noise *= inv;
  }
  return acc;
}

inline double step_nmse(const CMatrix& s, const GroupCcms& belief, const GroupCcms& true_ccms,
                        const TrainingBlock& tb, const ScenarioConfig& config) {
  const int gt = config.intended_group;
  const int k_len = config.groups[gt].num_users;
  const auto est = effective_set(s, nullptr, belief, config);
  const auto tru = effective_set(s, nullptr, true_ccms, config);
  const auto z = mmse_estimator(tb, est.r_eff[gt], est.r_eff_eta[gt], k_len);
  return nmse_analytical(z.z, tb, tru.r_eff[gt], tru.r_eff_eta[gt], k_len);
}

inline std::vector<StepRecord> run_trial(const ScenarioConfig& config, const std::vector<ResolvedMethod>& methods,
                                         const RunOptions& options, int trial) {
  const int gt = config.intended_group;
  const auto& grp_t = config.groups[gt];
  Rng mob_rng = make_rng(config.rng_seed, trial, Stream::kMobility);
  Rng aoa_rng = make_rng(config.rng_seed, trial, Stream::kAoaError);
  std::optional<TrainingBlock> training;
  if (options.training_length > 0) {
    Rng tr_rng = make_rng(config.rng_seed, trial, Stream::kTraining);
    training = build_training(config, gt, options.training_length, tr_rng);
  }

  std::vector<std::vector<MpcState>> mpcs(config.groups.size());
  for (std::size_t g = 0; g < config.groups.size(); ++g)
    for (const auto& spec : config.groups[g].mpcs) mpcs[g].push_back(initial_mpc_state(spec));

  std::vector<MethodState> states;
  for (const auto& m : methods) states.push_back(MethodState{m, {}, {}});

  const double snr_db = db10(grp_t.symbol_energy / config.noise_power);
  std::vector<StepRecord> rows;
  for (int step = 0; step < config.slow_time_steps; ++step) {
    StepInputs in;
    std::vector<std::vector<double>> true_c(config.groups.size()), est_c(config.groups.size());
    in.est_sectors.resize(config.groups.size());
    for (std::size_t g = 0; g < config.groups.size(); ++g)
      for (std::size_t m = 0; m < mpcs[g].size(); ++m) {
        if (step > 0) mpcs[g][m] = step_mobility(mpcs[g][m], config, mob_rng);
        mpcs[g][m].mu_phi_est = observe_aoa(mpcs[g][m], config, aoa_rng);
        const double spread = mpcs[g][m].sigma_phi;
        true_c[g].push_back(mpcs[g][m].mu_phi_true);
        est_c[g].push_back(mpcs[g][m].mu_phi_est);
        in.est_sectors[g].push_back(theta_sector(clamp_center(mpcs[g][m].mu_phi_est, spread), spread));
      }
    in.true_ccms = build_ccms(config, true_c);
    in.est_ccms = build_ccms(config, est_c);

    std::vector<ChannelRealization> draws;
    if (options.evaluate_sinr && options.build_beamformers && grp_t.num_users > 1) {
      Rng ch_rng = make_rng(config.rng_seed, trial, Stream::kChannel, static_cast<std::uint64_t>(step));
      GroupCcms factors(in.true_ccms.size());
      for (std::size_t g = 0; g < in.true_ccms.size(); ++g)
        for (const auto& r : in.true_ccms[g]) factors[g].push_back(detail::low_rank_factor(r, 1e-12));
      for (int d = 0; d < options.channel_draws; ++d)
        draws.push_back(sample_channels_from_roots(factors, config, ch_rng));
    }

    for (auto& ms : states) {
      MethodOutput mo;
      try {
        mo = advance_method(ms, in, config, step, options.build_beamformers);
      } catch (const NumericalError& e) {
        throw NumericalError("trial " + std::to_string(trial) + " step " + std::to_string(step) + " method " +
                             method_name(ms.spec.method) + ": " + e.what());
      }
      std::vector<TermPowers> terms(grp_t.num_users);
      bool have_terms = false;
      if (options.evaluate_sinr && options.build_beamformers) {
        terms = evaluate_terms(mo.s, in.true_ccms, draws, config);
        have_terms = true;
      }
      double nmse = std::numeric_limits<double>::quiet_NaN();
      if (training && options.build_beamformers) nmse = step_nmse(mo.s, *mo.ccm_belief, in.true_ccms, *training, config);
      for (int k = 0; k < grp_t.num_users; ++k) {
        StepRecord r;
        r.point = options.point;
        r.trial = trial;
        r.step = step;
        r.group = gt + 1;
        r.user = k + 1;
        r.method = method_name(ms.spec.method);
        r.alpha = config.mobility_alpha;
        r.beta = ms.spec.beta;
        r.sigma_est_deg = config.aoa_error_std_deg;
        r.nq = ms.spec.nq;
        r.rank = ms.spec.rank;
        r.snr_db = snr_db;
        if (have_terms) {
          r.terms = terms[k];
          r.sinr_db = sinr_db(terms[k]);
        }
        r.n_delta_p = mo.n_delta_p;
        r.n_patch_l = mo.n_patch_l;
        r.complexity = mo.complexity;
        r.init = mo.init;
        r.fallback = mo.fallback;
        r.nmse = nmse;
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

}  // namespace detail

/// Runs config.monte_carlo_trials independent trials of the slow-time loop.
/// All methods of a trial share mobility, AoA-error and channel draws.
inline RunResult run_slow_time(const ScenarioConfig& config, const std::vector<MethodSpec>& methods,
                               const RunOptions& options = {}) {
  validate(config);
  if (methods.empty()) throw ConfigError("run_slow_time: no methods");
  if (options.channel_draws < 1) throw ConfigError("channel_draws must be >= 1");
  if (options.training_length < 0) throw ConfigError("training_length must be >= 0");
  std::vector<ResolvedMethod> resolved;
  for (const auto& m : methods) resolved.push_back(resolve(m, config));

  const int trials = config.monte_carlo_trials;
  std::vector<std::vector<StepRecord>> per_trial(trials);
  const int workers = std::max(1, std::min(options.threads, trials));
  if (workers == 1) {
    for (int t = 0; t < trials; ++t) per_trial[t] = detail::run_trial(config, resolved, options, t);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (int t = w; t < trials; t += workers) per_trial[t] = detail::run_trial(config, resolved, options, t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  RunResult out;
  for (auto& rows : per_trial)
    for (auto& r : rows) out.rows.push_back(std::move(r));
  return out;
}

/// Sweepable parameters and the scenario fields they set.
inline void apply_axis_value(ScenarioConfig& config, const std::string& axis, double value) {
  if (axis == "alpha") config.mobility_alpha = value;
  else if (axis == "beta") config.recursion_beta = value;
  else if (axis == "sigma_est") config.aoa_error_std_deg = value;
  else if (axis == "nq") config.quantizer_depth = static_cast<int>(value);
  else if (axis == "rank") config.d_rank = static_cast<int>(value);
  else if (axis == "snr") config.noise_power = config.groups.at(config.intended_group).symbol_energy / from_db10(value);
  else if (axis == "sigma_v") config.mobility_sigma_v_deg = value;
  else if (axis != "training") throw ConfigError("unknown sweep axis: " + axis);
}

struct SweepAxis {
  std::string name;
  std::vector<double> values;
};

/// Parses "name=v1,v2,...".
inline SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep axis must look like name=v1,v2: " + text);
  SweepAxis axis;
  axis.name = text.substr(0, eq);
  std::stringstream ss(text.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      axis.values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("malformed sweep value: " + item);
    }
  }
  if (axis.values.empty()) throw ConfigError("sweep axis has no values: " + axis.name);
  return axis;
}

struct SweepPoint {
  int index = 0;
  std::vector<std::pair<std::string, double>> values;
};

/// Cross product of the axes, first axis slowest.
inline std::vector<SweepPoint> sweep_points(const std::vector<SweepAxis>& axes) {
  std::vector<SweepPoint> points(1);
  for (const auto& axis : axes) {
    std::vector<SweepPoint> next;
    for (const auto& p : points)
      for (double v : axis.values) {
        SweepPoint q = p;
        q.values.emplace_back(axis.name, v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }
  for (std::size_t i = 0; i < points.size(); ++i) points[i].index = static_cast<int>(i);
  return points;
}

/// Runs every grid point with its own seed derived from the master seed.
/// The "beta", "nq" and "rank" axes override every method's value.
inline RunResult sweep(const ScenarioConfig& config, const std::vector<SweepAxis>& axes,
                       const std::vector<MethodSpec>& methods, RunOptions options = {}) {
  RunResult out;
  for (const auto& point : sweep_points(axes)) {
    ScenarioConfig c = config;
    std::vector<MethodSpec> ms = methods;
    RunOptions o = options;
    o.point = point.index;
    for (const auto& [name, v] : point.values) {
      apply_axis_value(c, name, v);
      for (auto& m : ms) {
        if (name == "beta") m.beta = v;
        if (name == "nq") m.nq = static_cast<int>(v);
        if (name == "rank") m.rank = static_cast<int>(v);
      }
      if (name == "training") o.training_length = static_cast<int>(v);
    }
    std::seed_seq seq{static_cast<std::uint32_t>(config.rng_seed), static_cast<std::uint32_t>(config.rng_seed >> 32),
                      static_cast<std::uint32_t>(point.index), 0x5eedu};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    c.rng_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    validate(c);
    auto part = run_slow_time(c, ms, o);
    for (auto& r : part.rows) out.rows.push_back(std::move(r));
  }
  return out;
}

/// Aggregate of one (point, method, parameters, user) cell.
struct SummaryRow {
  int point = 0;
  std::string method;
  double alpha = 0.0;
  double beta = 0.0;
  double sigma_est_deg = 0.0;
  int nq = 0;
  int rank = 0;
  double snr_db = 0.0;
  int user = 0;
  int trials = 0;
  double mean_sinr_db = std::numeric_limits<double>::quiet_NaN();
  double outage = std::numeric_limits<double>::quiet_NaN();
  double mean_n_delta_p = 0.0;
  double mean_complexity = 0.0;
  double mean_nmse = std::numeric_limits<double>::quiet_NaN();
};

/// Per trial: the mean of the dB SINR over steps >= burn_in. Per cell: the
/// mean of those over trials and the fraction below `outage_threshold_db`.
/// Patch-change and complexity means skip the initialization step.
inline std::vector<SummaryRow> summarize(const RunResult& result, int burn_in = 0, double outage_threshold_db = 20.0) {
  using Key = std::tuple<int, std::string, double, int, int, int, double, double, double>;
  struct Acc {
    SummaryRow row;
    std::map<int, std::vector<double>> sinr_by_trial;
    double ndp = 0.0, cx = 0.0, nmse = 0.0;
    long n_upd = 0, n_nmse = 0;
  };
  std::map<Key, Acc> cells;
  std::vector<Key> order;
  for (const auto& r : result.rows) {
    const Key key{r.point, r.method, r.beta, r.nq, r.rank, r.user, r.alpha, r.sigma_est_deg, r.snr_db};
    auto [it, fresh] = cells.try_emplace(key);
    auto& a = it->second;
    if (fresh) {
      order.push_back(key);
      a.row.point = r.point;
      a.row.method = r.method;
      a.row.alpha = r.alpha;
      a.row.beta = r.beta;
      a.row.sigma_est_deg = r.sigma_est_deg;
      a.row.nq = r.nq;
      a.row.rank = r.rank;
      a.row.snr_db = r.snr_db;
      a.row.user = r.user;
    }
    if (r.step < burn_in) continue;
    if (!std::isnan(r.sinr_db)) a.sinr_by_trial[r.trial].push_back(r.sinr_db);
    else a.sinr_by_trial.try_emplace(r.trial);
    if (!r.init) {
      a.ndp += r.n_delta_p;
      a.cx += r.complexity;
      ++a.n_upd;
    }
    if (!std::isnan(r.nmse)) {
      a.nmse += r.nmse;
      ++a.n_nmse;
    }
  }
  std::vector<SummaryRow> out;
  for (const auto& key : order) {
    auto& a = cells.at(key);
    SummaryRow row = a.row;
    row.trials = static_cast<int>(a.sinr_by_trial.size());
    std::vector<double> averages;
    for (const auto& [trial, series] : a.sinr_by_trial)
      if (!series.empty()) averages.push_back(slow_time_average(series));
    if (!averages.empty()) {
      double s = 0.0;
      for (double v : averages) s += v;
      row.mean_sinr_db = s / static_cast<double>(averages.size());
      row.outage = outage_probability(averages, outage_threshold_db);
    }
    if (a.n_upd > 0) {
      row.mean_n_delta_p = a.ndp / static_cast<double>(a.n_upd);
      row.mean_complexity = a.cx / static_cast<double>(a.n_upd);
    }
    if (a.n_nmse > 0) row.mean_nmse = a.nmse / static_cast<double>(a.n_nmse);
    out.push_back(row);
  }
  return out;
}

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline const char* kStepCsvHeader =
    "point,trial,step,group,user,method,alpha,beta,sigma_est_deg,nq,rank,snr_db,sinr_db,p_signal,p_sicee,p_isi,"
    "p_mui,p_igi,p_noise,n_delta_p,n_patch_l,complexity,init,fallback,nmse";

inline const char* kSummaryCsvHeader =
    "point,method,alpha,beta,sigma_est_deg,nq,rank,snr_db,user,trials,mean_sinr_db,outage,mean_n_delta_p,"
    "mean_complexity,mean_nmse";

inline void write_schema_line(std::ostream& os) { os << "# schema_version: " << kCsvSchemaVersion << '\n'; }

/// Per-step table: schema line, header row, one row per record.
inline void emit_csv(const RunResult& result, std::ostream& os) {
  using detail::fmt;
  write_schema_line(os);
  os << kStepCsvHeader << '\n';
  for (const auto& r : result.rows) {
    os << r.point << ',' << r.trial << ',' << r.step << ',' << r.group << ',' << r.user << ',' << r.method << ','
       << fmt(r.alpha) << ',' << fmt(r.beta) << ',' << fmt(r.sigma_est_deg) << ',' << r.nq << ',' << r.rank << ','
       << fmt(r.snr_db) << ',' << fmt(r.sinr_db) << ',' << fmt(r.terms.signal) << ',' << fmt(r.terms.sicee) << ','
       << fmt(r.terms.isi) << ',' << fmt(r.terms.mui) << ',' << fmt(r.terms.igi) << ',' << fmt(r.terms.noise) << ','
       << r.n_delta_p << ',' << r.n_patch_l << ',' << r.complexity << ',' << (r.init ? 1 : 0) << ','
       << (r.fallback ? 1 : 0) << ',' << fmt(r.nmse) << '\n';
  }
  if (!os) throw std::runtime_error("emit_csv: write failed");
}

inline void emit_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
  using detail::fmt;
  write_schema_line(os);
  os << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.point << ',' << r.method << ',' << fmt(r.alpha) << ',' << fmt(r.beta) << ',' << fmt(r.sigma_est_deg)
       << ',' << r.nq << ',' << r.rank << ',' << fmt(r.snr_db) << ',' << r.user << ',' << r.trials << ','
       << fmt(r.mean_sinr_db) << ',' << fmt(r.outage) << ',' << fmt(r.mean_n_delta_p) << ','
       << fmt(r.mean_complexity) << ',' << fmt(r.mean_nmse) << '\n';
  }
  if (!os) throw std::runtime_error("emit_summary_csv: write failed");
}

/// Beam patterns of the GEB (true CCMs) and DFT beamformers of the intended
/// group over a 0.1 degree grid.
inline void emit_pattern_csv(const ScenarioConfig& config, std::ostream& os, double step_deg = 0.1) {
  using detail::fmt;
  validate(config);
  const int gt = config.intended_group;
  const int n = config.num_antennas;
  const GroupCcms ccms = nominal_ccms(config);
  const CMatrix s_geb = detail::geb_beamformer(ccms, assemble_ry(ccms, config), config);
  std::vector<double> mu;
  for (const auto& m : config.groups[gt].mpcs)
    mu.push_back(theta_sector(deg2rad(m.center_angle_deg), deg2rad(m.angular_spread_deg)).mu);
  const CMatrix s_dft = dft_baseline(mu, config.groups[gt].rf_chains_per_mpc, n).weights;
  std::vector<double> grid;
  for (double a = -90.0 + step_deg; a < 90.0 - 1e-9; a += step_deg) grid.push_back(deg2rad(a));
  write_schema_line(os);
  os << "beamformer,column,phi_deg,power,power_db\n";
  for (const auto& [name, s] : {std::pair<std::string, const CMatrix*>{"geb", &s_geb}, {"dft", &s_dft}}) {
    const RMatrix p = beam_pattern(*s, grid);
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      for (Eigen::Index i = 0; i < p.rows(); ++i)
        os << name << ',' << c + 1 << ',' << fmt(rad2deg(grid[i])) << ',' << fmt(p(i, c)) << ','
           << fmt(db10(std::max(p(i, c), 1e-300))) << '\n';
  }
}

/// Beamspace profile of the mean recursively filtered CCM of one MPC for
/// several azimuth-domain error levels.
inline void emit_spread_csv(const ScenarioConfig& config, std::ostream& os, const std::vector<double>& sigma_est_deg,
                            int group = -1, int mpc = 0, double step_deg = 0.05) {
  using detail::fmt;
  validate(config);
  const int g = group < 0 ? config.intended_group : group;
  const auto& spec = config.groups.at(g).mpcs.at(mpc);
  const double center = deg2rad(spec.center_angle_deg);
  const CMatrix r = mpc_ccm(center, deg2rad(spec.angular_spread_deg), 1.0, config.num_antennas);
  std::vector<double> grid;
  for (double a = spec.center_angle_deg - 15.0; a <= spec.center_angle_deg + 15.0 + 1e-9; a += step_deg)
    grid.push_back(deg2rad(std::clamp(a, -90.0, 90.0)));
  write_schema_line(os);
  os << "sigma_est_deg,sigma_e_rad,phi_deg,power,power_db,half_power_width_deg\n";
  for (double se : sigma_est_deg) {
    const double sigma_e = theta_error_std(deg2rad(se), center);
    const auto stats = recursive_filter_asymptotics(r, sigma_e, 0.0);
    const RVector prof = spread_spectrum_plot(stats.mean, grid);
    const double width = rad2deg(half_power_width(prof, grid));
    for (std::size_t i = 0; i < grid.size(); ++i)
      os << fmt(se) << ',' << fmt(sigma_e) << ',' << fmt(rad2deg(grid[i])) << ',' << fmt(prof(i)) << ','
         << fmt(db10(std::max(prof(i), 1e-300))) << ',' << fmt(width) << '\n';
  }
}

}  // namespace slowbeam

#endif  // SLOWBEAM_RUNNER_HPP
