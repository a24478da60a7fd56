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

// Uplink receiver chain: observation synthesis, analog projection, channel
// matched filtering, spatial zero forcing and output-term bookkeeping.

#ifndef SLOWBEAM_RECEIVER_HPP
#define SLOWBEAM_RECEIVER_HPP

#include "slowbeam/beamformers.hpp"
#include "slowbeam/channel_model.hpp"
#include "slowbeam/rng.hpp"
#include "slowbeam/scenario.hpp"
#include "slowbeam/types.hpp"

#include <limits>
#include <map>
#include <vector>

namespace slowbeam {

/// Per-delay taps [l] of one group, each rows x K_g. Delays without an MPC
/// hold zero matrices.
using TapSet = std::vector<CMatrix>;

/// Rearranges a realization into per-delay taps [g][l] of size N x K_g.
inline std::vector<TapSet> channel_taps(const ChannelRealization& channels, const ScenarioConfig& config) {
  const int n = config.num_antennas;
  const int l_len = config.channel_memory;
  if (channels.h.size() != config.groups.size()) throw std::invalid_argument("channel_taps: group count mismatch");
  std::vector<TapSet> taps(config.groups.size());
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const auto& grp = config.groups[g];
    taps[g].assign(l_len, CMatrix::Zero(n, grp.num_users));
    for (std::size_t m = 0; m < grp.mpcs.size(); ++m) taps[g][grp.mpcs[m].delay] += channels.h[g][m];
  }
  return taps;
}

/// Effective quantities seen after the analog combiner of the intended group.
struct EffectiveChannelSet {
  int intended = 0;
  std::vector<TapSet> h_eff;                // [g][l], D x K_g
  std::vector<std::vector<CMatrix>> r_eff;  // [g][l], D x D
  std::vector<CMatrix> r_eff_eta;           // [g], D x D

  CMatrix r_eff_sum(int g) const {
    const auto& rs = r_eff.at(g);
    CMatrix s = CMatrix::Zero(rs.front().rows(), rs.front().cols());
    for (const auto& r : rs) s += r;
    return s;
  }
};

inline std::vector<TapSet> effective_taps(const CMatrix& s, const std::vector<TapSet>& taps) {
  std::vector<TapSet> out(taps.size());
  for (std::size_t g = 0; g < taps.size(); ++g)
    for (const auto& h : taps[g]) out[g].push_back(s.adjoint() * h);
  return out;
}

/// H_eff = S^H H and R_eff = S^H R S per group and delay, plus S^H R_eta S.
/// `channels` may be null when only the covariances are needed.
inline EffectiveChannelSet effective_set(const CMatrix& s, const ChannelRealization* channels, const GroupCcms& ccms,
                                         const ScenarioConfig& config) {
  const int n = config.num_antennas;
  if (s.rows() != n) throw std::invalid_argument("effective_set: beamformer row count must equal N");
  EffectiveChannelSet out;
  out.intended = config.intended_group;
  if (channels) out.h_eff = effective_taps(s, channel_taps(*channels, config));
  const CMatrix ry = assemble_ry(ccms, config);
  const Eigen::Index d = s.cols();
  out.r_eff.resize(config.groups.size());
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const auto& grp = config.groups[g];
    out.r_eff[g].assign(config.channel_memory, CMatrix::Zero(d, d));
    for (std::size_t m = 0; m < grp.mpcs.size(); ++m)
      out.r_eff[g][grp.mpcs[m].delay] = s.adjoint() * ccms[g][m] * s;
    out.r_eff_eta.push_back(s.adjoint() * assemble_r_eta(ry, static_cast<int>(g), ccms, config) * s);
  }
  return out;
}

/// y_n = sum_g sum_l H_l x_{n-l} + n_n for n = 0..T-1. Symbol column c of
/// group g carries time index c - (L - 1); the first L - 1 columns are the
/// preamble.
inline CMatrix synthesize_observation(const ChannelRealization& channels, const std::vector<CMatrix>& symbols,
                                      const CMatrix& noise, const ScenarioConfig& config, int horizon) {
  const int n = config.num_antennas;
  const int pre = config.channel_memory - 1;
  if (horizon < 1) throw std::invalid_argument("synthesize_observation: horizon must be >= 1");
  if (symbols.size() != config.groups.size()) throw std::invalid_argument("synthesize_observation: group count");
  if (noise.rows() != n || noise.cols() < horizon) throw std::invalid_argument("synthesize_observation: noise size");
  CMatrix y = noise.leftCols(horizon);
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const auto& grp = config.groups[g];
    if (symbols[g].rows() != grp.num_users) throw std::invalid_argument("synthesize_observation: symbol rows");
    if (symbols[g].cols() < horizon + pre) throw std::invalid_argument("synthesize_observation: insufficient preamble");
    for (std::size_t m = 0; m < grp.mpcs.size(); ++m) {
      const int delay = grp.mpcs[m].delay;
      y.noalias() += channels.h[g][m] * symbols[g].middleCols(pre - delay, horizon);
    }
  }
  return y;
}

inline CMatrix project(const CMatrix& y, const CMatrix& s) {
  if (y.rows() != s.rows()) throw std::invalid_argument("project: dimension mismatch");
  return s.adjoint() * y;
}

struct CmfOutput {
  CMatrix r;               // K x (T - L + 1)
  bool truncated = false;  // tail samples without a full tap window were dropped
};

/// r_n = sum_l H_l^H s_{n+l} over the samples where every tap is available.
inline CmfOutput cmf(const CMatrix& s_stream, const TapSet& h_est) {
  if (h_est.empty()) throw std::invalid_argument("cmf: empty tap set");
  const Eigen::Index l_len = static_cast<Eigen::Index>(h_est.size());
  const Eigen::Index t = s_stream.cols();
  if (t < l_len) throw std::invalid_argument("cmf: stream shorter than the channel memory");
  const Eigen::Index out_len = t - l_len + 1;
  CmfOutput out;
  out.r = CMatrix::Zero(h_est.front().cols(), out_len);
  for (Eigen::Index l = 0; l < l_len; ++l) {
    if (h_est[l].isZero(0.0)) continue;
    out.r.noalias() += h_est[l].adjoint() * s_stream.middleCols(l, out_len);
  }
  out.truncated = out_len < t;
  return out;
}

/// R_l^{ab} = sum_{l1} A_{l1}^H B_{l + l1}, l in -(L-1)..(L-1).
inline CMatrix tap_correlation(const TapSet& a, const TapSet& b, int lag) {
  const int l_len = static_cast<int>(a.size());
  CMatrix out = CMatrix::Zero(a.front().cols(), b.front().cols());
  for (int l1 = 0; l1 < l_len; ++l1) {
    const int l2 = l1 + lag;
    if (l2 < 0 || l2 >= static_cast<int>(b.size())) continue;
    out.noalias() += a[l1].adjoint() * b[l2];
  }
  return out;
}

struct SzfResult {
  CMatrix y;
  bool regularized = false;
};

/// Y = R (R^H R)^{-1} for a lag-0 correlation R; 1 for a single user.
inline SzfResult szf_from_correlation(const CMatrix& r0) {
  const Eigen::Index k = r0.cols();
  if (r0.rows() != k || k < 1) throw std::invalid_argument("szf: R_0 must be square and nonempty");
  SzfResult out;
  if (k == 1) {
    out.y = CMatrix::Identity(1, 1);
    return out;
  }
  const CMatrix gram = r0.adjoint() * r0;
  Eigen::FullPivLU<CMatrix> lu(gram);
  if (lu.isInvertible() && lu.rcond() > 1e-13) {
    out.y = r0 * lu.inverse();
    return out;
  }
  const double ridge = 1e-10 * std::max(gram.trace().real(), std::numeric_limits<double>::min());
  out.y = r0 * (gram + ridge * CMatrix::Identity(k, k)).inverse();
  out.regularized = true;
  return out;
}

inline SzfResult szf(const TapSet& h_est) { return szf_from_correlation(tap_correlation(h_est, h_est, 0)); }

/// Expected powers of the six output terms of one user.
struct TermPowers {
  double signal = 0.0;
  double sicee = 0.0;
  double isi = 0.0;
  double mui = 0.0;
  double igi = 0.0;
  double noise = 0.0;

  double interference() const { return sicee + isi + mui + igi + noise; }
  double total() const { return signal + interference(); }
};

struct OutputDecomposition {
  std::vector<TermPowers> users;
  std::vector<double> measured_total;  // sampled E|t|^2 + E|z - t|^2, empty for closed form
};

namespace detail {

/// Lag-indexed K x K_g' coefficient matrices C_tau = sum_l G_l B_{l + tau}
/// with G_l = Y^H Hhat_l^H.
inline std::map<int, CMatrix> lag_coefficients(const std::vector<CMatrix>& g_taps, const TapSet& b) {
  std::map<int, CMatrix> out;
  const int l_len = static_cast<int>(g_taps.size());
  std::vector<int> active_b;
  for (int l = 0; l < static_cast<int>(b.size()); ++l)
    if (!b[l].isZero(0.0)) active_b.push_back(l);
  for (int l = 0; l < l_len; ++l) {
    if (g_taps[l].isZero(0.0)) continue;
    for (int l2 : active_b) {
      const CMatrix c = g_taps[l] * b[l2];
      auto [it, fresh] = out.try_emplace(l2 - l, c);
      if (!fresh) it->second += c;
    }
  }
  return out;
}

}  // namespace detail

/// Closed-form expectation of the term powers over symbols and noise with
/// the channels held fixed. `h_eff` holds the true effective taps of every
/// group, `h_est` the intended group's estimated taps.
inline OutputDecomposition decompose_output(const std::vector<TapSet>& h_eff, const TapSet& h_est, const CMatrix& y,
                                            const CMatrix& s, const ScenarioConfig& config) {
  const int gt = config.intended_group;
  const int k_len = config.groups.at(gt).num_users;
  std::vector<CMatrix> g_taps;
  for (const auto& h : h_est) g_taps.push_back(y.adjoint() * h.adjoint());

  const CMatrix r0_hh = tap_correlation(h_est, h_est, 0);
  const CMatrix signal_coef = y.adjoint() * r0_hh;
  const CMatrix cross_coef = y.adjoint() * tap_correlation(h_est, h_eff.at(gt), 0);
  OutputDecomposition out;
  out.users.resize(k_len);

  const CMatrix shs = s.adjoint() * s;
  for (std::size_t g = 0; g < h_eff.size(); ++g) {
    const double es = config.groups[g].symbol_energy;
    const auto coeffs = detail::lag_coefficients(g_taps, h_eff[g]);
    for (int k = 0; k < k_len; ++k) {
      auto& u = out.users[k];
      for (const auto& [tau, c] : coeffs) {
        for (Eigen::Index k2 = 0; k2 < c.cols(); ++k2) {
          const double p = es * std::norm(c(k, k2));
          if (static_cast<int>(g) != gt) {
            u.igi += p;
          } else if (k2 != k) {
            u.mui += p;
          } else if (tau != 0) {
            u.isi += p;
          }
        }
      }
    }
  }
  for (int k = 0; k < k_len; ++k) {
    auto& u = out.users[k];
    const double es = config.groups[gt].symbol_energy;
    u.signal = es * std::norm(signal_coef(k, k));
    u.sicee = es * std::norm(cross_coef(k, k) - signal_coef(k, k));
    for (const auto& gl : g_taps) u.noise += config.noise_power * (gl.row(k) * shs * gl.row(k).adjoint())(0, 0).real();
  }
  return out;
}

/// Sampled estimate of the same powers, obtained by pushing independent
/// symbol and noise streams of length `count` through the actual receiver
/// chain one source at a time and exploiting linearity.
inline OutputDecomposition decompose_output_sampled(const ChannelRealization& channels, const TapSet& h_est,
                                                    const CMatrix& y, const CMatrix& s, const ScenarioConfig& config,
                                                    int count, Rng& symbol_rng, Rng& noise_rng) {
  if (count < 1) throw std::invalid_argument("decompose_output_sampled: count must be >= 1");
  const int gt = config.intended_group;
  const int l_len = config.channel_memory;
  const int k_len = config.groups.at(gt).num_users;
  const int horizon = count + l_len - 1;
  const int n = config.num_antennas;

  std::vector<CMatrix> symbols;
  for (std::size_t g = 0; g < config.groups.size(); ++g)
    symbols.push_back(generate_symbols(config, static_cast<int>(g), horizon + l_len - 1, symbol_rng));
  const CMatrix noise = std::sqrt(config.noise_power) * complex_normal_matrix(n, horizon, noise_rng);

  auto zero_symbols = [&]() {
    std::vector<CMatrix> z;
    for (const auto& x : symbols) z.push_back(CMatrix::Zero(x.rows(), x.cols()));
    return z;
  };
  auto run = [&](const std::vector<CMatrix>& x, const CMatrix& nz) {
    const CMatrix obs = synthesize_observation(channels, x, nz, config, horizon);
    return CMatrix(y.adjoint() * cmf(project(obs, s), h_est).r);
  };
  const CMatrix zero_noise = CMatrix::Zero(n, horizon);

  std::vector<CMatrix> per_user;
  for (int k2 = 0; k2 < k_len; ++k2) {
    auto x = zero_symbols();
    x[gt].row(k2) = symbols[gt].row(k2);
    per_user.push_back(run(x, zero_noise));
  }
  auto x_other = zero_symbols();
  for (std::size_t g = 0; g < symbols.size(); ++g)
    if (static_cast<int>(g) != gt) x_other[g] = symbols[g];
  const CMatrix z_igi = run(x_other, zero_noise);
  const CMatrix z_noise = run(zero_symbols(), noise);
  const CMatrix z_full = run(symbols, noise);

  const TapSet h_true = channel_taps(channels, config)[gt];
  const TapSet h_true_eff = effective_taps(s, {h_true})[0];
  const CMatrix c0 = y.adjoint() * tap_correlation(h_est, h_true_eff, 0);
  const CMatrix sc = y.adjoint() * tap_correlation(h_est, h_est, 0);
  // Output sample j pairs with symbol time j, i.e. symbol column j + L - 1.
  const CMatrix x_now = symbols[gt].middleCols(l_len - 1, count);

  auto mean_pow = [](const auto& v) { return v.cwiseAbs2().sum() / static_cast<double>(v.size()); };
  OutputDecomposition out;
  out.users.resize(k_len);
  for (int k = 0; k < k_len; ++k) {
    auto& u = out.users[k];
    const CVector t = (sc(k, k) * x_now.row(k)).transpose();
    const CVector e = ((c0(k, k) - sc(k, k)) * x_now.row(k)).transpose();
    const CVector own = per_user[k].row(k).transpose();
    CVector mui = CVector::Zero(count);
    for (int k2 = 0; k2 < k_len; ++k2)
      if (k2 != k) mui += per_user[k2].row(k).transpose();
    u.signal = mean_pow(t);
    u.sicee = mean_pow(e);
    u.isi = mean_pow(CVector(own - t - e));
    u.mui = mean_pow(mui);
    u.igi = mean_pow(CVector(z_igi.row(k).transpose()));
    u.noise = mean_pow(CVector(z_noise.row(k).transpose()));
    const CVector z = z_full.row(k).transpose();
    out.measured_total.push_back(mean_pow(t) + mean_pow(CVector(z - t)));
  }
  return out;
}

/// Linear SINR; +Inf when the interference is exactly zero.
inline double sinr_linear(const TermPowers& p) {
  const double den = p.interference();
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return p.signal / den;
}

inline double sinr_db(const TermPowers& p) {
  const double lin = sinr_linear(p);
  return std::isinf(lin) ? lin : db10(lin);
}

inline std::vector<double> sinr(const OutputDecomposition& d) {
  std::vector<double> out;
  for (const auto& u : d.users) out.push_back(sinr_db(u));
  return out;
}

/// Monte Carlo SINR with perfect CSI: channels drawn `channel_draws` times
/// from the true CCMs, each pushed through the sampled receiver chain with
/// `symbols_per_draw` symbols. Returns per-user ratio-of-means SINR in dB.
inline std::vector<double> monte_carlo_sinr(const ScenarioConfig& config, const CMatrix& s, const GroupCcms& ccms,
                                            bool apply_szf, int channel_draws, int symbols_per_draw,
                                            std::uint64_t seed) {
  const int gt = config.intended_group;
  const int k_len = config.groups.at(gt).num_users;
  const auto roots = ccm_roots(ccms);
  std::vector<double> sig(k_len, 0.0), inf(k_len, 0.0);
  for (int trial = 0; trial < channel_draws; ++trial) {
    Rng ch_rng = make_rng(seed, trial, Stream::kChannel);
    Rng sym_rng = make_rng(seed, trial, Stream::kSymbols);
    Rng noise_rng = make_rng(seed, trial, Stream::kNoise);
    const auto channels = sample_channels_from_roots(roots, config, ch_rng);
    const TapSet h_est = effective_taps(s, channel_taps(channels, config))[gt];
    const CMatrix y = apply_szf ? szf(h_est).y : CMatrix::Identity(k_len, k_len);
    const auto d = decompose_output_sampled(channels, h_est, y, s, config, symbols_per_draw, sym_rng, noise_rng);
    for (int k = 0; k < k_len; ++k) {
      sig[k] += d.users[k].signal;
      inf[k] += d.users[k].interference();
    }
  }
  std::vector<double> out;
  for (int k = 0; k < k_len; ++k) out.push_back(inf[k] == 0.0 ? std::numeric_limits<double>::infinity()
                                                               : db10(sig[k] / inf[k]));
  return out;
}

}  // namespace slowbeam

#endif  // SLOWBEAM_RECEIVER_HPP
