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

// Reduced-dimension channel estimation from a training block.
//
// Stacked vectors follow a user-major, then delay, then beam ordering:
// element k L D + l D + d of h_bar is entry d of h_eff,l for user k.

#ifndef SLOWBEAM_ESTIMATION_HPP
#define SLOWBEAM_ESTIMATION_HPP

#include "slowbeam/channel_model.hpp"
#include "slowbeam/receiver.hpp"
#include "slowbeam/rng.hpp"
#include "slowbeam/scenario.hpp"
#include "slowbeam/types.hpp"

#include <vector>

namespace slowbeam {

enum class TrainingFamily { kRandomQpsk, kCyclicShift };

struct TrainingBlock {
  int length = 0;        // T
  int memory = 0;        // L
  CMatrix symbols;       // K x (T + L - 1); column c is time c - (L - 1)
  CMatrix x_matrix;      // T x K L, (X^(k))_{ij} = x^(k)_{i-j}
};

/// [X^(1) ... X^(K)] with (X^(k))_{ij} = x^(k)_{i-j}, i < T, j < L.
inline CMatrix convolution_matrix(const CMatrix& symbols, int t_len, int l_len) {
  if (symbols.cols() < t_len + l_len - 1) throw std::invalid_argument("convolution_matrix: symbol stream too short");
  const Eigen::Index k_len = symbols.rows();
  CMatrix x(t_len, k_len * l_len);
  for (Eigen::Index k = 0; k < k_len; ++k)
    for (int i = 0; i < t_len; ++i)
      for (int j = 0; j < l_len; ++j) x(i, k * l_len + j) = symbols(k, i - j + l_len - 1);
  return x;
}

/// Seeded training sequences of unit-energy QPSK scaled by sqrt(E_s), with
/// the preamble included. kCyclicShift gives every user a cyclic shift of
/// one base sequence.
inline TrainingBlock build_training(const ScenarioConfig& config, int group, int t_len, Rng& rng,
                                    TrainingFamily family = TrainingFamily::kRandomQpsk) {
  if (t_len < 1) throw std::invalid_argument("build_training: t_len must be >= 1");
  const auto& grp = config.groups.at(group);
  const int l_len = config.channel_memory;
  const int p = t_len + l_len - 1;
  TrainingBlock tb;
  tb.length = t_len;
  tb.memory = l_len;
  if (family == TrainingFamily::kRandomQpsk) {
    tb.symbols = generate_symbols(config, group, p, rng);
  } else {
    const CMatrix base = generate_symbols(config, group, p, rng).row(0);
    const int shift = std::max(1, p / grp.num_users);
    tb.symbols.resize(grp.num_users, p);
    for (int k = 0; k < grp.num_users; ++k)
      for (int c = 0; c < p; ++c) tb.symbols(k, c) = base(0, (c + k * shift) % p);
  }
  tb.x_matrix = convolution_matrix(tb.symbols, t_len, l_len);
  return tb;
}

/// X kron I_D.
inline CMatrix kron_identity(const CMatrix& x, int d) {
  CMatrix out = CMatrix::Zero(x.rows() * d, x.cols() * d);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (x(i, j) != cdouble(0.0))
        out.block(i * d, j * d, d, d) = x(i, j) * CMatrix::Identity(d, d);
  return out;
}

/// Stacks per-delay taps [l] (D x K) into h_bar.
inline CVector stack_channel(const TapSet& taps) {
  const Eigen::Index l_len = static_cast<Eigen::Index>(taps.size());
  const Eigen::Index d = taps.front().rows();
  const Eigen::Index k_len = taps.front().cols();
  CVector h(k_len * l_len * d);
  for (Eigen::Index k = 0; k < k_len; ++k)
    for (Eigen::Index l = 0; l < l_len; ++l) h.segment((k * l_len + l) * d, d) = taps[l].col(k);
  return h;
}

inline TapSet unstack_channel(const CVector& h, int k_len, int l_len, int d) {
  if (h.size() != static_cast<Eigen::Index>(k_len) * l_len * d) throw std::invalid_argument("unstack_channel: size");
  TapSet taps(l_len, CMatrix(d, k_len));
  for (int k = 0; k < k_len; ++k)
    for (int l = 0; l < l_len; ++l) taps[l].col(k) = h.segment((static_cast<Eigen::Index>(k) * l_len + l) * d, d);
  return taps;
}

/// R_bar_eff = I_K kron blockdiag(R_eff,0, ..., R_eff,L-1).
inline CMatrix stacked_r_eff(const std::vector<CMatrix>& r_eff, int k_len) {
  const Eigen::Index l_len = static_cast<Eigen::Index>(r_eff.size());
  const Eigen::Index d = r_eff.front().rows();
  CMatrix out = CMatrix::Zero(k_len * l_len * d, k_len * l_len * d);
  for (Eigen::Index k = 0; k < k_len; ++k)
    for (Eigen::Index l = 0; l < l_len; ++l) {
      const Eigen::Index o = (k * l_len + l) * d;
      out.block(o, o, d, d) = r_eff[l];
    }
  return out;
}

/// R_bar_s = A R_bar_eff A^H + I_T kron R_eff,eta with A = X kron I_D.
inline CMatrix stacked_r_s(const TrainingBlock& tb, const CMatrix& r_bar_eff, const CMatrix& r_eff_eta) {
  const int d = static_cast<int>(r_eff_eta.rows());
  const CMatrix a = kron_identity(tb.x_matrix, d);
  CMatrix out = a * r_bar_eff * a.adjoint();
  for (int t = 0; t < tb.length; ++t) out.block(t * d, t * d, d, d) += r_eff_eta;
  return out;
}

/// Training-period observation for explicitly supplied interferer data and
/// noise. `interferer_symbols[g]` uses the observation-synthesis layout and
/// is ignored for the intended group; `noise` is N x T.
inline CVector stacked_observation(const TrainingBlock& tb, const ChannelRealization& channels, const CMatrix& s,
                                   const std::vector<CMatrix>& interferer_symbols, const CMatrix& noise,
                                   const ScenarioConfig& config) {
  const int gt = config.intended_group;
  const int d = static_cast<int>(s.cols());
  if (tb.memory != config.channel_memory) throw std::invalid_argument("stacked_observation: memory mismatch");
  const auto taps = effective_taps(s, channel_taps(channels, config));
  CVector out = kron_identity(tb.x_matrix, d) * stack_channel(taps[gt]);
  for (std::size_t g = 0; g < taps.size(); ++g) {
    if (static_cast<int>(g) == gt) continue;
    const CMatrix xg = convolution_matrix(interferer_symbols.at(g), tb.length, tb.memory);
    out += kron_identity(xg, d) * stack_channel(taps[g]);
  }
  const CMatrix sn = s.adjoint() * noise.leftCols(tb.length);
  out += Eigen::Map<const CVector>(sn.data(), sn.size());
  return out;
}

/// Same with interferer data and noise drawn from `rng`.
inline CVector stacked_observation(const TrainingBlock& tb, const ChannelRealization& channels, const CMatrix& s,
                                   const ScenarioConfig& config, Rng& rng) {
  std::vector<CMatrix> data;
  for (std::size_t g = 0; g < config.groups.size(); ++g)
    data.push_back(generate_symbols(config, static_cast<int>(g), tb.length + tb.memory - 1, rng));
  const CMatrix noise = std::sqrt(config.noise_power) * complex_normal_matrix(config.num_antennas, tb.length, rng);
  return stacked_observation(tb, channels, s, data, noise, config);
}

struct MmseEstimator {
  CMatrix z;  // K L D x T D
  bool regularized = false;
};

/// Z = C_bar R_bar_s^{-1}, C_bar = R_bar_eff A^H, from (estimated)
/// effective CCMs of the intended group.
inline MmseEstimator mmse_estimator(const TrainingBlock& tb, const std::vector<CMatrix>& r_eff,
                                    const CMatrix& r_eff_eta, int k_len) {
  if (static_cast<int>(r_eff.size()) != tb.memory) throw std::invalid_argument("mmse_estimator: delay count");
  const int d = static_cast<int>(r_eff_eta.rows());
  const CMatrix r_bar = stacked_r_eff(r_eff, k_len);
  const CMatrix a = kron_identity(tb.x_matrix, d);
  const CMatrix c_bar = r_bar * a.adjoint();
  CMatrix r_s = stacked_r_s(tb, r_bar, r_eff_eta);
  MmseEstimator out;
  Eigen::LLT<CMatrix> llt(r_s);
  if (llt.info() != Eigen::Success) {
    r_s += 1e-10 * r_s.trace().real() * CMatrix::Identity(r_s.rows(), r_s.cols());
    llt.compute(r_s);
    if (llt.info() != Eigen::Success) throw NumericalError("mmse_estimator: R_bar_s is singular");
    out.regularized = true;
  }
  out.z = llt.solve(c_bar.adjoint()).adjoint();
  return out;
}

/// (tr R_bar + tr Phi - 2 Re tr Psi) / tr R_bar with Phi = Z R_bar_s Z^H and
/// Psi = Z A R_bar, all statistics taken from the true effective CCMs.
inline double nmse_analytical(const CMatrix& z, const TrainingBlock& tb, const std::vector<CMatrix>& r_eff,
                              const CMatrix& r_eff_eta, int k_len) {
  const int d = static_cast<int>(r_eff_eta.rows());
  const CMatrix r_bar = stacked_r_eff(r_eff, k_len);
  const double tr = r_bar.trace().real();
  if (!(tr > 0.0)) throw std::invalid_argument("nmse_analytical: tr(R_bar_eff) must be > 0");
  if (z.rows() != r_bar.rows() || z.cols() != static_cast<Eigen::Index>(tb.length) * d)
    throw std::invalid_argument("nmse_analytical: estimator size mismatch");
  const CMatrix r_s = stacked_r_s(tb, r_bar, r_eff_eta);
  const CMatrix a = kron_identity(tb.x_matrix, d);
  const double phi = (z * r_s * z.adjoint()).trace().real();
  const double psi = (z * a * r_bar).trace().real();
  return (tr + phi - 2.0 * psi) / tr;
}

/// Monte Carlo nMSE: channels, interferer data and noise redrawn per trial
/// with the training block and estimator held fixed; ratio of summed errors
/// to summed channel energy.
inline double nmse_monte_carlo(const ScenarioConfig& config, const CMatrix& s, const GroupCcms& ccms,
                               const TrainingBlock& tb, const CMatrix& z, int trials, std::uint64_t seed) {
  const int gt = config.intended_group;
  const auto roots = ccm_roots(ccms);
  double err = 0.0, energy = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng ch_rng = make_rng(seed, trial, Stream::kChannel);
    Rng aux = make_rng(seed, trial, Stream::kTraining);
    const auto channels = sample_channels_from_roots(roots, config, ch_rng);
    const CVector h = stack_channel(effective_taps(s, channel_taps(channels, config))[gt]);
    const CVector h_hat = z * stacked_observation(tb, channels, s, config, aux);
    err += (h - h_hat).squaredNorm();
    energy += h.squaredNorm();
  }
  if (!(energy > 0.0)) throw NumericalError("nmse_monte_carlo: zero channel energy");
  return err / energy;
}

}  // namespace slowbeam

#endif  // SLOWBEAM_ESTIMATION_HPP
