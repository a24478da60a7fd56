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

// Channel covariance construction, channel sampling and slow-time angular
// mobility for a half-wavelength uniform linear array.
//
// Angles live in two domains: the azimuth phi and the phase theta = pi sin(phi)
// seen by the array response q(theta) = [1, e^{j theta}, ...] / sqrt(N).
// Power profiles are rectangles in theta; their covariance factorizes as
//
//   R = (q(mu) q(mu)^H) .* D(sigma),   D(sigma)_{mn} = sinc((m - n) sigma / 2 pi)

#ifndef SLOWBEAM_CHANNEL_MODEL_HPP
#define SLOWBEAM_CHANNEL_MODEL_HPP

#include "slowbeam/rng.hpp"
#include "slowbeam/scenario.hpp"
#include "slowbeam/types.hpp"

#include <vector>

namespace slowbeam {

/// Array response (1/sqrt(N)) [1, e^{j theta}, ..., e^{j (N-1) theta}].
inline CVector steering_vector(double theta, int n_antennas) {
  if (n_antennas < 1) throw std::invalid_argument("steering_vector: n_antennas must be >= 1");
  CVector q(n_antennas);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_antennas));
  for (int i = 0; i < n_antennas; ++i) q(i) = std::polar(scale, theta * i);
  return q;
}

/// Array response to an azimuth phi (radians).
inline CVector array_response(double phi, int n_antennas) {
  return steering_vector(kPi * std::sin(phi), n_antennas);
}

inline double phi_to_theta(double phi) {
  if (!(std::abs(phi) < kPi / 2)) throw std::domain_error("phi_to_theta: |phi| must be < pi/2");
  return kPi * std::sin(phi);
}

/// Rectangular phase-domain sector [mu - sigma/2, mu + sigma/2].
struct ThetaSector {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Maps the azimuth sector [phi - spread/2, phi + spread/2] (radians) onto
/// its phase-domain image.
inline ThetaSector theta_sector(double center_phi, double spread_phi) {
  const double t1 = phi_to_theta(center_phi - spread_phi / 2.0);
  const double t2 = phi_to_theta(center_phi + spread_phi / 2.0);
  return {0.5 * (t1 + t2), t2 - t1};
}

/// Real symmetric Toeplitz kernel D(sigma)_{mn} = sinc((m - n) sigma / 2 pi).
inline RMatrix d_kernel(double sigma, int n) {
  RVector col(n);
  for (int k = 0; k < n; ++k) col(k) = sinc(k * sigma / (2.0 * kPi));
  RMatrix d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d(i, j) = col(std::abs(i - j));
  return d;
}

/// Closed-form unit-trace CCM of a rectangular phase profile.
inline CMatrix hadamard_ccm(double mu_theta, double sigma_theta, int n) {
  if (sigma_theta < 0) throw std::invalid_argument("hadamard_ccm: sigma_theta must be >= 0");
  // Entry (a,b) depends on a - b only: e^{j (a-b) mu} sinc((a-b) sigma / 2 pi) / N.
  CVector lag(n);
  for (int k = 0; k < n; ++k) lag(k) = std::polar(sinc(k * sigma_theta / (2.0 * kPi)) / n, k * mu_theta);
  CMatrix r(n, n);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) r(a, b) = a >= b ? lag(a - b) : std::conj(lag(b - a));
  return r;
}

/// Midpoint-rule quadrature of the CCM integral for a unit-mass rectangular
/// profile. Independent of the closed form; used to check it.
inline CMatrix ccm_from_profile_integral(double mu_theta, double sigma_theta, int n, int quadrature_points) {
  if (quadrature_points < 2) throw std::invalid_argument("ccm_from_profile_integral: need >= 2 points");
  if (!(sigma_theta > 0)) throw std::invalid_argument("ccm_from_profile_integral: sigma_theta must be > 0");
  // q(t) q(t)^H has entries e^{j (a-b) t} / N, so summing per lag is the
  // same quadrature as accumulating the outer products.
  const double h = sigma_theta / quadrature_points;
  const double weight = h / sigma_theta;  // profile density 1/sigma times step
  CVector lag = CVector::Zero(n);
  for (int p = 0; p < quadrature_points; ++p) {
    const double t = mu_theta - sigma_theta / 2.0 + (p + 0.5) * h;
    const cdouble step = std::polar(1.0, t);
    cdouble e = 1.0;
    for (int k = 0; k < n; ++k) {
      lag(k) += weight * e;
      e *= step;
    }
  }
  lag /= static_cast<double>(n);
  CMatrix r(n, n);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) r(a, b) = a >= b ? lag(a - b) : std::conj(lag(b - a));
  return r;
}

/// CCM of one MPC at azimuth `center_phi` with spread `spread_phi` (radians)
/// and trace `mass`.
inline CMatrix mpc_ccm(double center_phi, double spread_phi, double mass, int n) {
  const auto s = theta_sector(center_phi, spread_phi);
  return mass * hadamard_ccm(s.mu, s.sigma, n);
}

/// CCMs indexed [group][mpc]. MPC m of group g sits at delay
/// config.groups[g].mpcs[m].delay; all other delays carry zero covariance.
using GroupCcms = std::vector<std::vector<CMatrix>>;

/// Sum over a group's MPCs, i.e. sum over delays of R_l.
inline CMatrix group_ccm_sum(const std::vector<CMatrix>& ccms, int n) {
  CMatrix s = CMatrix::Zero(n, n);
  for (const auto& r : ccms) {
    if (r.rows() != n || r.cols() != n) throw std::invalid_argument("CCM dimension mismatch");
    s += r;
  }
  return s;
}

inline CMatrix assemble_ry(const GroupCcms& ccms, const ScenarioConfig& config) {
  const int n = config.num_antennas;
  if (ccms.size() != config.groups.size()) throw std::invalid_argument("assemble_ry: group count mismatch");
  CMatrix ry = config.noise_power * CMatrix::Identity(n, n);
  for (std::size_t g = 0; g < ccms.size(); ++g) {
    const auto& grp = config.groups[g];
    ry += (grp.num_users * grp.symbol_energy) * group_ccm_sum(ccms[g], n);
  }
  return ry;
}

inline CMatrix assemble_r_eta(const CMatrix& ry, int group, const GroupCcms& ccms, const ScenarioConfig& config) {
  const int n = config.num_antennas;
  if (ry.rows() != n || ry.cols() != n) throw std::invalid_argument("assemble_r_eta: dimension mismatch");
  const auto& grp = config.groups.at(group);
  return ry - (grp.num_users * grp.symbol_energy) * group_ccm_sum(ccms.at(group), n);
}

/// Hermitian square root with negative eigenvalues clipped to zero.
inline CMatrix psd_sqrt(const CMatrix& r, double tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(r));
  if (es.info() != Eigen::Success) throw NumericalError("psd_sqrt: eigendecomposition failed");
  RVector ev = es.eigenvalues();
  const double scale = std::max(1.0, std::abs(ev.maxCoeff()));
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol * scale) throw NumericalError("psd_sqrt: matrix is not positive semidefinite");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// Channel matrices indexed [group][mpc], each N x K_g.
struct ChannelRealization {
  std::vector<std::vector<CMatrix>> h;
};

/// Draws H = R^{1/2} W per group and MPC. `sqrt_ccms` caches the square
/// roots when the caller samples many realizations of the same CCMs.
inline ChannelRealization sample_channels_from_roots(const GroupCcms& sqrt_ccms, const ScenarioConfig& config,
                                                     Rng& rng) {
  ChannelRealization out;
  out.h.resize(sqrt_ccms.size());
  for (std::size_t g = 0; g < sqrt_ccms.size(); ++g) {
    const int k = config.groups[g].num_users;
    for (const auto& root : sqrt_ccms[g]) {
      out.h[g].push_back(root * complex_normal_matrix(root.cols(), k, rng));
    }
  }
  return out;
}

inline GroupCcms ccm_roots(const GroupCcms& ccms) {
  GroupCcms roots(ccms.size());
  for (std::size_t g = 0; g < ccms.size(); ++g)
    for (const auto& r : ccms[g]) roots[g].push_back(psd_sqrt(r));
  return roots;
}

inline ChannelRealization sample_channels(const GroupCcms& ccms, const ScenarioConfig& config, Rng& rng) {
  return sample_channels_from_roots(ccm_roots(ccms), config, rng);
}

/// Slow-time angular state of one MPC; angles in radians (azimuth domain).
struct MpcState {
  double mu_phi_init = 0.0;
  double delta_mu = 0.0;
  double mu_phi_true = 0.0;
  double mu_phi_est = 0.0;
  double sigma_phi = 0.0;
  int delay = 0;
};

inline MpcState initial_mpc_state(const MpcSpec& spec) {
  MpcState s;
  s.mu_phi_init = deg2rad(spec.center_angle_deg);
  s.mu_phi_true = s.mu_phi_init;
  s.mu_phi_est = s.mu_phi_init;
  s.sigma_phi = deg2rad(spec.angular_spread_deg);
  s.delay = spec.delay;
  return s;
}

/// One AR(1) step of the mobility addend:
/// delta[n] = alpha delta[n-1] + sqrt(1 - alpha^2) v[n], v ~ N(0, sigma_v^2).
inline MpcState step_mobility(MpcState state, const ScenarioConfig& config, Rng& rng) {
  const double alpha = config.mobility_alpha;
  const double sigma_v = deg2rad(config.mobility_sigma_v_deg);
  const double v = sigma_v * standard_normal(rng);
  state.delta_mu = alpha * state.delta_mu + std::sqrt(1.0 - alpha * alpha) * v;
  state.mu_phi_true = state.mu_phi_init + state.delta_mu;
  return state;
}

/// Noisy AoA estimate mu + e, e ~ N(0, sigma_est^2).
inline double observe_aoa(const MpcState& state, const ScenarioConfig& config, Rng& rng) {
  return state.mu_phi_true + deg2rad(config.aoa_error_std_deg) * standard_normal(rng);
}

/// QPSK symbols scaled to energy E_s of the group, one row per user.
inline CMatrix generate_symbols(const ScenarioConfig& config, int group, int count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("generate_symbols: count must be >= 1");
  const auto& grp = config.groups.at(group);
  const double amp = std::sqrt(grp.symbol_energy);
  CMatrix x(grp.num_users, count);
  for (int t = 0; t < count; ++t)
    for (int k = 0; k < grp.num_users; ++k) x(k, t) = amp * qpsk(rng);
  return x;
}

/// Clamps an azimuth so the MPC sector stays strictly inside +-90 degrees.
/// Only reached by extreme mobility draws; the scenario itself is validated.
inline double clamp_center(double center_phi, double spread_phi) {
  const double limit = kPi / 2 - spread_phi / 2 - 1e-6;
  return std::clamp(center_phi, -limit, limit);
}

/// CCMs for every MPC given per-MPC azimuth centers (radians).
inline GroupCcms build_ccms(const ScenarioConfig& config, const std::vector<std::vector<double>>& centers) {
  GroupCcms out(config.groups.size());
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const auto& grp = config.groups[g];
    for (std::size_t m = 0; m < grp.mpcs.size(); ++m) {
      const double spread = deg2rad(grp.mpcs[m].angular_spread_deg);
      out[g].push_back(mpc_ccm(clamp_center(centers[g][m], spread), spread, grp.power_share(m),
                               config.num_antennas));
    }
  }
  return out;
}

/// CCMs at the configured (initial) centers.
inline GroupCcms nominal_ccms(const ScenarioConfig& config) {
  std::vector<std::vector<double>> centers(config.groups.size());
  for (std::size_t g = 0; g < config.groups.size(); ++g)
    for (const auto& m : config.groups[g].mpcs) centers[g].push_back(deg2rad(m.center_angle_deg));
  return build_ccms(config, centers);
}

}  // namespace slowbeam

#endif  // SLOWBEAM_CHANNEL_MODEL_HPP
