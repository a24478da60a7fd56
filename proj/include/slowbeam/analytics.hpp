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

// Closed-form performance measures.

#ifndef SLOWBEAM_ANALYTICS_HPP
#define SLOWBEAM_ANALYTICS_HPP

#include "slowbeam/channel_model.hpp"
#include "slowbeam/receiver.hpp"
#include "slowbeam/scenario.hpp"
#include "slowbeam/types.hpp"

#include <vector>

namespace slowbeam {

/// CMF output powers averaged over channels, symbols and noise under
/// perfect instantaneous CSI.
struct CmfAnalytical {
  double p_s = 0.0;
  double isi = 0.0;
  double mui = 0.0;
  double igi = 0.0;
  double noise = 0.0;

  double p_in() const { return isi + mui + igi + noise; }
  double sinr_db() const { return db10(p_s / p_in()); }
};

/// With R_sum = sum_l R_eff,l of each group:
///   P_S   = E_s [ tr(R_sum)^2 + sum_l tr(R_l R_l) ]
///   ISI   = E_s sum_{l != l'} tr(R_l R_l')
///   MUI   = (K - 1) E_s tr(R_sum R_sum)
///   IGI   = sum_{g' != g} E_s' K_g' tr(R_sum R_sum')
///   Noise = N_0 tr(R_sum S^H S)
inline CmfAnalytical cmf_sinr_analytical(const EffectiveChannelSet& eff, const CMatrix& s, const ScenarioConfig& config,
                                         int group) {
  const auto& grp = config.groups.at(group);
  const double es = grp.symbol_energy;
  const CMatrix r_sum = eff.r_eff_sum(group);
  const double tr_sum = r_sum.trace().real();
  double diag_terms = 0.0;
  for (const auto& r : eff.r_eff.at(group)) diag_terms += (r * r).trace().real();
  const double tr_sq = (r_sum * r_sum).trace().real();

  CmfAnalytical out;
  out.p_s = es * (tr_sum * tr_sum + diag_terms);
  out.isi = es * (tr_sq - diag_terms);
  out.mui = (grp.num_users - 1) * es * tr_sq;
  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    if (static_cast<int>(g) == group) continue;
    const auto& other = config.groups[g];
    out.igi += other.symbol_energy * other.num_users * (r_sum * eff.r_eff_sum(static_cast<int>(g))).trace().real();
  }
  out.noise = config.noise_power * (r_sum * (s.adjoint() * s)).trace().real();
  if (!(out.p_in() > 0.0)) throw NumericalError("cmf_sinr_analytical: interference power must be positive");
  return out;
}

/// Steady-state statistics of a recursively filtered CCM built from a
/// static profile with i.i.d. N(0, sigma_e^2) phase-domain center errors.
struct FilterAsymptotics {
  CMatrix mean;       // R_ab e^{-(a-b)^2 sigma_e^2 / 2}
  RMatrix variance;   // |R_ab|^2 (1 - e^{-(a-b)^2 sigma_e^2}) (1 - beta) / (1 + beta)
  double limit_ratio = 0.0;
};

/// beta^{2n} + (1 - beta)/(1 + beta) (1 - beta^{2n}): variance after n
/// filter steps relative to that of a single estimate.
inline double filtered_variance_factor(double beta, int steps) {
  const double b2n = std::pow(beta, 2.0 * steps);
  return b2n + (1.0 - beta) / (1.0 + beta) * (1.0 - b2n);
}

/// Per-entry variance of an unfiltered estimate, |R_ab|^2 (1 - e^{-(a-b)^2 sigma_e^2}).
inline RMatrix single_estimate_variance(const CMatrix& ccm, double sigma_e) {
  RMatrix v(ccm.rows(), ccm.cols());
  for (Eigen::Index b = 0; b < ccm.cols(); ++b)
    for (Eigen::Index a = 0; a < ccm.rows(); ++a) {
      const double lag = static_cast<double>(a - b);
      v(a, b) = std::norm(ccm(a, b)) * (1.0 - std::exp(-lag * lag * sigma_e * sigma_e));
    }
  return v;
}

inline FilterAsymptotics recursive_filter_asymptotics(const CMatrix& ccm, double sigma_e, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("recursive_filter_asymptotics: beta in [0,1)");
  FilterAsymptotics out;
  out.limit_ratio = (1.0 - beta) / (1.0 + beta);
  out.mean = ccm;
  for (Eigen::Index b = 0; b < ccm.cols(); ++b)
    for (Eigen::Index a = 0; a < ccm.rows(); ++a) {
      const double lag = static_cast<double>(a - b);
      out.mean(a, b) *= std::exp(-0.5 * lag * lag * sigma_e * sigma_e);
    }
  out.variance = out.limit_ratio * single_estimate_variance(ccm, sigma_e);
  return out;
}

/// Phase-domain error std from an azimuth-domain one by linearizing
/// theta = pi sin(phi) at the MPC center.
inline double theta_error_std(double sigma_phi, double center_phi) {
  return kPi * std::abs(std::cos(center_phi)) * sigma_phi;
}

/// u(phi)^H M u(phi) per grid angle (radians).
inline RVector spread_spectrum_plot(const CMatrix& mean_matrix, const std::vector<double>& phi_grid) {
  RVector out(static_cast<Eigen::Index>(phi_grid.size()));
  for (std::size_t i = 0; i < phi_grid.size(); ++i) {
    if (!(std::abs(phi_grid[i]) <= kPi / 2)) throw std::invalid_argument("spread_spectrum_plot: grid outside +-90 deg");
    const CVector u = array_response(phi_grid[i], static_cast<int>(mean_matrix.rows()));
    out(static_cast<Eigen::Index>(i)) = (u.adjoint() * mean_matrix * u)(0, 0).real();
  }
  return out;
}

/// Width of the contiguous region around the peak where the profile stays
/// at or above half the peak, in the grid's units.
inline double half_power_width(const RVector& profile, const std::vector<double>& grid) {
  if (profile.size() == 0 || profile.size() != static_cast<Eigen::Index>(grid.size()))
    throw std::invalid_argument("half_power_width: size mismatch");
  Eigen::Index peak = 0;
  const double top = profile.maxCoeff(&peak);
  Eigen::Index lo = peak, hi = peak;
  while (lo > 0 && profile(lo - 1) >= 0.5 * top) --lo;
  while (hi + 1 < profile.size() && profile(hi + 1) >= 0.5 * top) ++hi;
  return grid[hi] - grid[lo];
}

inline double outage_probability(const std::vector<double>& sinr_db_series, double threshold_db) {
  if (sinr_db_series.empty()) throw std::invalid_argument("outage_probability: empty series");
  std::size_t below = 0;
  for (double v : sinr_db_series)
    if (v < threshold_db) ++below;
  return static_cast<double>(below) / static_cast<double>(sinr_db_series.size());
}

/// Mean of the dB values from index `burn_in` on.
inline double slow_time_average(const std::vector<double>& series_db, int burn_in = 0) {
  if (burn_in < 0 || burn_in >= static_cast<int>(series_db.size()))
    throw std::invalid_argument("slow_time_average: burn_in leaves no samples");
  double acc = 0.0;
  for (std::size_t i = static_cast<std::size_t>(burn_in); i < series_db.size(); ++i) acc += series_db[i];
  return acc / static_cast<double>(series_db.size() - burn_in);
}

}  // namespace slowbeam

#endif  // SLOWBEAM_ANALYTICS_HPP
