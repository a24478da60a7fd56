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

// Statistical analog beamformers. Each MPC of the intended group gets a block
// of d_m columns; blocks are concatenated in MPC order.

#ifndef SLOWBEAM_BEAMFORMERS_HPP
#define SLOWBEAM_BEAMFORMERS_HPP

#include "slowbeam/channel_model.hpp"
#include "slowbeam/patch_engine.hpp"
#include "slowbeam/types.hpp"

#include <map>
#include <set>
#include <utility>
#include <vector>

namespace slowbeam {

struct ColumnBlock {
  int start = 0;
  int count = 0;
  bool operator==(const ColumnBlock&) const = default;
};

/// N x D_g analog combiner with unit-norm columns.
struct BeamformerMatrix {
  CMatrix weights;
  std::map<int, ColumnBlock> block_map;  // MPC index -> columns

  int columns() const { return static_cast<int>(weights.cols()); }
};

/// Concatenates per-MPC blocks in MPC order and unit-normalizes every column.
inline BeamformerMatrix assemble(const std::vector<std::pair<int, CMatrix>>& blocks) {
  std::map<int, const CMatrix*> ordered;
  Eigen::Index n = -1;
  for (const auto& [mpc, m] : blocks) {
    if (!ordered.emplace(mpc, &m).second) throw std::invalid_argument("assemble: duplicate MPC index");
    if (n >= 0 && m.rows() != n) throw std::invalid_argument("assemble: inconsistent array size");
    n = m.rows();
  }
  BeamformerMatrix out;
  int total = 0;
  for (const auto& [mpc, m] : ordered) total += static_cast<int>(m->cols());
  out.weights.resize(std::max<Eigen::Index>(n, 0), total);
  int col = 0;
  for (const auto& [mpc, m] : ordered) {
    out.block_map[mpc] = {col, static_cast<int>(m->cols())};
    for (Eigen::Index j = 0; j < m->cols(); ++j, ++col) {
      const double nrm = m->col(j).norm();
      if (!(nrm > 0) || !std::isfinite(nrm)) throw NumericalError("assemble: zero or non-finite beamformer column");
      out.weights.col(col) = m->col(j) / nrm;
    }
  }
  return out;
}

namespace detail {

/// Pivoted partial Cholesky R ~= B B^H of a Hermitian PSD matrix, stopping
/// once the residual diagonal drops below rel_tol * tr(R).
inline CMatrix low_rank_factor(const CMatrix& r, double rel_tol) {
  const Eigen::Index n = r.rows();
  RVector diag = r.diagonal().real();
  const double stop = rel_tol * std::max(diag.sum(), 0.0);
  CMatrix b(n, 0);
  std::vector<CVector> cols;
  while (static_cast<Eigen::Index>(cols.size()) < n) {
    Eigen::Index p = 0;
    const double dmax = diag.maxCoeff(&p);
    if (!(dmax > stop) || dmax <= 0.0) break;
    CVector c = r.col(p);
    for (const auto& prev : cols) c -= prev * std::conj(prev(p));
    c /= std::sqrt(dmax);
    for (Eigen::Index i = 0; i < n; ++i) diag(i) -= std::norm(c(i));
    diag(p) = 0.0;
    cols.push_back(std::move(c));
  }
  b.resize(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) b.col(static_cast<Eigen::Index>(j)) = cols[j];
  return b;
}

}  // namespace detail

struct GebResult {
  CMatrix vectors;      // N x d, orthonormal in the R_y metric
  RVector eigenvalues;  // d, descending
};

/// Dominant generalized eigenvectors of the pencil (R_l, R_y) by whitening:
/// R_y = L L^H, eigenvectors x of L^{-1} R_l L^{-H}, then v = L^{-H} x.
/// The inner eigenproblem is solved through a rank-revealing factor of R_l
/// when R_l is numerically low-rank, and densely otherwise.
inline GebResult geb(const CMatrix& ccm, const CMatrix& ry, int d) {
  const Eigen::Index n = ry.rows();
  if (d < 1 || d > n) throw std::invalid_argument("geb: d must lie in [1, N]");
  if (ccm.rows() != n || ccm.cols() != n) throw std::invalid_argument("geb: dimension mismatch");
  Eigen::LLT<CMatrix> llt(hermitian_part(ry));
  if (llt.info() != Eigen::Success) throw NumericalError("geb: R_y is not positive definite");
  const auto lower = llt.matrixL();

  CMatrix x;      // whitened eigenvectors, N x d
  RVector lambda(d);
  const CMatrix factor = detail::low_rank_factor(ccm, 1e-13);
  if (factor.cols() >= d && factor.cols() <= n / 2) {
    const CMatrix c = lower.solve(factor);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(c.adjoint() * c);
    if (es.info() != Eigen::Success) throw NumericalError("geb: eigensolver failed");
    const Eigen::Index k = c.cols();
    x.resize(n, d);
    for (int i = 0; i < d; ++i) {
      const double ev = es.eigenvalues()(k - 1 - i);
      lambda(i) = ev;
      x.col(i) = c * es.eigenvectors().col(k - 1 - i) / std::sqrt(std::max(ev, 1e-300));
    }
  } else {
    const CMatrix whitened = lower.solve(lower.solve(ccm).adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(whitened));
    if (es.info() != Eigen::Success) throw NumericalError("geb: eigensolver failed");
    x.resize(n, d);
    for (int i = 0; i < d; ++i) {
      lambda(i) = es.eigenvalues()(n - 1 - i);
      x.col(i) = es.eigenvectors().col(n - 1 - i);
    }
  }
  GebResult out;
  out.vectors = llt.matrixU().solve(x);
  out.eigenvalues = lambda;
  for (int i = 0; i < d; ++i) fix_phase(out.vectors.col(i));
  return out;
}

/// Rank-one shortcut R_y^{-1} w_1.
inline CVector geb_suboptimal(const CMatrix& ry_inv, const CVector& w1) {
  if (ry_inv.cols() != w1.size()) throw std::invalid_argument("geb_suboptimal: dimension mismatch");
  return ry_inv * w1;
}

/// Recursively filtered per-MPC CCMs and the observation correlation rebuilt
/// from them.
struct FilteredCcmState {
  GroupCcms ccms;
  CMatrix ry;
  bool initialized = false;
};

/// R^f[n] = beta R^f[n-1] + (1 - beta) R[n] per MPC. The first call adopts
/// the estimates as they are.
inline FilteredCcmState filter_ccms(FilteredCcmState state, const GroupCcms& estimates, double beta,
                                    const ScenarioConfig& config) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("filter_ccms: beta must lie in [0,1)");
  if (!state.initialized) {
    state.ccms = estimates;
    state.initialized = true;
  } else {
    for (std::size_t g = 0; g < estimates.size(); ++g)
      for (std::size_t m = 0; m < estimates[g].size(); ++m)
        state.ccms[g][m] = beta * state.ccms[g][m] + (1.0 - beta) * estimates[g][m];
  }
  state.ry = assemble_ry(state.ccms, config);
  return state;
}

/// Estimated eigenvector approximations w_i = q(mu) .* d_i(sigma) for
/// i = 1..count, with sigma snapped up to a whole number of patches.
inline CMatrix estimated_steering(double mu_theta, double sigma_theta, int n, int count) {
  const auto basis = BasisCache::instance().spread_basis(n, spread_patch_count(sigma_theta, n));
  const CVector q = steering_vector(mu_theta, n);
  CMatrix w(n, count);
  for (int i = 0; i < count; ++i) w.col(i) = q.cwiseProduct(basis->vectors.col(i).cast<cdouble>());
  return w;
}

/// Filtered steering vectors, one N x d_m block per MPC.
struct FilteredSteering {
  std::vector<CMatrix> per_mpc;
  bool initialized = false;
};

inline FilteredSteering filter_steering(FilteredSteering state, const std::vector<CMatrix>& fresh, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("filter_steering: beta must lie in [0,1)");
  if (!state.initialized) {
    state.per_mpc = fresh;
    state.initialized = true;
    return state;
  }
  for (std::size_t m = 0; m < fresh.size(); ++m) state.per_mpc[m] = beta * state.per_mpc[m] + (1.0 - beta) * fresh[m];
  return state;
}

/// Wiener-type block (R_y^q)^{-1} w^f. `expected_step` guards against using
/// an inverse that has not been advanced to the current slow-time index.
inline CMatrix wiener_type(const QuantizedInverseState& inv, const CMatrix& w_filt, int expected_step) {
  if (inv.step != expected_step) throw std::logic_error("wiener_type: stale inverse state");
  return inv.r_y_q_inv * w_filt;
}

struct WhiteningOutput {
  CMatrix block;
  int inner_size = 0;
  bool fell_back = false;
};

/// Whitening-type block (R_y^q - E_s K_g R_l^q)^{-1} w^f. The interference
/// inverse is one more Woodbury step from (R_y^q)^{-1}, removing the MPC's
/// own quantized patches; only its action on w^f is formed.
inline WhiteningOutput whitening_type(const QuantizedInverseState& inv, const PatchPowerProfile& p_l_q,
                                      const CMatrix& w_filt, double users_times_energy, const DKernelBasis& basis,
                                      int expected_step) {
  if (inv.step != expected_step) throw std::logic_error("whitening_type: stale inverse state");
  WhiteningOutput out;
  const CMatrix x = inv.r_y_q_inv * w_filt;
  const auto support = nonzero_patches(p_l_q);
  if (support.empty() || users_times_energy == 0.0) {
    out.block = x;
    return out;
  }
  out.inner_size = static_cast<int>(support.size()) * basis.rank();
  const PatchPowerProfile removed(-users_times_energy * p_l_q.levels);
  if (const auto inner = woodbury_inner(inv.r_y_q_inv, removed, support, basis)) {
    out.block = x - inner->w * inner->lu.solve(inner->u.adjoint() * x);
    return out;
  }
  PatchPowerProfile eta(inv.p_y_q.levels - users_times_energy * p_l_q.levels);
  const CMatrix r_eta = reconstruct_ccm(eta, basis);
  Eigen::LLT<CMatrix> llt(r_eta);
  if (llt.info() != Eigen::Success) throw NumericalError("whitening_type: interference covariance is not PD");
  out.block = llt.solve(w_filt);
  out.fell_back = true;
  return out;
}

/// DFT grid index nearest to a phase angle.
inline int nearest_dft_index(double theta, int n) {
  const long k = std::lround(theta / patch_width(n));
  return static_cast<int>(((k % n) + n) % n);
}

/// Conventional DFT beamformer: per MPC, the d_m DFT columns closest to the
/// estimated phase angle. A column already taken moves the MPC on to its
/// next-nearest free column.
inline BeamformerMatrix dft_baseline(const std::vector<double>& mu_theta_est, const std::vector<int>& d, int n) {
  if (mu_theta_est.size() != d.size()) throw std::invalid_argument("dft_baseline: size mismatch");
  std::set<int> taken;
  std::vector<std::pair<int, CMatrix>> blocks;
  for (std::size_t m = 0; m < mu_theta_est.size(); ++m) {
    const double pos = mu_theta_est[m] / patch_width(n);
    // Candidates ordered by distance on the circular grid.
    std::vector<std::pair<double, int>> order;
    for (int k = 0; k < n; ++k) {
      double dist = std::fmod(std::abs(pos - k), static_cast<double>(n));
      dist = std::min(dist, n - dist);
      order.emplace_back(dist, k);
    }
    std::sort(order.begin(), order.end());
    CMatrix block(n, d[m]);
    int filled = 0;
    for (const auto& [dist, k] : order) {
      if (filled == d[m]) break;
      if (taken.count(k)) continue;
      taken.insert(k);
      block.col(filled++) = steering_vector(k * patch_width(n), n);
    }
    if (filled < d[m]) throw std::invalid_argument("dft_baseline: more columns requested than the grid holds");
    blocks.emplace_back(static_cast<int>(m), std::move(block));
  }
  return assemble(blocks);
}

/// |s_i^H u(phi)|^2 per grid angle (rows) and column (cols).
inline RMatrix beam_pattern(const CMatrix& s, const std::vector<double>& phi_grid) {
  RMatrix out(static_cast<Eigen::Index>(phi_grid.size()), s.cols());
  for (std::size_t i = 0; i < phi_grid.size(); ++i) {
    const CVector u = array_response(phi_grid[i], static_cast<int>(s.rows()));
    out.row(static_cast<Eigen::Index>(i)) = (s.adjoint() * u).cwiseAbs2().transpose();
  }
  return out;
}

}  // namespace slowbeam

#endif  // SLOWBEAM_BEAMFORMERS_HPP
