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

// Angular patching on the N-point DFT grid and incremental inverse upkeep.
//
// The phase axis is cut into N patches of width 2 pi / N centered on the DFT
// grid angles k 2 pi / N. A profile reduces to per-patch powers p_k and its
// covariance to (Q diag(p) Q^H) .* D with D = D(2 pi / N). Writing
// D_r = sum_{i<=r} d_i d_i^T turns this into V diag(p (x) 1_r) V^H with
// columns v_{k,i} = q_k .* d_i, so a change confined to a few patches is a
// low-rank update whose inverse follows from the Woodbury identity.

#ifndef SLOWBEAM_PATCH_ENGINE_HPP
#define SLOWBEAM_PATCH_ENGINE_HPP

#include "slowbeam/channel_model.hpp"
#include "slowbeam/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

namespace slowbeam {

/// Per-patch powers on the DFT grid; levels(k) belongs to center k 2 pi / N.
struct PatchPowerProfile {
  RVector levels;

  PatchPowerProfile() = default;
  explicit PatchPowerProfile(RVector l) : levels(std::move(l)) {}
  static PatchPowerProfile zeros(int n) { return PatchPowerProfile(RVector::Zero(n)); }

  int size() const { return static_cast<int>(levels.size()); }
  double mass() const { return levels.sum(); }
  int support_size(double tol = 0.0) const {
    int c = 0;
    for (Eigen::Index i = 0; i < levels.size(); ++i) c += std::abs(levels(i)) > tol;
    return c;
  }
};

inline double patch_width(int n) { return 2.0 * kPi / n; }

/// Equal-power patching of the sector [mu - sigma/2, mu + sigma/2]. A patch is
/// occupied when the sector overlaps its open interval; the grid wraps
/// modulo 2 pi.
inline PatchPowerProfile patch_profile(double mu_theta, double sigma_theta, double mass, int n) {
  if (!(sigma_theta > 0)) throw std::invalid_argument("patch_profile: sigma_theta must be > 0");
  const double w = patch_width(n);
  const double lo = mu_theta - sigma_theta / 2.0;
  const double hi = mu_theta + sigma_theta / 2.0;
  RVector levels = RVector::Zero(n);
  // Candidate grid indices, possibly outside [0, N), folded back with mod N.
  const int k_first = static_cast<int>(std::floor(lo / w)) - 1;
  const int k_last = static_cast<int>(std::ceil(hi / w)) + 1;
  int count = 0;
  for (int k = k_first; k <= k_last; ++k) {
    const double c = k * w;
    if (hi > c - w / 2.0 && lo < c + w / 2.0) {
      const int idx = ((k % n) + n) % n;
      if (levels(idx) == 0.0) ++count;
      levels(idx) = 1.0;
    }
  }
  if (count > 0) levels *= mass / count;
  return PatchPowerProfile(std::move(levels));
}

/// Weighted eigenvectors d_i = sqrt(lambda_i) e_i of a real symmetric kernel,
/// most dominant first.
struct DKernelBasis {
  RMatrix vectors;      // N x r
  RVector eigenvalues;  // r, descending

  int rank() const { return static_cast<int>(vectors.cols()); }
  int dim() const { return static_cast<int>(vectors.rows()); }
  /// D_r = sum_i d_i d_i^T.
  RMatrix truncated_kernel() const { return vectors * vectors.transpose(); }
};

/// Eigenbasis of D(sigma): descending eigenvalues, each eigenvector signed so
/// its first nonzero entry is positive.
inline DKernelBasis kernel_eigenbasis(double sigma, int n, int r) {
  if (r < 1 || r > n) throw std::invalid_argument("kernel_eigenbasis: rank must lie in [1, n]");
  Eigen::SelfAdjointEigenSolver<RMatrix> es(d_kernel(sigma, n));
  if (es.info() != Eigen::Success) throw NumericalError("kernel_eigenbasis: eigensolver failed");
  DKernelBasis b;
  b.vectors.resize(n, r);
  b.eigenvalues.resize(r);
  for (int i = 0; i < r; ++i) {
    const int src = n - 1 - i;
    const double lambda = std::max(es.eigenvalues()(src), 0.0);
    RVector v = es.eigenvectors().col(src);
    fix_sign(v);
    b.eigenvalues(i) = lambda;
    b.vectors.col(i) = std::sqrt(lambda) * v;
  }
  return b;
}

/// Basis of the patch kernel D(2 pi / N).
inline DKernelBasis d_kernel_eigenbasis(int n, int r) { return kernel_eigenbasis(patch_width(n), n, r); }

/// Process-wide cache of bases. The kernels are constant for a given (N, r)
/// or (N, quantized spread), so workers share read-only copies.
class BasisCache {
 public:
  static BasisCache& instance() {
    static BasisCache cache;
    return cache;
  }

  std::shared_ptr<const DKernelBasis> patch_basis(int n, int r) {
    return lookup({n, r, 0}, [&] { return d_kernel_eigenbasis(n, r); });
  }

  /// Basis of D(c 2 pi / N) holding all N eigenvectors, where c counts the
  /// patches spanned by the spread.
  std::shared_ptr<const DKernelBasis> spread_basis(int n, int patches) {
    return lookup({n, n, patches}, [&] { return kernel_eigenbasis(patches * patch_width(n), n, n); });
  }

 private:
  using Key = std::tuple<int, int, int>;
  template <typename F>
  std::shared_ptr<const DKernelBasis> lookup(const Key& key, F make) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto b = std::make_shared<const DKernelBasis>(make());
    cache_.emplace(key, b);
    return b;
  }
  std::mutex mu_;
  std::map<Key, std::shared_ptr<const DKernelBasis>> cache_;
};

/// Patch count ceil(sigma / (2 pi / N)) used for quantizer steps and spread
/// lookups.
inline int spread_patch_count(double sigma_theta, int n) {
  return std::max(1, static_cast<int>(std::ceil(sigma_theta / patch_width(n) - 1e-12)));
}

/// Column v_{k,i} = q(k 2 pi / N) .* d_i.
inline CVector patch_column(int k, const RVector& d, int n) {
  CVector v = steering_vector(k * patch_width(n), n);
  for (int i = 0; i < n; ++i) v(i) *= d(i);
  return v;
}

/// First column of the circulant Q diag(p) Q^H:
/// c_j = sum_k p_k e^{j j k 2 pi / N} / N.
inline CVector circulant_column(const PatchPowerProfile& p) {
  const int n = p.size();
  CVector c = CVector::Zero(n);
  for (int k = 0; k < n; ++k) {
    if (p.levels(k) == 0.0) continue;
    for (int j = 0; j < n; ++j) c(j) += p.levels(k) * std::polar(1.0 / n, j * k * patch_width(n));
  }
  return c;
}

namespace detail {

inline CMatrix circulant_times_kernel(const CVector& c, const RMatrix& kernel) {
  const auto n = c.size();
  CMatrix r(n, n);
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index a = 0; a < n; ++a) r(a, b) = (a >= b ? c(a - b) : std::conj(c(b - a))) * kernel(a, b);
  return r;
}

}  // namespace detail

/// (Q diag(p) Q^H) .* D_r using the truncated basis.
inline CMatrix reconstruct_ccm(const PatchPowerProfile& p, const DKernelBasis& basis) {
  if (p.size() != basis.dim()) throw std::invalid_argument("reconstruct_ccm: profile length mismatch");
  return detail::circulant_times_kernel(circulant_column(p), basis.truncated_kernel());
}

/// Same product against the exact kernel D(2 pi / N).
inline CMatrix reconstruct_ccm_full(const PatchPowerProfile& p) {
  return detail::circulant_times_kernel(circulant_column(p), d_kernel(patch_width(p.size()), p.size()));
}

/// Expected single-patch level h = tr(R) / ceil(sigma / (2 pi / N)).
inline double quantizer_step_base(double trace, double sigma_theta, int n) {
  return trace / spread_patch_count(sigma_theta, n);
}

/// Snaps each level to the nearest multiple of h / N_q; exact ties go to the
/// even multiple.
inline PatchPowerProfile quantize_powers(const PatchPowerProfile& p, double h, int n_q) {
  if (!(h > 0) || n_q < 1) throw std::invalid_argument("quantize_powers: need h > 0 and n_q >= 1");
  const double step = h / n_q;
  RVector out(p.size());
  for (int k = 0; k < p.size(); ++k) {
    const double c = std::nearbyint(p.levels(k) / step);  // default rounding mode: ties to even
    out(k) = std::max(c, 0.0) * step;
  }
  return PatchPowerProfile(std::move(out));
}

inline PatchPowerProfile recursive_filter_powers(const PatchPowerProfile& prev, const PatchPowerProfile& next,
                                                 double beta) {
  if (prev.size() != next.size()) throw std::invalid_argument("recursive_filter_powers: length mismatch");
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("recursive_filter_powers: beta must lie in [0,1)");
  return PatchPowerProfile(beta * prev.levels + (1.0 - beta) * next.levels);
}

/// Observation patch powers sum_g K_g E_s sum_l P_l + N_0, from per-MPC
/// profiles indexed [group][mpc].
inline PatchPowerProfile assemble_py(const std::vector<std::vector<PatchPowerProfile>>& per_mpc,
                                     const ScenarioConfig& config) {
  const int n = config.num_antennas;
  RVector py = RVector::Constant(n, config.noise_power);
  for (std::size_t g = 0; g < per_mpc.size(); ++g) {
    const auto& grp = config.groups.at(g);
    for (const auto& p : per_mpc[g]) {
      if (p.size() != n) throw std::invalid_argument("assemble_py: profile length mismatch");
      py += (grp.num_users * grp.symbol_energy) * p.levels;
    }
  }
  return PatchPowerProfile(std::move(py));
}

/// Indices where `delta` is nonzero.
inline std::vector<int> nonzero_patches(const PatchPowerProfile& delta) {
  std::vector<int> idx;
  for (int k = 0; k < delta.size(); ++k)
    if (delta.levels(k) != 0.0) idx.push_back(k);
  return idx;
}

/// N x (|patches| r) block of V for the listed patches only.
inline CMatrix active_columns(const std::vector<int>& patches, const DKernelBasis& basis) {
  const int n = basis.dim();
  const int r = basis.rank();
  CMatrix v(n, static_cast<Eigen::Index>(patches.size()) * r);
  for (std::size_t a = 0; a < patches.size(); ++a)
    for (int i = 0; i < r; ++i) v.col(static_cast<Eigen::Index>(a) * r + i) = patch_column(patches[a], basis.vectors.col(i), n);
  return v;
}

struct WoodburyStats {
  int n_delta_p = 0;
  int inner_size = 0;
  bool fell_back = false;
};

/// Inner matrices whose smallest singular value falls below this fraction
/// of (1 + |G|) are treated as singular. Such an update removes most of the
/// power along some direction and amplifies the error already present in
/// A^{-1} by the reciprocal of that ratio.
inline constexpr double kWoodburyCancellationTolerance = 1e-3;

/// Pieces of a signed low-rank correction in scaled Woodbury form:
///   (A + V P V^H)^{-1} = A^{-1} - W (sgn P + G)^{-1} W^H,
///   U = V |P|^{1/2}, W = A^{-1} U, G = U^H A^{-1} U,
/// with P = diag(delta (x) 1_r) restricted to its support. Only that
/// support's columns of V are formed.
struct WoodburyInner {
  CMatrix u;
  CMatrix w;
  Eigen::FullPivLU<CMatrix> lu;
};

/// std::nullopt when the inner matrix is singular or cancels below
/// kWoodburyCancellationTolerance.
inline std::optional<WoodburyInner> woodbury_inner(const CMatrix& a_inv, const PatchPowerProfile& delta,
                                                   const std::vector<int>& support, const DKernelBasis& basis) {
  const int r = basis.rank();
  WoodburyInner out;
  out.u = active_columns(support, basis);
  RVector sign(out.u.cols());
  for (std::size_t a = 0; a < support.size(); ++a) {
    const double d = delta.levels(support[a]);
    for (int i = 0; i < r; ++i) {
      const Eigen::Index j = static_cast<Eigen::Index>(a) * r + i;
      out.u.col(j) *= std::sqrt(std::abs(d));
      sign(j) = d > 0.0 ? 1.0 : -1.0;
    }
  }
  out.w = a_inv * out.u;
  CMatrix inner = hermitian_part(CMatrix(out.u.adjoint() * out.w));
  const double g_norm = inner.cwiseAbs().colwise().sum().maxCoeff();
  inner.diagonal() += sign.cast<cdouble>();
  const double m_norm = inner.cwiseAbs().colwise().sum().maxCoeff();
  out.lu.compute(inner);
  if (!out.lu.isInvertible() || out.lu.rcond() * m_norm < kWoodburyCancellationTolerance * (1.0 + g_norm))
    return std::nullopt;
  return out;
}

/// (A + V P V^H)^{-1} from A^{-1}, or std::nullopt as for woodbury_inner.
inline std::optional<CMatrix> woodbury_apply(const CMatrix& a_inv, const PatchPowerProfile& delta,
                                             const std::vector<int>& support, const DKernelBasis& basis) {
  const auto inner = woodbury_inner(a_inv, delta, support, basis);
  if (!inner) return std::nullopt;
  return hermitian_part(CMatrix(a_inv - inner->w * inner->lu.solve(inner->w.adjoint())));
}

/// Quantized observation patch powers and the inverse of their covariance
/// (V diag(p (x) 1_r) V^H)^{-1}, kept in sync one slow-time step at a time.
struct QuantizedInverseState {
  PatchPowerProfile p_y_q;
  CMatrix r_y_q_inv;
  int step = -1;
  WoodburyStats last;
  int fallbacks = 0;
};

/// Dense start: inverts the reconstruction of the first quantized profile.
inline QuantizedInverseState init_inverse_state(const PatchPowerProfile& p_y_q, const DKernelBasis& basis,
                                                int step = 0) {
  QuantizedInverseState s;
  s.p_y_q = p_y_q;
  const CMatrix r = reconstruct_ccm(p_y_q, basis);
  Eigen::LLT<CMatrix> llt(r);
  if (llt.info() != Eigen::Success) throw NumericalError("init_inverse_state: quantized covariance is not PD");
  s.r_y_q_inv = hermitian_part(llt.solve(CMatrix::Identity(r.rows(), r.cols())));
  s.step = step;
  s.last = {};
  return s;
}

/// Accepted incremental inverses keep |R A^{-1} - I|_2 at or below this
/// estimate; a larger one triggers dense inversion.
inline constexpr double kInverseResidualTolerance = 5e-8;

namespace detail {

/// Power-iteration estimate of |R X - I|_2 for Hermitian R and X from a
/// fixed start vector. O(N^2) per iteration.
inline double residual_norm_estimate(const CMatrix& r, const CMatrix& x, int iterations = 8) {
  const Eigen::Index n = r.rows();
  CVector v(n);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i) = cdouble(std::cos(1.0 + 0.7 * static_cast<double>(i)), std::sin(0.3 + 1.3 * static_cast<double>(i)));
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const CVector e = r * (x * v) - v;
    est = std::max(est, e.norm());
    const CVector f = x * (r * e) - e;
    const double fn = f.norm();
    if (fn == 0.0) break;
    v = f / fn;
  }
  return est;
}

}  // namespace detail

/// Moves the state to `p_y_q_next`. The inner inversion has size
/// N_dp * r, N_dp being the number of patches whose level changed. A singular
/// or strongly cancelling inner matrix, or a result failing the residual
/// check, falls back to dense inversion and is counted.
inline QuantizedInverseState woodbury_update(QuantizedInverseState state, const PatchPowerProfile& p_y_q_next,
                                             const DKernelBasis& basis) {
  if (p_y_q_next.size() != state.p_y_q.size()) throw std::invalid_argument("woodbury_update: length mismatch");
  const PatchPowerProfile delta(p_y_q_next.levels - state.p_y_q.levels);
  const auto support = nonzero_patches(delta);
  state.last = {static_cast<int>(support.size()), static_cast<int>(support.size()) * basis.rank(), false};
  ++state.step;
  if (support.empty()) return state;
  auto inv = woodbury_apply(state.r_y_q_inv, delta, support, basis);
  if (inv && detail::residual_norm_estimate(reconstruct_ccm(p_y_q_next, basis), *inv) <= kInverseResidualTolerance) {
    state.r_y_q_inv = std::move(*inv);
    state.p_y_q = p_y_q_next;
    return state;
  }
  const int step = state.step;
  const auto stats = state.last;
  const int fallbacks = state.fallbacks + 1;
  state = init_inverse_state(p_y_q_next, basis, step);
  state.last = stats;
  state.last.fell_back = true;
  state.fallbacks = fallbacks;
  return state;
}

enum class Method { kGeb, kGebFiltered, kGebTrue, kWiener, kWhitening, kDft };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kGeb: return "geb";
    case Method::kGebFiltered: return "geb-filtered";
    case Method::kGebTrue: return "geb-true";
    case Method::kWiener: return "wiener";
    case Method::kWhitening: return "whitening";
    case Method::kDft: return "dft";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::kGeb, Method::kGebFiltered, Method::kGebTrue, Method::kWiener, Method::kWhitening,
                   Method::kDft}) {
    if (method_name(m) == s) return m;
  }
  throw std::invalid_argument("unknown method: " + s);
}

/// Size of the dominant matrix inversion per slow-time step: N_dp r for the
/// Wiener type, (N_dp + N_pl) r for the whitening type and N for GEB.
inline int complexity_measure(Method method, int n_delta_p, int n_patch_l, int r, int n) {
  switch (method) {
    case Method::kWiener: return n_delta_p * r;
    case Method::kWhitening: return (n_delta_p + n_patch_l) * r;
    case Method::kGeb:
    case Method::kGebFiltered:
    case Method::kGebTrue: return n;
    case Method::kDft: return 0;
  }
  throw std::invalid_argument("complexity_measure: unknown method");
}

}  // namespace slowbeam

#endif  // SLOWBEAM_PATCH_ENGINE_HPP
