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

#include "slowbeam/beamformers.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "slowbeam/runner.hpp"

namespace slowbeam {
namespace {

double cosine(const CVector& a, const CVector& b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

CVector dominant_eigenvector(const CMatrix& r) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  return es.eigenvectors().col(r.rows() - 1);
}

std::vector<double> degree_grid(double step) {
  std::vector<double> g;
  for (double d = -89.0; d <= 89.0 + 1e-9; d += step) g.push_back(deg2rad(d));
  return g;
}

// Peak of a column's pattern over the grid and its value at `phi`, in dB.
double depth_db(const CVector& s, double phi) {
  const RMatrix pat = beam_pattern(s, degree_grid(0.05));
  const RMatrix at = beam_pattern(s, {phi});
  return db10(at(0, 0) / pat.maxCoeff());
}

// Intended MPC at 0 deg and one strong interferer at 40 deg.
ScenarioConfig two_group_scenario() {
  ScenarioConfig c;
  c.num_antennas = 32;
  GroupSpec a;
  a.mpcs = {{0.0, 3.0, 0}};
  a.rf_chains_per_mpc = {1};
  GroupSpec b = a;
  b.mpcs = {{40.0, 3.0, 0}};
  b.symbol_energy = 100.0;
  c.groups = {a, b};
  c.channel_memory = 1;
  validate(c);
  return c;
}

QuantizedInverseState quantized_state(const ScenarioConfig& c, const DKernelBasis& basis,
                                      std::vector<std::vector<PatchPowerProfile>>* per_mpc = nullptr) {
  std::vector<std::vector<PatchPowerProfile>> q(c.groups.size());
  for (std::size_t g = 0; g < c.groups.size(); ++g)
    for (std::size_t m = 0; m < c.groups[g].mpcs.size(); ++m) {
      const auto& mpc = c.groups[g].mpcs[m];
      const auto sec = theta_sector(deg2rad(mpc.center_angle_deg), deg2rad(mpc.angular_spread_deg));
      const double share = c.groups[g].power_share(m);
      q[g].push_back(quantize_powers(patch_profile(sec.mu, sec.sigma, share, c.num_antennas),
                                     quantizer_step_base(share, sec.sigma, c.num_antennas), 2));
    }
  if (per_mpc) *per_mpc = q;
  return init_inverse_state(assemble_py(q, c), basis);
}

TEST(GebTest, IdenticalPencilGivesUnitEigenvalues) {
  const auto c = small_table1_scenario();
  const CMatrix ry = assemble_ry(nominal_ccms(c), c);
  const auto res = geb(ry, ry, 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(res.eigenvalues(i), 1.0, 1e-10);
  EXPECT_LT((res.vectors.adjoint() * ry * res.vectors - CMatrix::Identity(4, 4)).norm(), 1e-10);
}

TEST(GebTest, NoiseOnlyPencilMatchesOrdinaryEigenvectors) {
  const int n = 32;
  const CMatrix r = mpc_ccm(deg2rad(12.0), deg2rad(4.0), 1.0, n);
  const CMatrix ry = r + 1e-3 * CMatrix::Identity(n, n);
  const auto res = geb(r, ry, 2);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  for (int i = 0; i < 2; ++i) {
    EXPECT_GT(cosine(res.vectors.col(i), es.eigenvectors().col(n - 1 - i)), 1 - 1e-8);
    const double mu = es.eigenvalues()(n - 1 - i);
    EXPECT_NEAR(res.eigenvalues(i), mu / (mu + 1e-3), 1e-9);
  }
}

TEST(GebTest, GeneralizedEigenEquationHolds) {
  const auto c = small_table1_scenario();
  const auto ccms = nominal_ccms(c);
  const CMatrix ry = assemble_ry(ccms, c);
  for (const auto& r : ccms[0]) {
    const auto res = geb(r, ry, 2);
    for (int i = 0; i < 2; ++i) {
      const CVector lhs = r * res.vectors.col(i);
      const CVector rhs = res.eigenvalues(i) * (ry * res.vectors.col(i));
      EXPECT_LT((lhs - rhs).norm() / rhs.norm(), 1e-6);
    }
    EXPECT_GE(res.eigenvalues(0), res.eigenvalues(1));
  }
}

TEST(GebTest, ReferencePatternNullsInterferers) {
  const auto c = default_table1_scenario();
  const auto ccms = nominal_ccms(c);
  const CMatrix s = detail::geb_beamformer(ccms, assemble_ry(ccms, c), c);
  ASSERT_EQ(s.cols(), 3);
  for (int col = 0; col < 3; ++col)
    for (std::size_t g = 1; g < c.groups.size(); ++g)
      for (const auto& m : c.groups[g].mpcs)
        EXPECT_LE(depth_db(s.col(col), deg2rad(m.center_angle_deg)), -30.0) << "column " << col;
}

TEST(GebTest, RejectsBadInput) {
  const CMatrix ry = CMatrix::Identity(4, 4);
  EXPECT_THROW(geb(ry, ry, 0), std::invalid_argument);
  EXPECT_THROW(geb(ry, ry, 5), std::invalid_argument);
  EXPECT_THROW(geb(ry, -ry, 1), NumericalError);
}

TEST(GebSuboptimalTest, IdentityCorrelationPassesThrough) {
  const CVector w = steering_vector(0.4, 8);
  EXPECT_LT((geb_suboptimal(CMatrix::Identity(8, 8), w) - w).norm(), 1e-15);
}

TEST(GebSuboptimalTest, PointSourceMatchesGeb) {
  const int n = 32;
  const CVector q = steering_vector(1.1, n);
  const CMatrix r = q * q.adjoint();
  const CMatrix ry = r + mpc_ccm(deg2rad(-30.0), deg2rad(5.0), 50.0, n) + 1e-3 * CMatrix::Identity(n, n);
  EXPECT_GT(cosine(geb_suboptimal(ry.inverse(), q), geb(r, ry, 1).vectors.col(0)), 1 - 1e-9);
}

TEST(GebSuboptimalTest, ReferenceScenarioCloseToGeb) {
  const auto c = default_table1_scenario();
  const auto ccms = nominal_ccms(c);
  const CMatrix ry = assemble_ry(ccms, c);
  const CMatrix ry_inv = ry.inverse();
  for (const auto& r : ccms[0])
    EXPECT_GE(cosine(geb_suboptimal(ry_inv, dominant_eigenvector(r)), geb(r, ry, 1).vectors.col(0)), 0.99);
}

TEST(FilterCcmsTest, PassthroughAndFixedPoint) {
  const auto c = small_table1_scenario();
  const auto a = nominal_ccms(c);
  auto shifted = c;
  for (auto& g : shifted.groups)
    for (auto& m : g.mpcs) m.center_angle_deg += 1.0;
  const auto b = nominal_ccms(shifted);

  auto s = filter_ccms({}, a, 0.0, c);
  s = filter_ccms(std::move(s), b, 0.0, c);
  EXPECT_EQ(s.ccms[0][0], b[0][0]);

  auto f = filter_ccms({}, a, 0.9, c);
  for (int i = 0; i < 5; ++i) f = filter_ccms(std::move(f), a, 0.9, c);
  EXPECT_LT((f.ccms[1][1] - a[1][1]).norm(), 1e-14);
  EXPECT_LT((f.ry - assemble_ry(a, c)).norm(), 1e-10);
  EXPECT_THROW(filter_ccms({}, a, 1.0, c), std::invalid_argument);
}

TEST(SteeringFilterTest, PassthroughAndFixedPoint) {
  const int n = 32;
  const auto sec = theta_sector(deg2rad(9.75), deg2rad(2.5));
  const CMatrix w = estimated_steering(sec.mu, sec.sigma, n, 2);
  const CMatrix other = estimated_steering(sec.mu + 0.1, sec.sigma, n, 2);
  auto s = filter_steering({}, {w}, 0.0);
  s = filter_steering(std::move(s), {other}, 0.0);
  EXPECT_EQ(s.per_mpc[0], other);
  auto f = filter_steering({}, {w}, 0.9);
  for (int i = 0; i < 10; ++i) f = filter_steering(std::move(f), {w}, 0.9);
  EXPECT_LT((f.per_mpc[0] - w).norm(), 1e-14);
}

TEST(SteeringFilterTest, StaticFixedPointIsWeightedSteering) {
  const int n = 32;
  const auto sec = theta_sector(deg2rad(-13.5), deg2rad(3.0));
  const CMatrix w = estimated_steering(sec.mu, sec.sigma, n, 1);
  const auto basis = kernel_eigenbasis(spread_patch_count(sec.sigma, n) * patch_width(n), n, 1);
  const CVector expected = steering_vector(sec.mu, n).cwiseProduct(basis.vectors.col(0).cast<cdouble>());
  EXPECT_LT((w.col(0) - expected).norm(), 1e-12);
}

TEST(SteeringFilterTest, SinglePatchWeightingIsNearlyFlat) {
  const int n = 32;
  const double mu = 0.37;
  const CMatrix w = estimated_steering(mu, 0.5 * patch_width(n), n, 1);
  EXPECT_GT(cosine(w.col(0), steering_vector(mu, n)), 0.99);
}

TEST(WienerTest, IdentityInversePassesThrough) {
  QuantizedInverseState st;
  st.r_y_q_inv = CMatrix::Identity(8, 8);
  st.step = 3;
  const CMatrix w = estimated_steering(0.2, 0.3, 8, 1);
  EXPECT_EQ(wiener_type(st, w, 3), w);
  EXPECT_THROW(wiener_type(st, w, 4), std::logic_error);
}

TEST(WienerTest, FarInterfererIsSuppressed) {
  const auto c = two_group_scenario();
  const auto basis = d_kernel_eigenbasis(32, 2);
  const auto st = quantized_state(c, basis);
  const auto sec = theta_sector(0.0, deg2rad(3.0));
  const CMatrix s = wiener_type(st, estimated_steering(sec.mu, sec.sigma, 32, 1), 0);
  EXPECT_LE(depth_db(s.col(0), deg2rad(40.0)), -20.0);
}

TEST(WhiteningTest, VanishingSubtractionEqualsWiener) {
  const auto c = small_table1_scenario();
  const auto basis = d_kernel_eigenbasis(32, 2);
  std::vector<std::vector<PatchPowerProfile>> q;
  const auto st = quantized_state(c, basis, &q);
  const auto sec = theta_sector(0.0, deg2rad(3.0));
  const CMatrix w = estimated_steering(sec.mu, sec.sigma, 32, 1);
  const auto out = whitening_type(st, q[0][0], w, 0.0, basis, 0);
  EXPECT_LT((out.block - wiener_type(st, w, 0)).norm(), 1e-15);
  const auto tiny = whitening_type(st, q[0][0], w, 1e-12, basis, 0);
  EXPECT_LT((tiny.block - wiener_type(st, w, 0)).norm() / wiener_type(st, w, 0).norm(), 1e-8);
}

TEST(WhiteningTest, WhiteInterferenceKeepsDirection) {
  ScenarioConfig c;
  c.num_antennas = 16;
  GroupSpec g;
  g.mpcs = {{5.0, 4.0, 0}};
  g.rf_chains_per_mpc = {1};
  c.groups = {g};
  validate(c);
  const auto basis = d_kernel_eigenbasis(16, 16);
  std::vector<std::vector<PatchPowerProfile>> q;
  const auto st = quantized_state(c, basis, &q);
  const auto sec = theta_sector(deg2rad(5.0), deg2rad(4.0));
  const CMatrix w = estimated_steering(sec.mu, sec.sigma, 16, 1);
  const auto out = whitening_type(st, q[0][0], w, 1.0, basis, 0);
  EXPECT_GT(cosine(out.block.col(0), w.col(0)), 1 - 1e-8);
}

TEST(WhiteningTest, MatchesDenseInterferenceInverse) {
  const auto c = small_table1_scenario();
  const auto basis = d_kernel_eigenbasis(32, 2);
  std::vector<std::vector<PatchPowerProfile>> q;
  const auto st = quantized_state(c, basis, &q);
  for (std::size_t m = 0; m < 3; ++m) {
    const auto& mpc = c.groups[0].mpcs[m];
    const auto sec = theta_sector(deg2rad(mpc.center_angle_deg), deg2rad(mpc.angular_spread_deg));
    const CMatrix w = estimated_steering(sec.mu, sec.sigma, 32, 1);
    const auto out = whitening_type(st, q[0][m], w, 1.0, basis, 0);
    const PatchPowerProfile eta(st.p_y_q.levels - q[0][m].levels);
    const CMatrix expected = reconstruct_ccm(eta, basis).llt().solve(w);
    EXPECT_LT((out.block - expected).norm() / expected.norm(), 1e-8);
    EXPECT_EQ(out.inner_size, q[0][m].support_size() * 2);
  }
}

TEST(WhiteningTest, TwoChainsPerMpc) {
  auto c = small_table1_scenario();
  c.groups[1].rf_chains_per_mpc = {2, 2};
  c.intended_group = 1;
  const auto basis = d_kernel_eigenbasis(32, 2);
  std::vector<std::vector<PatchPowerProfile>> q;
  const auto st = quantized_state(c, basis, &q);
  std::vector<std::pair<int, CMatrix>> blocks;
  for (int m = 0; m < 2; ++m) {
    const auto& mpc = c.groups[1].mpcs[m];
    const auto sec = theta_sector(deg2rad(mpc.center_angle_deg), deg2rad(mpc.angular_spread_deg));
    const CMatrix w = estimated_steering(sec.mu, sec.sigma, 32, 2);
    ASSERT_EQ(w.cols(), 2);
    blocks.emplace_back(m, whitening_type(st, q[1][m], w, 20.0, basis, 0).block);
  }
  const auto s = assemble(blocks);
  EXPECT_EQ(s.columns(), 4);
  EXPECT_EQ(s.block_map.at(0), (ColumnBlock{0, 2}));
  EXPECT_EQ(s.block_map.at(1), (ColumnBlock{2, 2}));
}

TEST(DftTest, ZeroAngleGivesFirstColumn) {
  const auto s = dft_baseline({0.0}, {1}, 16);
  EXPECT_LT((s.weights.col(0) - steering_vector(0.0, 16)).norm(), 1e-15);
}

TEST(DftTest, CollisionMovesToNextNearest) {
  const int n = 16;
  const double w = patch_width(n);
  const auto s = dft_baseline({2.1 * w, 1.9 * w}, {1, 1}, n);
  EXPECT_LT((s.weights.col(0) - steering_vector(2 * w, n)).norm(), 1e-14);
  // Nearest free column to 1.9 w once column 2 is taken is column 1.
  EXPECT_LT((s.weights.col(1) - steering_vector(1 * w, n)).norm(), 1e-14);
  EXPECT_THROW(dft_baseline({0.0}, {17}, n), std::invalid_argument);
}

TEST(DftTest, ReferenceGroupColumns) {
  const auto c = default_table1_scenario();
  std::vector<double> mu;
  std::vector<int> d;
  for (const auto& m : c.groups[0].mpcs) {
    mu.push_back(phi_to_theta(deg2rad(m.center_angle_deg)));
    d.push_back(1);
  }
  const auto s = dft_baseline(mu, d, 100);
  const int expected[] = {0, 8, 19};  // round(N sin(phi) / 2)
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(static_cast<int>(std::lround(100 * std::sin(deg2rad(c.groups[0].mpcs[i].center_angle_deg)) / 2)),
              expected[i]);
    EXPECT_LT((s.weights.col(i) - steering_vector(expected[i] * patch_width(100), 100)).norm(), 1e-13);
  }
}

TEST(AssembleTest, BlocksAndNormalization) {
  CMatrix one = CMatrix::Zero(4, 1);
  one(1, 0) = 3.0;
  const auto a = assemble({{0, one}});
  EXPECT_EQ(a.columns(), 1);
  EXPECT_NEAR(std::abs(a.weights(1, 0)), 1.0, 1e-15);

  const auto c = default_table1_scenario();
  const auto ccms = nominal_ccms(c);
  const CMatrix s = detail::geb_beamformer(ccms, assemble_ry(ccms, c), c);
  EXPECT_EQ(s.rows(), 100);
  EXPECT_EQ(s.cols(), 3);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.col(i).norm(), 1.0, 1e-12);

  std::vector<std::pair<int, CMatrix>> blocks = {{2, CMatrix::Ones(4, 1)}, {0, CMatrix::Ones(4, 1)},
                                                 {1, CMatrix::Ones(4, 1)}};
  const auto m = assemble(blocks);
  EXPECT_EQ(m.block_map.at(0), (ColumnBlock{0, 1}));
  EXPECT_EQ(m.block_map.at(1), (ColumnBlock{1, 1}));
  EXPECT_EQ(m.block_map.at(2), (ColumnBlock{2, 1}));
}

}  // namespace
}  // namespace slowbeam
