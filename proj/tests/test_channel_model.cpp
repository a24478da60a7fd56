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

#include "slowbeam/channel_model.hpp"

#include <cmath>
#include <vector>

#include "gtest/gtest.h"

namespace slowbeam {
namespace {

double rel_fro(const CMatrix& a, const CMatrix& b) { return (a - b).norm() / b.norm(); }

TEST(SteeringTest, ZeroPhase) {
  const CVector q = steering_vector(0.0, 4);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(q(i) - cdouble(0.5, 0.0)), 0.0, 1e-15);
}

TEST(SteeringTest, PiPhaseAlternates) {
  const CVector q = steering_vector(kPi, 2);
  EXPECT_NEAR(std::abs(q(0) - cdouble(1.0 / std::sqrt(2.0), 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(q(1) - cdouble(-1.0 / std::sqrt(2.0), 0.0)), 0.0, 1e-15);
}

TEST(SteeringTest, UnitNorm) {
  for (double t : {-3.0, -0.4, 0.0, 1.1, 2.9})
    for (int n : {1, 7, 32, 100}) EXPECT_NEAR(steering_vector(t, n).norm(), 1.0, 1e-13);
  EXPECT_THROW(steering_vector(0.0, 0), std::invalid_argument);
}

TEST(AngleMapTest, KnownValues) {
  EXPECT_DOUBLE_EQ(phi_to_theta(0.0), 0.0);
  EXPECT_NEAR(phi_to_theta(kPi / 6), kPi / 2, 1e-15);
  EXPECT_THROW(phi_to_theta(kPi / 2), std::domain_error);
}

TEST(AngleMapTest, SectorEndpoints) {
  const double phi = deg2rad(22.0), spread = deg2rad(3.5);
  const auto s = theta_sector(phi, spread);
  const double t1 = kPi * std::sin(phi - spread / 2), t2 = kPi * std::sin(phi + spread / 2);
  EXPECT_NEAR(s.mu - s.sigma / 2, t1, 1e-15);
  EXPECT_NEAR(s.mu + s.sigma / 2, t2, 1e-15);
}

TEST(HadamardCcmTest, PointMassIsRankOne) {
  const double mu = 0.7;
  const CVector q = steering_vector(mu, 16);
  EXPECT_LT((hadamard_ccm(mu, 0.0, 16) - q * q.adjoint()).norm(), 1e-14);
}

TEST(HadamardCcmTest, UnitTraceAndHermitian) {
  for (double sigma : {0.01, 0.2, 1.0, 3.0}) {
    const CMatrix r = hadamard_ccm(-0.3, sigma, 40);
    EXPECT_NEAR(r.trace().real(), 1.0, 1e-13);
    EXPECT_TRUE(is_hermitian(r));
    EXPECT_GT(min_eigenvalue(r), -1e-12);
  }
}

TEST(HadamardCcmTest, KernelDiagonalIsOne) {
  for (double sigma : {0.0, 0.3, 2.0}) {
    const RMatrix d = d_kernel(sigma, 12);
    for (int i = 0; i < 12; ++i) EXPECT_DOUBLE_EQ(d(i, i), 1.0);
  }
  EXPECT_TRUE(d_kernel(0.0, 5).isApprox(RMatrix::Ones(5, 5)));
}

TEST(HadamardCcmTest, MatchesQuadratureGroupOneFirstMpc) {
  const auto s = theta_sector(0.0, deg2rad(3.0));
  EXPECT_LT(rel_fro(hadamard_ccm(s.mu, s.sigma, 100), ccm_from_profile_integral(s.mu, s.sigma, 100, 10000)), 1e-8);
}

TEST(HadamardCcmTest, MatchesQuadratureGroupTwoFirstMpc) {
  const auto s = theta_sector(deg2rad(27.5), deg2rad(3.0));
  EXPECT_LT(rel_fro(hadamard_ccm(s.mu, s.sigma, 100), ccm_from_profile_integral(s.mu, s.sigma, 100, 10000)), 1e-8);
}

TEST(HadamardCcmTest, MpcCcmScalesByMass) {
  const CMatrix r = mpc_ccm(deg2rad(9.75), deg2rad(2.5), 1.0 / 3.0, 32);
  EXPECT_NEAR(r.trace().real(), 1.0 / 3.0, 1e-14);
}

TEST(CovarianceTest, NoGroupsIsNoise) {
  ScenarioConfig c;
  c.num_antennas = 8;
  c.noise_power = 0.01;
  EXPECT_TRUE(assemble_ry({}, c).isApprox(0.01 * CMatrix::Identity(8, 8)));
}

TEST(CovarianceTest, SingleMpc) {
  ScenarioConfig c;
  c.num_antennas = 8;
  GroupSpec g;
  g.mpcs = {{10.0, 3.0, 0}};
  g.rf_chains_per_mpc = {1};
  c.groups = {g};
  const auto ccms = nominal_ccms(c);
  const CMatrix expected = ccms[0][0] + 0.001 * CMatrix::Identity(8, 8);
  EXPECT_LT((assemble_ry(ccms, c) - expected).norm(), 1e-15);
  EXPECT_LT((assemble_r_eta(assemble_ry(ccms, c), 0, ccms, c) - 0.001 * CMatrix::Identity(8, 8)).norm(), 1e-15);
}

TEST(CovarianceTest, ReferenceTraceBookkeeping) {
  const auto c = default_table1_scenario();
  const CMatrix ry = assemble_ry(nominal_ccms(c), c);
  // 1*1 + 2*10 + 3*100 + 4*1000 + 100 * 1e-3
  EXPECT_NEAR(ry.trace().real(), 4321.1, 1e-9);
}

TEST(CovarianceTest, InterferenceOfTwoGroups) {
  auto c = small_table1_scenario();
  c.groups.resize(2);
  const auto ccms = nominal_ccms(c);
  const CMatrix expected = 20.0 * group_ccm_sum(ccms[1], 32) + c.noise_power * CMatrix::Identity(32, 32);
  EXPECT_LT((assemble_r_eta(assemble_ry(ccms, c), 0, ccms, c) - expected).norm(), 1e-12);
}

TEST(CovarianceTest, ReferenceInterferenceOfGroupOne) {
  const auto c = default_table1_scenario();
  const auto ccms = nominal_ccms(c);
  const CMatrix ry = assemble_ry(ccms, c);
  EXPECT_LT((assemble_r_eta(ry, 0, ccms, c) - (ry - group_ccm_sum(ccms[0], 100))).norm(), 1e-12);
}

TEST(SamplingTest, ZeroCovarianceGivesZeroChannel) {
  ScenarioConfig c;
  c.num_antennas = 6;
  GroupSpec g;
  g.mpcs = {{0.0, 1.0, 0}};
  g.rf_chains_per_mpc = {1};
  g.num_users = 2;
  c.groups = {g};
  Rng rng = make_rng(3, 0, Stream::kChannel);
  const auto h = sample_channels({{CMatrix::Zero(6, 6)}}, c, rng);
  EXPECT_EQ(h.h[0][0].norm(), 0.0);
}

TEST(SamplingTest, SampleCovarianceOfRankOne) {
  const int n = 8;
  const CVector q = steering_vector(0.9, n);
  const CMatrix r = q * q.adjoint();
  const CMatrix root = psd_sqrt(r);
  Rng rng = make_rng(11, 0, Stream::kChannel);
  const int draws = 100000;
  CMatrix acc = CMatrix::Zero(n, n);
  double energy = 0.0;
  for (int i = 0; i < draws; ++i) {
    const CVector h = root * complex_normal_matrix(n, 1, rng);
    acc += h * h.adjoint();
    energy += h.squaredNorm();
  }
  acc /= draws;
  EXPECT_LT(rel_fro(acc, r), 0.02);
  EXPECT_NEAR(energy / draws, r.trace().real(), 0.02);
}

TEST(SamplingTest, PsdSqrt) {
  const auto c = small_table1_scenario();
  const CMatrix r = nominal_ccms(c)[1][0];
  const CMatrix s = psd_sqrt(r);
  EXPECT_LT((s * s - r).norm(), 1e-12);
  CMatrix bad = CMatrix::Identity(3, 3);
  bad(2, 2) = -1.0;
  EXPECT_THROW(psd_sqrt(bad), NumericalError);
}

TEST(MobilityTest, NoiselessStaysPut) {
  auto c = small_table1_scenario();
  c.mobility_sigma_v_deg = 0.0;
  c.mobility_alpha = 0.9;
  Rng rng = make_rng(1, 0, Stream::kMobility);
  auto s = initial_mpc_state(c.groups[0].mpcs[1]);
  for (int n = 0; n < 50; ++n) {
    s = step_mobility(s, c, rng);
    EXPECT_EQ(s.delta_mu, 0.0);
    EXPECT_EQ(s.mu_phi_true, s.mu_phi_init);
  }
}

TEST(MobilityTest, ArOneStatistics) {
  auto c = small_table1_scenario();
  c.mobility_alpha = 0.9;
  c.mobility_sigma_v_deg = 3.0;
  Rng rng = make_rng(5, 0, Stream::kMobility);
  auto s = initial_mpc_state(c.groups[0].mpcs[0]);
  for (int n = 0; n < 200; ++n) s = step_mobility(s, c, rng);
  const int steps = 100000;
  std::vector<double> x(steps);
  for (int n = 0; n < steps; ++n) {
    s = step_mobility(s, c, rng);
    x[n] = s.delta_mu;
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= steps;
  double var = 0.0, cov = 0.0;
  for (int n = 0; n < steps; ++n) var += (x[n] - mean) * (x[n] - mean);
  for (int n = 1; n < steps; ++n) cov += (x[n] - mean) * (x[n - 1] - mean);
  EXPECT_NEAR(cov / var, 0.9, 0.01);
  const double sv = deg2rad(3.0);
  EXPECT_NEAR(var / steps / (sv * sv), 1.0, 0.05);
}

TEST(AoaTest, ZeroErrorIsExact) {
  auto c = small_table1_scenario();
  c.aoa_error_std_deg = 0.0;
  Rng rng = make_rng(2, 0, Stream::kAoaError);
  const auto s = initial_mpc_state(c.groups[0].mpcs[2]);
  EXPECT_EQ(observe_aoa(s, c, rng), s.mu_phi_true);
}

TEST(AoaTest, ErrorStd) {
  auto c = small_table1_scenario();
  c.aoa_error_std_deg = 2.0;
  Rng rng = make_rng(2, 0, Stream::kAoaError);
  const auto s = initial_mpc_state(c.groups[0].mpcs[2]);
  const int draws = 100000;
  double m = 0.0, m2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double e = observe_aoa(s, c, rng) - s.mu_phi_true;
    m += e;
    m2 += e * e;
  }
  m /= draws;
  const double sd = std::sqrt(m2 / draws - m * m);
  EXPECT_NEAR(sd / deg2rad(2.0), 1.0, 0.01);
}

TEST(SymbolTest, ConstantModulus) {
  const auto c = default_table1_scenario();
  Rng rng = make_rng(4, 0, Stream::kSymbols);
  const CMatrix x = generate_symbols(c, 3, 200, rng);
  ASSERT_EQ(x.rows(), 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) EXPECT_NEAR(std::norm(x(i)), 1000.0, 1e-9);
  EXPECT_THROW(generate_symbols(c, 0, 0, rng), std::invalid_argument);
}

TEST(SymbolTest, WhiteAndUncorrelatedAcrossUsers) {
  auto c = default_table1_scenario();
  Rng rng = make_rng(4, 1, Stream::kSymbols);
  const int count = 100000;
  const CMatrix x = generate_symbols(c, 1, count, rng);
  const double es = c.groups[1].symbol_energy;
  cdouble lag1 = 0.0, cross = 0.0;
  for (int t = 0; t < count; ++t) {
    if (t > 0) lag1 += x(0, t) * std::conj(x(0, t - 1));
    cross += x(0, t) * std::conj(x(1, t));
  }
  EXPECT_LT(std::abs(lag1) / (count * es), 0.01);
  EXPECT_LT(std::abs(cross) / (count * es), 0.01);
}

TEST(RngTest, StreamsAreReproducibleAndDistinct) {
  Rng a = make_rng(7, 3, Stream::kNoise), b = make_rng(7, 3, Stream::kNoise);
  Rng c = make_rng(7, 3, Stream::kSymbols), d = make_rng(7, 4, Stream::kNoise);
  const auto va = a(), vb = b(), vc = c(), vd = d();
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
  EXPECT_NE(va, vd);
}

TEST(BuildCcmsTest, ClampsExtremeCenters) {
  const auto c = small_table1_scenario();
  std::vector<std::vector<double>> centers(c.groups.size());
  for (std::size_t g = 0; g < c.groups.size(); ++g)
    for (std::size_t m = 0; m < c.groups[g].mpcs.size(); ++m) centers[g].push_back(deg2rad(120.0));
  const auto ccms = build_ccms(c, centers);
  for (const auto& g : ccms)
    for (const auto& r : g) EXPECT_TRUE(r.allFinite());
}

}  // namespace
}  // namespace slowbeam
