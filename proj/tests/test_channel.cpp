// Copyright 2026 The vstmimo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <complex>

#include <gtest/gtest.h>

#include "vstmimo/channel.hpp"

using namespace vstmimo;

namespace {

Eigen::MatrixXcd real2(double a, double b, double c, double d) {
  Eigen::MatrixXcd m(2, 2);
  m << a, b, c, d;
  return m;
}

// Independent construction of R_T^T (x) R_R by index arithmetic.
std::complex<double> kron_entry(const Eigen::MatrixXcd& rt, const Eigen::MatrixXcd& rr, Eigen::Index i, Eigen::Index j) {
  const Eigen::Index nr = rr.rows();
  return rt(j / nr, i / nr) * rr(i % nr, j % nr);
}

ChannelRealization identity_channel(std::size_t n, double noise) {
  ChannelRealization r;
  r.h.push_back(Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  r.noise_power = noise;
  return r;
}

}  // namespace

TEST(Kronecker, EmpiricalCovarianceMatchesModel) {
  KroneckerSpec spec{real2(1, 0.2, 0.2, 1), real2(1, 0.5, 0.5, 1)};
  Rng rng(11);
  const int n = 100000;
  Eigen::Matrix4cd acc = Eigen::Matrix4cd::Zero();
  for (int k = 0; k < n; ++k) {
    const auto h = sample_kronecker(spec, 1, rng).h[0];
    Eigen::Vector4cd v;
    v << h(0, 0), h(1, 0), h(0, 1), h(1, 1);  // column-major vec
    acc += v * v.adjoint();
  }
  acc /= n;
  double worst = 0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(acc(i, j) - kron_entry(spec.r_tx, spec.r_rx, i, j)));
  EXPECT_LT(worst, 0.02);
}

TEST(Kronecker, IdentityCovarianceGivesIidEntries) {
  KroneckerSpec spec{Eigen::MatrixXcd::Identity(3, 3), Eigen::MatrixXcd::Identity(2, 2)};
  Rng rng(3);
  double power = 0, cross = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const auto h = sample_kronecker(spec, 1, rng).h[0];
    power += std::norm(h(0, 0));
    cross += (h(0, 0) * std::conj(h(1, 2))).real();
  }
  EXPECT_NEAR(power / n, 1.0, 0.03);
  EXPECT_NEAR(cross / n, 0.0, 0.03);
}

TEST(Kronecker, RejectsInvalidCovariance) {
  Rng rng(1);
  EXPECT_THROW(sample_kronecker({real2(1, 0.3, 0.1, 1), real2(1, 0, 0, 1)}, 1, rng), ValidationError);
  EXPECT_THROW(sample_kronecker({real2(1, 2, 2, 1), real2(1, 0, 0, 1)}, 1, rng), ValidationError);
  EXPECT_THROW(sample_kronecker({real2(1, 0, 0, 1), real2(1, 0, 0, 1)}, 0, rng), ValidationError);
}

TEST(Wideband, UnitGainAndFrequencyCorrelation) {
  Rng rng(5);
  const std::size_t n_c = 16;
  const auto profile = uniform_profile(4);
  double power = 0, adj = 0;
  const int n = 4000;
  for (int k = 0; k < n; ++k) {
    const auto r = sample_wideband_rayleigh(n_c, 2, 2, profile, rng);
    ASSERT_EQ(r.n_c(), n_c);
    power += std::norm(r.h[3](1, 0));
    adj += (r.h[3](1, 0) * std::conj(r.h[4](1, 0))).real();
  }
  EXPECT_NEAR(power / n, 1.0, 0.05);
  // Oracle: E[H_c H_{c+1}^*] = sum_k p_k exp(2 pi i k / N_c), real part.
  double expect = 0;
  for (int k = 0; k < 4; ++k) expect += 0.25 * std::cos(2 * M_PI * k / n_c);
  EXPECT_NEAR(adj / n, expect, 0.05);
}

TEST(Wideband, SingleTapIsFlat) {
  Rng rng(2);
  const std::vector<double> one{1.0};
  const auto r = sample_wideband_rayleigh(8, 2, 2, one, rng);
  for (std::size_t c = 1; c < 8; ++c) EXPECT_LT((r.h[c] - r.h[0]).norm(), 1e-12);
  EXPECT_THROW(sample_wideband_rayleigh(2, 2, 2, uniform_profile(4), rng), ValidationError);
}

TEST(ZeroForcing, NoiselessRecovery) {
  Rng rng(9);
  for (std::size_t n : {2u, 4u}) {
    KroneckerSpec spec{Eigen::MatrixXcd::Identity(n, n), Eigen::MatrixXcd::Identity(n, n)};
    double worst = 0;
    for (int k = 0; k < 10000; ++k) {
      auto r = sample_kronecker(spec, 1, rng);
      Eigen::MatrixXcd s(1, n);
      for (std::size_t t = 0; t < n; ++t) s(0, t) = complex_normal(rng);
      const auto [hat, rep] = zf_detect(r, propagate(r, s));
      worst = std::max(worst, (hat - s).norm() / s.norm());
    }
    EXPECT_LT(worst, 1e-9) << n << "x" << n;
  }
}

TEST(ZeroForcing, IdentityChannelSinr) {
  auto r = identity_channel(2, 0.1);
  const auto rep = ZeroForcing(r, 2).cqi();
  for (int t = 0; t < 2; ++t) {
    EXPECT_NEAR(rep.per_stream_sinr[t], 10.0, 1e-9);
    EXPECT_NEAR(rep.per_stream_capacity[t], std::log2(11.0), 1e-9);
  }
}

TEST(ZeroForcing, CapacityMatchesDirectInverse) {
  Rng rng(4);
  KroneckerSpec spec{real2(1, 0.2, 0.2, 1), real2(1, 0.5, 0.5, 1)};
  auto r = sample_kronecker(spec, 3, rng);
  r.noise_power = 0.05;
  const auto rep = ZeroForcing(r, 2).cqi();
  for (int t = 0; t < 2; ++t) {
    double acc = 0;
    for (int c = 0; c < 3; ++c) {
      const Eigen::MatrixXcd g = (r.h[c].adjoint() * r.h[c]).inverse();
      acc += std::log2(1.0 + 1.0 / (0.05 * g(t, t).real()));
    }
    EXPECT_NEAR(rep.per_stream_capacity[t], acc / 3, 1e-10);
  }
}

TEST(ZeroForcing, RankDeficientChannelNamesSubcarrier) {
  auto r = identity_channel(2, 0.1);
  r.h.push_back(Eigen::MatrixXcd::Ones(2, 2));
  try {
    ZeroForcing zf(r, 2);
    FAIL() << "expected DetectionError";
  } catch (const DetectionError& e) {
    EXPECT_EQ(e.subcarrier(), 1u);
  }
}

TEST(ZeroForcing, FewerStreamsThanAntennas) {
  Rng rng(8);
  KroneckerSpec spec{Eigen::MatrixXcd::Identity(4, 4), Eigen::MatrixXcd::Identity(4, 4)};
  auto r = sample_kronecker(spec, 1, rng);
  Eigen::MatrixXcd s(1, 2);
  s << cplx(1, 2), cplx(-0.5, 0.25);
  const auto [hat, rep] = zf_detect(r, propagate(r, s), 2);
  EXPECT_LT((hat - s).norm(), 1e-9);
  EXPECT_EQ(rep.per_stream_capacity.size(), 2u);
}

TEST(Cqi, NearestLevelTiesAndSaturation) {
  const std::vector<double> lv{0.5, 1, 1.5, 2, 3, 4, 5, 6};
  EXPECT_EQ(quantize_cqi(1.2, lv).first, 1u);
  EXPECT_EQ(quantize_cqi(1.25, lv).first, 1u);  // tie -> smaller
  EXPECT_EQ(quantize_cqi(0.0, lv).first, 0u);
  EXPECT_EQ(quantize_cqi(7.0, lv).first, 7u);
  EXPECT_EQ(quantize_cqi(std::numeric_limits<double>::infinity(), lv).first, 7u);
  EXPECT_THROW(quantize_cqi(std::nan(""), lv), ValidationError);
  const std::vector<double> bad{1, 1};
  EXPECT_THROW(quantize_cqi(1.0, bad), ValidationError);
}

TEST(Channel, ApplyChannelAddsNoiseOfConfiguredPower) {
  auto r = identity_channel(2, 0.25);
  Rng rng(6);
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(1, 2);
  double p = 0;
  for (int k = 0; k < 20000; ++k) p += apply_channel(r, s, rng).squaredNorm();
  EXPECT_NEAR(p / 20000 / 2, 0.25, 0.01);
  EXPECT_THROW(propagate(r, Eigen::MatrixXcd::Zero(2, 2)), ValidationError);
}
