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

// Conditional Gaussian and factorized logistic entropy models over unit
// integer bins, proxy/hard quantization and ideal side-information accounting.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

#include "vstmimo/common.hpp"

namespace vstmimo {

inline constexpr double kSigmaMin = 1e-6;

/// Per-element mean and scale of the conditional Gaussian (c x l, like the latent).
struct GaussianParams {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd sigma;

  GaussianParams() = default;
  GaussianParams(Eigen::MatrixXd m, Eigen::MatrixXd s) : mu(std::move(m)), sigma(std::move(s)) {
    require(mu.rows() == sigma.rows() && mu.cols() == sigma.cols(), "gaussian params: mu/sigma shape mismatch");
    sigma = sigma.cwiseMax(kSigmaMin);
  }
};

/// Per-channel logistic location-scale prior for the hyperlatent.
struct FactorizedPrior {
  Eigen::VectorXd loc;
  Eigen::VectorXd scale;

  void validate() const {
    require(loc.size() == scale.size(), "factorized prior: loc/scale length mismatch");
    require((scale.array() > 0.0).all(), "factorized prior: scale must be > 0");
  }
};

/// NLL in bits of one bin together with its partial derivatives.
struct BinNll {
  double bits = 0.0;
  double d_value = 0.0;
  double d_loc = 0.0;
  double d_scale = 0.0;
};

namespace detail {

inline constexpr double kLn2 = std::numbers::ln2;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2π))

/// log Φ(x) for x <= 0, asymptotic beyond the range of erfc.
inline double log_ndtr_lower(double x) {
  if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - kLogSqrt2Pi + std::log1p(-1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2));
}

inline double log_npdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(Φ(b) - Φ(a)) with derivatives, for a < b and a + b <= 0.
inline void log_gauss_mass(double a, double b, double& logp, double& dlogp_da, double& dlogp_db) {
  if (b < -6.0) {
    const double la = log_ndtr_lower(a);
    const double lb = log_ndtr_lower(b);
    logp = lb + std::log(-std::expm1(la - lb));
  } else {
    const double p = 0.5 * std::erfc(-b / std::numbers::sqrt2) - 0.5 * std::erfc(-a / std::numbers::sqrt2);
    logp = std::log(std::max(p, std::numeric_limits<double>::min()));
  }
  dlogp_db = std::exp(log_npdf(b) - logp);
  dlogp_da = -std::exp(log_npdf(a) - logp);
}

/// log(F(b) - F(a)) for the logistic CDF F, a < b and a + b <= 0.
inline void log_logistic_mass(double a, double b, double& logp, double& dlogp_da, double& dlogp_db) {
  logp = b + std::log(-std::expm1(a - b)) - softplus(a) - softplus(b);
  const double r = 1.0 / std::expm1(b - a);
  dlogp_db = 1.0 + r - sigmoid(b);
  dlogp_da = -r - sigmoid(a);
}

template <class MassFn>
inline BinNll bin_nll(double value, double loc, double scale, MassFn mass) {
  const double d = value - loc;
  const double lo = (d - 0.5) / scale;
  const double hi = (d + 0.5) / scale;
  double logp = 0.0, g_lo = 0.0, g_hi = 0.0;
  if (d > 0.0) {
    // Reflect into the lower tail: mass(lo, hi) = mass(-hi, -lo) for symmetric densities.
    double ga = 0.0, gb = 0.0;
    mass(-hi, -lo, logp, ga, gb);
    g_lo = -gb;
    g_hi = -ga;
  } else {
    mass(lo, hi, logp, g_lo, g_hi);
  }
  BinNll out;
  out.bits = std::max(0.0, -logp / kLn2);
  // d(bits)/d(lo), d(bits)/d(hi)
  const double b_lo = -g_lo / kLn2;
  const double b_hi = -g_hi / kLn2;
  out.d_value = (b_lo + b_hi) / scale;
  out.d_loc = -out.d_value;
  out.d_scale = -(b_lo * lo + b_hi * hi) / scale;
  return out;
}

}  // namespace detail

/// v + o with o ~ U(-1/2, 1/2) i.i.d.
inline Eigen::MatrixXd proxy_quantize(const Eigen::MatrixXd& v, Rng& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Eigen::MatrixXd out = v;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) += u(rng);
  return out;
}

/// Round half away from zero.
inline Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> hard_quantize(const Eigen::MatrixXd& v) {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> out(v.rows(), v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) out(i, j) = static_cast<std::int64_t>(std::round(v(i, j)));
  return out;
}

inline Eigen::MatrixXd hard_quantize_real(const Eigen::MatrixXd& v) { return v.array().round().matrix(); }

/// -log2 P(bin around y) under N(mu, sigma²) convolved with U(-1/2, 1/2), with gradients.
inline BinNll gaussian_bin_nll(double y, double mu, double sigma) {
  return detail::bin_nll(y, mu, std::max(sigma, kSigmaMin), detail::log_gauss_mass);
}

/// Same for the logistic location-scale density.
inline BinNll logistic_bin_nll(double z, double loc, double scale) {
  return detail::bin_nll(z, loc, scale, detail::log_logistic_mass);
}

/// Elementwise bits for a latent tensor.
inline Eigen::MatrixXd discretized_gaussian_nll(const Eigen::MatrixXd& y, const GaussianParams& params) {
  require(y.rows() == params.mu.rows() && y.cols() == params.mu.cols(), "gaussian nll: shape mismatch");
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      out(i, j) = gaussian_bin_nll(y(i, j), params.mu(i, j), params.sigma(i, j)).bits;
  return out;
}

/// Bits of one c-dimensional patch.
inline double patch_nll(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& mu,
                        const Eigen::Ref<const Eigen::VectorXd>& sigma) {
  require(y.size() == mu.size() && y.size() == sigma.size(), "patch nll: length mismatch");
  double bits = 0.0;
  for (Eigen::Index k = 0; k < y.size(); ++k) bits += gaussian_bin_nll(y(k), mu(k), sigma(k)).bits;
  return bits;
}

/// Column sums of the elementwise bits: one entry per patch.
inline Eigen::VectorXd patch_nlls(const Eigen::MatrixXd& y, const GaussianParams& params) {
  return discretized_gaussian_nll(y, params).colwise().sum().transpose();
}

/// Total bits of a hyperlatent (c_z x l) under the per-channel logistic prior.
inline double factorized_nll(const Eigen::MatrixXd& z, const FactorizedPrior& prior) {
  prior.validate();
  require(z.rows() == prior.loc.size(), "factorized nll: channel count mismatch");
  double bits = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) bits += logistic_bin_nll(z(i, j), prior.loc(i), prior.scale(i)).bits;
  return bits;
}

/// k_z = bits / C_z channel symbols (ideal entropy coding over a digital link).
inline double side_info_rate(double z_nll_bits, double c_z) {
  require(c_z > 0.0, "side_info_rate: C_z must be > 0");
  return z_nll_bits / c_z;
}

}  // namespace vstmimo
