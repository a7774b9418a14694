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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "vstmimo/codec.hpp"
#include "vstmimo/common.hpp"

namespace vstmimo {

inline constexpr double kPsnrCapDb = 100.0;

inline double mse(const Image& x, const Image& x_hat) {
  require(x.same_shape(x_hat), "mse: shape mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x.data[k] - x_hat.data[k];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

/// 10 log10(peak² / MSE), capped at 100 dB.
inline double psnr_from_mse(double mse_value, double peak = 1.0) {
  if (mse_value <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse_value));
}

inline double psnr(const Image& x, const Image& x_hat, double peak = 1.0) { return psnr_from_mse(mse(x, x_hat), peak); }

namespace msssim {

inline constexpr int kWindow = 11;
inline constexpr double kSigma = 1.5;
inline constexpr double kK1 = 0.01;
inline constexpr double kK2 = 0.03;
inline constexpr std::array<double, 5> kWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Single-channel plane, row-major.
struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    sum += g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  for (auto& x : g) x /= sum;
  return g;
}

/// Separable "valid" Gaussian filtering.
inline Plane filter_valid(const Plane& p) {
  static const auto g = gaussian_kernel();
  Plane tmp{p.h, p.w - kWindow + 1, {}};
  tmp.v.assign(static_cast<std::size_t>(tmp.h) * tmp.w, 0.0);
  for (int y = 0; y < tmp.h; ++y)
    for (int x = 0; x < tmp.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * p.at(y, x + k);
      tmp.v[static_cast<std::size_t>(y) * tmp.w + x] = acc;
    }
  Plane out{p.h - kWindow + 1, tmp.w, {}};
  out.v.assign(static_cast<std::size_t>(out.h) * out.w, 0.0);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[static_cast<std::size_t>(k)] * tmp.at(y + k, x);
      out.v[static_cast<std::size_t>(y) * out.w + x] = acc;
    }
  return out;
}

inline Plane downsample(const Plane& p) {
  Plane out{p.h / 2, p.w / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y + 1, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x + 1));
  return out;
}

/// Mean SSIM and mean contrast-structure term at one scale.
inline std::pair<double, double> ssim_cs(const Plane& a, const Plane& b, double data_range) {
  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);
  Plane aa = a, bb = b, ab = a;
  for (std::size_t k = 0; k < a.v.size(); ++k) {
    aa.v[k] = a.v[k] * a.v[k];
    bb.v[k] = b.v[k] * b.v[k];
    ab.v[k] = a.v[k] * b.v[k];
  }
  const Plane mu_a = filter_valid(a), mu_b = filter_valid(b);
  const Plane e_aa = filter_valid(aa), e_bb = filter_valid(bb), e_ab = filter_valid(ab);
  double ssim_sum = 0.0, cs_sum = 0.0;
  for (std::size_t k = 0; k < mu_a.v.size(); ++k) {
    const double ma = mu_a.v[k], mb = mu_b.v[k];
    const double va = e_aa.v[k] - ma * ma, vb = e_bb.v[k] - mb * mb, cov = e_ab.v[k] - ma * mb;
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    cs_sum += cs;
    ssim_sum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1) * cs;
  }
  const auto n = static_cast<double>(mu_a.v.size());
  return {ssim_sum / n, cs_sum / n};
}

}  // namespace msssim

/// Number of scales supported by an image whose smaller side is `side`.
inline int ms_ssim_scales(int side) {
  int scales = 0;
  while (scales < 5 && (side >> scales) >= msssim::kWindow) ++scales;
  return scales;
}

/// Multi-scale SSIM averaged over channels. Uses fewer than five scales for
/// small images, with the standard weights renormalized.
inline double ms_ssim(const Image& x, const Image& x_hat, double data_range = 1.0) {
  require(x.same_shape(x_hat), "ms_ssim: shape mismatch");
  const int scales = ms_ssim_scales(std::min(x.height, x.width));
  require(scales >= 1, "ms_ssim: image too small for an 11x11 window");
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += msssim::kWeights[static_cast<std::size_t>(s)];

  double total = 0.0;
  for (int ch = 0; ch < x.channels; ++ch) {
    msssim::Plane a{x.height, x.width, {}}, b{x.height, x.width, {}};
    a.v.resize(static_cast<std::size_t>(x.height) * x.width);
    b.v.resize(a.v.size());
    for (int y = 0; y < x.height; ++y)
      for (int q = 0; q < x.width; ++q) {
        a.v[static_cast<std::size_t>(y) * x.width + q] = x.at(y, q, ch);
        b.v[static_cast<std::size_t>(y) * x.width + q] = x_hat.at(y, q, ch);
      }
    double value = 1.0;
    for (int s = 0; s < scales; ++s) {
      const auto [ssim, cs] = msssim::ssim_cs(a, b, data_range);
      const double w = msssim::kWeights[static_cast<std::size_t>(s)] / wsum;
      const double term = s + 1 == scales ? ssim : cs;
      value *= std::pow(std::max(term, 0.0), w);
      if (s + 1 < scales) {
        a = msssim::downsample(a);
        b = msssim::downsample(b);
      }
    }
    total += value;
  }
  return std::clamp(total / x.channels, 0.0, 1.0);
}

}  // namespace vstmimo
