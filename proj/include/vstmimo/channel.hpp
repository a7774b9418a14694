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

// MIMO fading channel generation, per-subcarrier transmission and
// zero-forcing detection with post-detection CQI.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vstmimo/common.hpp"

namespace vstmimo {

/// Frequency-domain channel tensor H (N_c x N_r x N_t) and noise power.
struct ChannelRealization {
  std::vector<Eigen::MatrixXcd> h;  // one N_r x N_t matrix per subcarrier
  double noise_power = 0.0;

  std::size_t n_c() const { return h.size(); }
  std::size_t n_r() const { return h.empty() ? 0 : static_cast<std::size_t>(h.front().rows()); }
  std::size_t n_t() const { return h.empty() ? 0 : static_cast<std::size_t>(h.front().cols()); }

  void validate() const {
    require(!h.empty(), "channel: N_c must be >= 1");
    require(n_r() >= 1 && n_t() >= 1, "channel: N_r and N_t must be >= 1");
    require(std::isfinite(noise_power) && noise_power >= 0.0, "channel: noise power must be finite and >= 0");
    for (const auto& m : h) {
      require(static_cast<std::size_t>(m.rows()) == n_r() && static_cast<std::size_t>(m.cols()) == n_t(),
              "channel: inconsistent subcarrier matrix shape");
      require(m.allFinite(), "channel: non-finite channel gain");
    }
  }
};

/// Transmit/receive correlation matrices of the Kronecker model.
struct KroneckerSpec {
  Eigen::MatrixXcd r_tx;
  Eigen::MatrixXcd r_rx;

  void validate() const {
    check_covariance(r_tx, "r_tx");
    check_covariance(r_rx, "r_rx");
  }

  static void check_covariance(const Eigen::MatrixXcd& r, const char* name) {
    require(r.rows() >= 1 && r.rows() == r.cols(), std::string("kronecker: ") + name + " must be square");
    require(r.allFinite(), std::string("kronecker: ") + name + " has non-finite entries");
    require((r - r.adjoint()).cwiseAbs().maxCoeff() <= 1e-12,
            std::string("kronecker: ") + name + " is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -1e-12,
            std::string("kronecker: ") + name + " is not positive semidefinite");
  }
};

/// Per-stream post-detection quality.
struct CqiReport {
  // Effective SINR, 2^C_t - 1, so that capacity = log2(1 + sinr) holds exactly.
  std::vector<double> per_stream_sinr;
  std::vector<double> per_stream_capacity;  // bits per complex symbol
  std::vector<std::size_t> quantized_cqi;   // empty until quantized
  Eigen::MatrixXd subcarrier_sinr;          // N_c x N_s, linear
};

/// Hermitian PSD square root with negative eigenvalues clamped to zero.
inline Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& r) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// H_c = R_rx^{1/2} G_c R_tx^{1/2}, G_c i.i.d. CN(0,1), independently per subcarrier.
inline ChannelRealization sample_kronecker(const KroneckerSpec& spec, std::size_t n_c, Rng& rng) {
  spec.validate();
  require(n_c >= 1, "kronecker: n_c must be >= 1");
  const Eigen::MatrixXcd sq_tx = psd_sqrt(spec.r_tx);
  const Eigen::MatrixXcd sq_rx = psd_sqrt(spec.r_rx);
  const auto nr = spec.r_rx.rows();
  const auto nt = spec.r_tx.rows();
  ChannelRealization out;
  out.h.reserve(n_c);
  Eigen::MatrixXcd g(nr, nt);
  for (std::size_t c = 0; c < n_c; ++c) {
    for (Eigen::Index j = 0; j < nt; ++j)
      for (Eigen::Index i = 0; i < nr; ++i) g(i, j) = complex_normal(rng);
    out.h.push_back(sq_rx * g * sq_tx);
  }
  return out;
}

inline std::vector<double> uniform_profile(std::size_t n_taps) {
  return std::vector<double>(n_taps, 1.0 / static_cast<double>(n_taps));
}

/// Exponentially decaying power-delay profile p_k ∝ exp(-k / decay), normalized.
inline std::vector<double> exponential_profile(std::size_t n_taps, double decay) {
  require(decay > 0.0, "exponential profile: decay must be > 0");
  std::vector<double> p(n_taps);
  double sum = 0.0;
  for (std::size_t k = 0; k < n_taps; ++k) sum += p[k] = std::exp(-static_cast<double>(k) / decay);
  for (auto& v : p) v /= sum;
  return p;
}

/// Tapped-delay-line Rayleigh channel taken to the frequency domain by an n_c-point DFT.
inline ChannelRealization sample_wideband_rayleigh(std::size_t n_c, std::size_t n_r, std::size_t n_t,
                                                   std::span<const double> power_profile, Rng& rng) {
  const std::size_t n_taps = power_profile.size();
  require(n_c >= 1 && n_r >= 1 && n_t >= 1, "wideband: dimensions must be >= 1");
  require(n_taps >= 1 && n_taps <= n_c, "wideband: need 1 <= n_taps <= n_c");
  double total = 0.0;
  for (double p : power_profile) {
    require(std::isfinite(p) && p >= 0.0, "wideband: power profile entries must be >= 0");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, "wideband: power profile must sum to 1");

  ChannelRealization out;
  out.h.assign(n_c, Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n_r), static_cast<Eigen::Index>(n_t)));
  Eigen::FFT<double> fft;
  std::vector<cplx> taps(n_c), freq;
  for (std::size_t j = 0; j < n_t; ++j) {
    for (std::size_t i = 0; i < n_r; ++i) {
      std::fill(taps.begin(), taps.end(), cplx{});
      for (std::size_t k = 0; k < n_taps; ++k) taps[k] = complex_normal(rng, power_profile[k]);
      fft.fwd(freq, taps);
      for (std::size_t c = 0; c < n_c; ++c)
        out.h[c](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = freq[c];
    }
  }
  return out;
}

/// Noise-free part of the channel: rows are subcarriers, s is N_c x N_s on the
/// first N_s transmit antennas (identity stream-to-antenna mapping).
inline Eigen::MatrixXcd propagate(const ChannelRealization& real, const Eigen::MatrixXcd& s) {
  require(static_cast<std::size_t>(s.rows()) == real.n_c(), "apply_channel: symbol rows must equal N_c");
  require(s.cols() >= 1 && static_cast<std::size_t>(s.cols()) <= std::min(real.n_t(), real.n_r()),
          "apply_channel: stream count must be in [1, min(N_t, N_r)]");
  require(s.allFinite(), "apply_channel: non-finite symbols");
  const Eigen::Index ns = s.cols();
  Eigen::MatrixXcd y(s.rows(), static_cast<Eigen::Index>(real.n_r()));
  for (std::size_t c = 0; c < real.n_c(); ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    y.row(ci) = (real.h[c].leftCols(ns) * s.row(ci).transpose()).transpose();
  }
  return y;
}

/// ŝ_c = H_c s_c + n_c with caller-supplied noise (N_c x N_r).
inline Eigen::MatrixXcd apply_channel(const ChannelRealization& real, const Eigen::MatrixXcd& s,
                                      const Eigen::MatrixXcd& noise) {
  Eigen::MatrixXcd y = propagate(real, s);
  require(noise.rows() == y.rows() && noise.cols() == y.cols(), "apply_channel: noise shape mismatch");
  return y + noise;
}

/// ŝ_c = H_c s_c + n_c, n_c ~ CN(0, σ_n² I).
inline Eigen::MatrixXcd apply_channel(const ChannelRealization& real, const Eigen::MatrixXcd& s, Rng& rng) {
  Eigen::MatrixXcd y = propagate(real, s);
  for (Eigen::Index c = 0; c < y.rows(); ++c)
    for (Eigen::Index j = 0; j < y.cols(); ++j) y(c, j) += complex_normal(rng, real.noise_power);
  return y;
}

/// Nearest CQI level; ties go to the smaller level.
inline std::pair<std::size_t, double> quantize_cqi(double capacity, std::span<const double> levels) {
  require(!levels.empty(), "quantize_cqi: empty level set");
  for (std::size_t i = 1; i < levels.size(); ++i)
    require(levels[i] > levels[i - 1], "quantize_cqi: levels must be strictly increasing");
  require(!std::isnan(capacity), "quantize_cqi: capacity is NaN");
  if (capacity >= levels.back()) return {levels.size() - 1, levels.back()};
  std::size_t best = 0;
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (std::abs(capacity - levels[i]) < std::abs(capacity - levels[best])) best = i;
  }
  return {best, levels[best]};
}

/// Zero-forcing equalizer for one realization; reusable across OFDM symbols.
class ZeroForcing {
 public:
  static constexpr double kMaxCondition = 1e12;

  ZeroForcing(const ChannelRealization& real, std::size_t n_s) : noise_power_(real.noise_power) {
    real.validate();
    require(n_s >= 1 && n_s <= std::min(real.n_t(), real.n_r()), "zf: stream count must be in [1, min(N_t, N_r)]");
    const auto ns = static_cast<Eigen::Index>(n_s);
    w_.reserve(real.n_c());
    gram_inv_diag_ = Eigen::MatrixXd(static_cast<Eigen::Index>(real.n_c()), ns);
    for (std::size_t c = 0; c < real.n_c(); ++c) {
      const Eigen::MatrixXcd heff = real.h[c].leftCols(ns);
      const Eigen::MatrixXcd gram = heff.adjoint() * heff;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      // cond(H) = sqrt(cond(H^H H))
      if (!(lo > 0.0) || std::sqrt(hi / lo) >= kMaxCondition) {
        throw DetectionError(c, "zf: channel on subcarrier " + std::to_string(c) + " is rank deficient");
      }
      const Eigen::MatrixXcd ginv = gram.inverse();
      w_.push_back(ginv * heff.adjoint());
      gram_inv_diag_.row(static_cast<Eigen::Index>(c)) = ginv.diagonal().real().transpose();
      a_.push_back(w_.back() * heff);
    }
  }

  std::size_t n_c() const { return w_.size(); }
  std::size_t n_s() const { return static_cast<std::size_t>(gram_inv_diag_.cols()); }

  /// (H^H H)^{-1} H^H for subcarrier c.
  const Eigen::MatrixXcd& equalizer(std::size_t c) const { return w_[c]; }
  /// Effective end-to-end map W_c H_c (identity up to rounding).
  const Eigen::MatrixXcd& effective(std::size_t c) const { return a_[c]; }

  /// received: N_c x N_r -> N_c x N_s
  Eigen::MatrixXcd detect(const Eigen::MatrixXcd& received) const {
    require(static_cast<std::size_t>(received.rows()) == n_c(), "zf: received rows must equal N_c");
    require(received.cols() == w_.front().cols(), "zf: received columns must equal N_r");
    Eigen::MatrixXcd out(received.rows(), static_cast<Eigen::Index>(n_s()));
    for (std::size_t c = 0; c < n_c(); ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      out.row(ci) = (w_[c] * received.row(ci).transpose()).transpose();
    }
    return out;
  }

  /// SINR_{c,t} = 1 / (σ_n² [(H^H H)^{-1}]_tt); capacity averaged over subcarriers.
  CqiReport cqi(std::span<const double> cqi_levels = {}) const {
    CqiReport rep;
    const auto nc = gram_inv_diag_.rows();
    const auto ns = gram_inv_diag_.cols();
    rep.subcarrier_sinr.resize(nc, ns);
    rep.per_stream_capacity.assign(static_cast<std::size_t>(ns), 0.0);
    for (Eigen::Index t = 0; t < ns; ++t) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < nc; ++c) {
        const double sinr = noise_power_ > 0.0 ? 1.0 / (noise_power_ * gram_inv_diag_(c, t))
                                               : std::numeric_limits<double>::infinity();
        rep.subcarrier_sinr(c, t) = sinr;
        acc += std::log2(1.0 + sinr);
      }
      rep.per_stream_capacity[static_cast<std::size_t>(t)] = acc / static_cast<double>(nc);
    }
    for (double cap : rep.per_stream_capacity) rep.per_stream_sinr.push_back(std::exp2(cap) - 1.0);
    if (!cqi_levels.empty()) {
      for (double cap : rep.per_stream_capacity) rep.quantized_cqi.push_back(quantize_cqi(cap, cqi_levels).first);
    }
    return rep;
  }

 private:
  double noise_power_;
  std::vector<Eigen::MatrixXcd> w_;
  std::vector<Eigen::MatrixXcd> a_;
  Eigen::MatrixXd gram_inv_diag_;
};

/// Per-subcarrier ZF detection of one OFDM symbol plus the resulting CQI report.
inline std::pair<Eigen::MatrixXcd, CqiReport> zf_detect(const ChannelRealization& real,
                                                        const Eigen::MatrixXcd& received,
                                                        std::size_t n_s = 0,
                                                        std::span<const double> cqi_levels = {}) {
  if (n_s == 0) n_s = std::min(real.n_t(), real.n_r());
  ZeroForcing zf(real, n_s);
  return {zf.detect(received), zf.cqi(cqi_levels)};
}

/// Configured channel family; draws one realization at a given noise power.
struct ChannelModel {
  enum class Kind { kKronecker, kWideband };

  Kind kind = Kind::kKronecker;
  std::size_t n_c = 1;
  std::size_t n_r = 2;
  std::size_t n_t = 2;
  KroneckerSpec kronecker{};
  std::vector<double> power_profile = uniform_profile(8);

  static ChannelModel reference_kronecker() {
    ChannelModel m;
    m.kronecker.r_tx = Eigen::MatrixXcd(2, 2);
    m.kronecker.r_tx << 1.0, 0.2, 0.2, 1.0;
    m.kronecker.r_rx = Eigen::MatrixXcd(2, 2);
    m.kronecker.r_rx << 1.0, 0.5, 0.5, 1.0;
    return m;
  }

  void validate() const {
    require(n_c >= 1 && n_r >= 1 && n_t >= 1, "channel model: dimensions must be >= 1");
    if (kind == Kind::kKronecker) {
      kronecker.validate();
      require(static_cast<std::size_t>(kronecker.r_tx.rows()) == n_t && static_cast<std::size_t>(kronecker.r_rx.rows()) == n_r,
              "channel model: Kronecker covariance sizes must match N_t and N_r");
    } else {
      require(!power_profile.empty() && power_profile.size() <= n_c, "channel model: need 1 <= n_taps <= n_c");
    }
  }

  ChannelRealization sample(Rng& rng, double noise_power) const {
    ChannelRealization r = kind == Kind::kKronecker ? sample_kronecker(kronecker, n_c, rng)
                                                    : sample_wideband_rayleigh(n_c, n_r, n_t, power_profile, rng);
    r.noise_power = noise_power;
    return r;
  }
};

inline double snr_db_to_noise_power(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace vstmimo
