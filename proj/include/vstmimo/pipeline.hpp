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

// One transmission through the full chain, with an optional backward pass:
// analyze -> hyperprior -> entropy -> CQI -> ASM -> f_e -> streams -> power
// -> channel -> ZF -> f_d -> synthesize.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "vstmimo/asm.hpp"
#include "vstmimo/channel.hpp"
#include "vstmimo/codec.hpp"
#include "vstmimo/common.hpp"
#include "vstmimo/entropy.hpp"

namespace vstmimo {

struct LinkConfig {
  std::size_t n_t = 2;
  std::size_t n_s = 2;
  double eta = 2.0;
  double c_z = 2.0;
  bool transmit_side_info = true;
  bool count_overhead_in_cbr = false;
  // Train-mode f_e sees y + U(-1/2, 1/2) instead of y; inference always encodes y.
  bool encode_proxy_latent = true;
};

enum class Mode { kTrain, kEval };

/// Standard CN(0, 1) draws addressed by resource-element index; extended
/// lazily so that a prefix never changes once drawn.
class NoiseTape {
 public:
  explicit NoiseTape(std::uint64_t seed = 0) : rng_(seed) {}
  cplx at(std::size_t idx) {
    while (values_.size() <= idx) values_.push_back(complex_normal(rng_));
    return values_[idx];
  }

 private:
  Rng rng_;
  std::vector<cplx> values_;
};

/// Randomness consumed by one pass, drawn up front so the pass is a
/// deterministic function of the parameters.
struct FrozenDraws {
  Eigen::MatrixXd y_offset;  // U(-1/2, 1/2), c x l
  Eigen::MatrixXd z_offset;  // U(-1/2, 1/2), c_z x l
  NoiseTape channel_noise;

  static FrozenDraws make(const CodecConfig& cfg, Rng& rng) {
    return make(cfg, cfg.num_patches(), rng);
  }

  static FrozenDraws make(const CodecConfig& cfg, int l, Rng& rng) {
    FrozenDraws d;
    d.y_offset = proxy_quantize(Eigen::MatrixXd::Zero(cfg.latent_dim, l), rng);
    d.z_offset = proxy_quantize(Eigen::MatrixXd::Zero(cfg.hyper_dim, l), rng);
    d.channel_noise = NoiseTape(rng());
    return d;
  }
};

/// Placement of one patch's symbols inside its stream.
struct SymbolSlot {
  std::size_t stream = 0;
  std::size_t offset = 0;  // first complex symbol
  std::size_t count = 0;
};

/// Everything computed by one pass; kept for the backward pass and reporting.
struct PassState {
  Mode mode = Mode::kEval;
  double m = 0.0;  // source dimension

  Eigen::MatrixXd patches;
  MlpCache ga, ha, hs, gs, enc_trunk, dec_trunk;
  Eigen::MatrixXd y, z, z_used, y_used;
  GaussianParams gauss;
  Eigen::MatrixXd hs_raw;
  Eigen::MatrixXd d_y, d_mu, d_sigma;  // d(bits)/d(.) per latent element
  Eigen::VectorXd patch_bits;
  double z_bits = 0.0;
  Eigen::MatrixXd dz_value, dz_loc, dz_scale;  // c_z x l

  std::optional<ZeroForcing> zf;
  CqiReport cqi;
  std::vector<double> capacities;  // CQI values used by ASM
  RateAllocation alloc;
  std::vector<int> rate_idx, csi_idx;
  std::vector<std::vector<int>> level_groups;  // patch indices per quantizer level

  Eigen::MatrixXd enc_hidden;        // jh x l
  std::vector<Eigen::VectorXd> w;    // per patch, k̄ reals
  std::vector<SymbolSlot> slots;
  std::size_t stream_len = 0;        // padded symbols per stream
  std::vector<std::vector<cplx>> tx; // unnormalized, padded, n_s streams
  double energy = 0.0;
  double scale = 1.0;                // power normalization factor a
  std::vector<std::vector<cplx>> rx; // detected, still scaled by a
  double tx_mean_power = 0.0;        // after normalization
  std::vector<Eigen::VectorXd> w_hat;
  Eigen::MatrixXd dec_in;            // du x l
  Eigen::MatrixXd y_hat;
  Eigen::MatrixXd x_hat;             // patch columns
  MlpCache gs_anchor;
  Eigen::MatrixXd x_anchor;          // g_s(ỹ), train mode only
  double anchor_mse = 0.0;

  double mse = 0.0;
  double k_y_tilde = 0.0;  // per source dimension
  double k_z_tilde = 0.0;
  double k_y = 0.0;        // channel symbols
  double k_z = 0.0;
  long long overhead = 0;
  double cbr = 0.0;
};

inline std::size_t slot_count(std::size_t stream_len, std::size_t n_c) { return (stream_len + n_c - 1) / n_c; }

/// Forward pass. Train mode uses proxy quantization and an unclamped output;
/// eval mode rounds y and z for the entropy model and clamps the output.
inline PassState run_pipeline(const Image& x, const CodecParams& p, const ChannelRealization& channel,
                              const LinkConfig& link, Mode mode, FrozenDraws& draws) {
  const auto& cfg = p.config();
  const auto& L = p.layout();
  PassState st;
  st.mode = mode;
  st.m = static_cast<double>(x.size());
  const int c = cfg.latent_dim;

  // Source transform and hyperprior.
  require(x.channels == cfg.channels, "pipeline: channel count does not match the codec configuration");
  st.patches = extract_patches(x, cfg.patch);
  st.y = mlp_forward(p, L.g_a, st.patches, &st.ga);
  const Eigen::Index l = st.y.cols();
  if (mode == Mode::kTrain)
    require(draws.y_offset.cols() == l && draws.z_offset.cols() == l, "pipeline: frozen draws do not match the patch count");
  st.y_used = mode == Mode::kTrain ? Eigen::MatrixXd(st.y + draws.y_offset) : hard_quantize_real(st.y);

  const FactorizedPrior prior = factorized_prior(p);
  if (link.transmit_side_info) {
    st.z = mlp_forward(p, L.h_a, st.y, &st.ha);
    st.z_used = mode == Mode::kTrain ? Eigen::MatrixXd(st.z + draws.z_offset) : hard_quantize_real(st.z);
    st.hs_raw = mlp_forward(p, L.h_s, st.z_used, &st.hs);
    st.gauss = gaussian_from_raw(st.hs_raw, c);
    st.dz_value.resize(st.z.rows(), l);
    st.dz_loc.resize(st.z.rows(), l);
    st.dz_scale.resize(st.z.rows(), l);
    for (Eigen::Index j = 0; j < l; ++j)
      for (Eigen::Index i = 0; i < st.z.rows(); ++i) {
        const BinNll b = logistic_bin_nll(st.z_used(i, j), prior.loc(i), prior.scale(i));
        st.z_bits += b.bits;
        st.dz_value(i, j) = b.d_value;
        st.dz_loc(i, j) = b.d_loc;
        st.dz_scale(i, j) = b.d_scale;
      }
  } else {
    st.gauss = fallback_gaussian(p, l);
  }

  // Per-element entropy.
  st.d_y.resize(c, l);
  st.d_mu.resize(c, l);
  st.d_sigma.resize(c, l);
  st.patch_bits = Eigen::VectorXd::Zero(l);
  for (Eigen::Index j = 0; j < l; ++j)
    for (Eigen::Index i = 0; i < c; ++i) {
      const BinNll b = gaussian_bin_nll(st.y_used(i, j), st.gauss.mu(i, j), st.gauss.sigma(i, j));
      st.patch_bits(j) += b.bits;
      st.d_y(i, j) = b.d_value;
      st.d_mu(i, j) = b.d_loc;
      st.d_sigma(i, j) = b.d_scale;
    }

  // CQI and adaptive spatial multiplexing.
  try {
    st.zf.emplace(channel, link.n_s);
  } catch (const DetectionError& e) {
    throw StageError("zf_detect", e.what());
  }
  st.cqi = st.zf->cqi(cfg.cqi_levels);
  for (std::size_t q : st.cqi.quantized_cqi) st.capacities.push_back(cfg.cqi_levels[q]);
  std::vector<double> bits(st.patch_bits.data(), st.patch_bits.data() + l);
  st.alloc = map_streams(bits, st.capacities, link.eta, cfg.quantizer);

  st.rate_idx.resize(static_cast<std::size_t>(l));
  st.csi_idx.resize(static_cast<std::size_t>(l));
  st.level_groups.assign(cfg.quantizer.levels.size(), {});
  for (Eigen::Index j = 0; j < l; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    st.rate_idx[ju] = cfg.quantizer.index_of(st.alloc.quantized[ju]);
    st.csi_idx[ju] = static_cast<int>(st.cqi.quantized_cqi[st.alloc.stream[ju]]);
    st.level_groups[static_cast<std::size_t>(st.rate_idx[ju])].push_back(static_cast<int>(j));
  }

  // f_e: shared trunk over [y; r; c], per-level heads.
  const bool proxy_in = mode == Mode::kTrain && link.encode_proxy_latent;
  st.enc_hidden =
      mlp_forward(p, L.enc_trunk, with_tokens(p, proxy_in ? st.y_used : st.y, st.rate_idx, st.csi_idx), &st.enc_trunk, true);
  st.w.assign(static_cast<std::size_t>(l), {});
  for (std::size_t g = 0; g < st.level_groups.size(); ++g) {
    const auto& idx = st.level_groups[g];
    if (idx.empty()) continue;
    Eigen::MatrixXd h(st.enc_hidden.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) h.col(static_cast<Eigen::Index>(k)) = st.enc_hidden.col(idx[k]);
    Eigen::MatrixXd out = p[L.enc_heads[g].w] * h;
    out.colwise() += p[L.enc_heads[g].b].col(0);
    for (std::size_t k = 0; k < idx.size(); ++k) st.w[static_cast<std::size_t>(idx[k])] = out.col(static_cast<Eigen::Index>(k));
  }

  // Stream packing, zero padding to the longest stream.
  const std::size_t ns = link.n_s;
  std::vector<std::size_t> fill(ns, 0);
  st.slots.resize(static_cast<std::size_t>(l));
  for (std::size_t i = 0; i < st.slots.size(); ++i) {
    const std::size_t t = st.alloc.stream[i];
    st.slots[i] = {t, fill[t], static_cast<std::size_t>(st.alloc.quantized[i] / 2)};
    fill[t] += st.slots[i].count;
  }
  st.stream_len = *std::max_element(fill.begin(), fill.end());
  st.tx.assign(ns, std::vector<cplx>(st.stream_len));
  for (std::size_t i = 0; i < st.slots.size(); ++i) {
    const auto& sl = st.slots[i];
    for (std::size_t k = 0; k < sl.count; ++k) st.tx[sl.stream][sl.offset + k] = {st.w[i](2 * k), st.w[i](2 * k + 1)};
  }

  // Global power normalization over the padded grid.
  st.energy = 0.0;
  for (const auto& s : st.tx)
    for (const auto& v : s) st.energy += std::norm(v);
  const double n_sym = static_cast<double>(ns * st.stream_len);
  if (!std::isfinite(st.energy)) throw NonFiniteError("power_normalize", "non-finite symbol energy");
  if (!(st.energy > 0.0)) throw StageError("power_normalize", "streams carry no energy");
  st.scale = std::sqrt(n_sym / st.energy);

  // Channel and detection, one OFDM symbol per slot; stream symbol j sits on
  // subcarrier j mod N_c of slot j / N_c.
  const std::size_t n_c = channel.n_c(), n_r = channel.n_r();
  const std::size_t n_slots = slot_count(st.stream_len, n_c);
  st.rx.assign(ns, std::vector<cplx>(st.stream_len));
  double tx_power = 0.0;
  const double noise_amp = std::sqrt(channel.noise_power);
  for (std::size_t slot = 0; slot < n_slots; ++slot) {
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n_c), static_cast<Eigen::Index>(ns));
    for (std::size_t cc = 0; cc < n_c; ++cc) {
      const std::size_t j = slot * n_c + cc;
      if (j >= st.stream_len) break;
      for (std::size_t t = 0; t < ns; ++t) {
        s(static_cast<Eigen::Index>(cc), static_cast<Eigen::Index>(t)) = st.scale * st.tx[t][j];
        tx_power += std::norm(st.scale * st.tx[t][j]);
      }
    }
    Eigen::MatrixXcd noise(static_cast<Eigen::Index>(n_c), static_cast<Eigen::Index>(n_r));
    for (std::size_t cc = 0; cc < n_c; ++cc)
      for (std::size_t r = 0; r < n_r; ++r)
        noise(static_cast<Eigen::Index>(cc), static_cast<Eigen::Index>(r)) =
            noise_amp * draws.channel_noise.at((slot * n_c + cc) * n_r + r);
    const Eigen::MatrixXcd det = st.zf->detect(apply_channel(channel, s, noise));
    for (std::size_t cc = 0; cc < n_c; ++cc) {
      const std::size_t j = slot * n_c + cc;
      if (j >= st.stream_len) break;
      for (std::size_t t = 0; t < ns; ++t) st.rx[t][j] = det(static_cast<Eigen::Index>(cc), static_cast<Eigen::Index>(t));
    }
  }
  st.tx_mean_power = tx_power / n_sym;

  // f_d: per-level input heads to the unified width, then the shared trunk.
  st.w_hat.assign(static_cast<std::size_t>(l), {});
  st.dec_in.resize(cfg.unified_dim, l);
  for (std::size_t i = 0; i < st.slots.size(); ++i) {
    const auto& sl = st.slots[i];
    Eigen::VectorXd wh(2 * static_cast<Eigen::Index>(sl.count));
    for (std::size_t k = 0; k < sl.count; ++k) {
      const cplx v = st.rx[sl.stream][sl.offset + k] / st.scale;
      wh(2 * k) = v.real();
      wh(2 * k + 1) = v.imag();
    }
    st.w_hat[i] = std::move(wh);
  }
  for (std::size_t g = 0; g < st.level_groups.size(); ++g) {
    const auto& idx = st.level_groups[g];
    if (idx.empty()) continue;
    const int lv = cfg.quantizer.levels[g];
    Eigen::MatrixXd in(lv, static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) in.col(static_cast<Eigen::Index>(k)) = st.w_hat[static_cast<std::size_t>(idx[k])];
    Eigen::MatrixXd out = p[L.dec_heads[g].w] * in;
    out.colwise() += p[L.dec_heads[g].b].col(0);
    for (std::size_t k = 0; k < idx.size(); ++k) st.dec_in.col(idx[k]) = out.col(static_cast<Eigen::Index>(k));
  }
  st.y_hat = mlp_forward(p, L.dec_trunk, with_tokens(p, st.dec_in, st.rate_idx, st.csi_idx), &st.dec_trunk);

  // Synthesis and distortion.
  st.x_hat = mlp_forward(p, L.g_s, st.y_hat, &st.gs);
  if (mode == Mode::kEval) st.x_hat = st.x_hat.cwiseMax(0.0).cwiseMin(1.0);
  st.mse = (st.x_hat - st.patches).squaredNorm() / st.m;
  if (mode == Mode::kTrain) {
    st.x_anchor = mlp_forward(p, L.g_s, st.y_used, &st.gs_anchor);
    st.anchor_mse = (st.x_anchor - st.patches).squaredNorm() / st.m;
  }

  // Rate terms.
  double ky = 0.0;
  for (Eigen::Index j = 0; j < l; ++j)
    ky += link.eta / st.capacities[st.alloc.stream[static_cast<std::size_t>(j)]] * st.patch_bits(j);
  st.k_y_tilde = ky / st.m;
  st.k_z_tilde = link.transmit_side_info ? st.z_bits / link.c_z / st.m : 0.0;

  st.k_y = total_bandwidth(st.alloc, ns, link.n_t);
  st.k_z = link.transmit_side_info ? side_info_rate(st.z_bits, link.c_z) : 0.0;
  st.overhead = overhead_bits(static_cast<std::size_t>(l), cfg.quantizer.k_q, ns);
  double k_total = st.k_y + st.k_z;
  if (link.count_overhead_in_cbr) k_total += static_cast<double>(st.overhead) / link.c_z;
  st.cbr = channel_bandwidth_ratio(k_total, st.m);
  return st;
}

/// Training objective weights.
struct Objective {
  double lambda = 0.01;
  double anchor_weight = 0.0;  // weight of MSE(x, g_s(ỹ))
};

/// λ (k̃_y + k̃_z) + d + w_a d_anchor
inline double pass_loss(const PassState& st, const Objective& obj) {
  return obj.lambda * (st.k_y_tilde + st.k_z_tilde) + st.mse + obj.anchor_weight * st.anchor_mse;
}

/// Accumulates d(loss)/d(params) * weight into `grad`. Train-mode passes only.
inline void backward_pipeline(const PassState& st, const CodecParams& p, CodecParams& grad, const LinkConfig& link,
                              const Objective& obj, double weight = 1.0) {
  const double lambda = obj.lambda;
  require(st.mode == Mode::kTrain, "backward: only train-mode passes are differentiable");
  const auto& cfg = p.config();
  const auto& L = p.layout();
  const int c = cfg.latent_dim;
  const int dt = cfg.token_dim;
  const Eigen::Index l = st.y.cols();

  // Distortion.
  Eigen::MatrixXd g_xhat = (2.0 * weight / st.m) * (st.x_hat - st.patches);
  const Eigen::MatrixXd g_yhat = mlp_backward(p, grad, L.g_s, st.gs, std::move(g_xhat));

  // Decoder trunk and tokens.
  const Eigen::MatrixXd g_dec_u = mlp_backward(p, grad, L.dec_trunk, st.dec_trunk, g_yhat);
  const Eigen::Index du = st.dec_in.rows();
  for (Eigen::Index j = 0; j < l; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    grad[L.rate_tokens].col(st.rate_idx[ju]) += g_dec_u.block(du, j, dt, 1);
    grad[L.csi_tokens].col(st.csi_idx[ju]) += g_dec_u.block(du + dt, j, dt, 1);
  }

  // Decoder heads -> gradient w.r.t. received reals.
  std::vector<Eigen::VectorXd> g_what(static_cast<std::size_t>(l));
  for (std::size_t g = 0; g < st.level_groups.size(); ++g) {
    const auto& idx = st.level_groups[g];
    if (idx.empty()) continue;
    const int lv = cfg.quantizer.levels[g];
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd in(lv, n), gout(du, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      in.col(k) = st.w_hat[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
      gout.col(k) = g_dec_u.block(0, idx[static_cast<std::size_t>(k)], du, 1);
    }
    grad[L.dec_heads[g].w].noalias() += gout * in.transpose();
    grad[L.dec_heads[g].b].col(0) += gout.rowwise().sum();
    const Eigen::MatrixXd gin = p[L.dec_heads[g].w].transpose() * gout;
    for (Eigen::Index k = 0; k < n; ++k) g_what[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = gin.col(k);
  }

  // Receiver de-normalization ŵ = ŝ / a, channel + ZF ŝ = A (a s) + W n.
  const std::size_t ns = link.n_s;
  const std::size_t n_c = st.zf->n_c();
  std::vector<std::vector<cplx>> g_rx(ns, std::vector<cplx>(st.stream_len));
  double g_scale = 0.0;
  for (std::size_t i = 0; i < st.slots.size(); ++i) {
    const auto& sl = st.slots[i];
    for (std::size_t k = 0; k < sl.count; ++k) {
      const cplx g{g_what[i](2 * k), g_what[i](2 * k + 1)};
      const cplx r = st.rx[sl.stream][sl.offset + k];
      g_rx[sl.stream][sl.offset + k] = g / st.scale;
      g_scale += (std::conj(g) * (-r / (st.scale * st.scale))).real();
    }
  }
  std::vector<std::vector<cplx>> g_tx(ns, std::vector<cplx>(st.stream_len));
  Eigen::VectorXcd gs(static_cast<Eigen::Index>(ns));
  for (std::size_t j = 0; j < st.stream_len; ++j) {
    const std::size_t cc = j % n_c;
    for (std::size_t t = 0; t < ns; ++t) gs(static_cast<Eigen::Index>(t)) = g_rx[t][j];
    const Eigen::VectorXcd gx = st.zf->effective(cc).adjoint() * gs;  // d/d(a s)
    for (std::size_t t = 0; t < ns; ++t) {
      const cplx gxt = gx(static_cast<Eigen::Index>(t));
      g_tx[t][j] = st.scale * gxt;
      g_scale += (std::conj(gxt) * st.tx[t][j]).real();
    }
  }
  // a = sqrt(N / E): da/ds = -a s / E
  const double coef = -g_scale * st.scale / st.energy;
  for (std::size_t t = 0; t < ns; ++t)
    for (std::size_t j = 0; j < st.stream_len; ++j) g_tx[t][j] += coef * st.tx[t][j];

  // Encoder heads and trunk.
  Eigen::MatrixXd g_hidden = Eigen::MatrixXd::Zero(st.enc_hidden.rows(), l);
  for (std::size_t g = 0; g < st.level_groups.size(); ++g) {
    const auto& idx = st.level_groups[g];
    if (idx.empty()) continue;
    const int lv = cfg.quantizer.levels[g];
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd h(st.enc_hidden.rows(), n), gout(lv, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto i = static_cast<std::size_t>(idx[static_cast<std::size_t>(k)]);
      h.col(k) = st.enc_hidden.col(static_cast<Eigen::Index>(i));
      const auto& sl = st.slots[i];
      for (std::size_t q = 0; q < sl.count; ++q) {
        gout(2 * q, k) = g_tx[sl.stream][sl.offset + q].real();
        gout(2 * q + 1, k) = g_tx[sl.stream][sl.offset + q].imag();
      }
    }
    grad[L.enc_heads[g].w].noalias() += gout * h.transpose();
    grad[L.enc_heads[g].b].col(0) += gout.rowwise().sum();
    const Eigen::MatrixXd gh = p[L.enc_heads[g].w].transpose() * gout;
    for (Eigen::Index k = 0; k < n; ++k) g_hidden.col(idx[static_cast<std::size_t>(k)]) = gh.col(k);
  }
  const Eigen::MatrixXd g_enc_u = mlp_backward(p, grad, L.enc_trunk, st.enc_trunk, std::move(g_hidden), true);
  Eigen::MatrixXd g_y = g_enc_u.topRows(c);
  if (obj.anchor_weight != 0.0) {
    Eigen::MatrixXd g_anchor = (2.0 * weight * obj.anchor_weight / st.m) * (st.x_anchor - st.patches);
    g_y += mlp_backward(p, grad, L.g_s, st.gs_anchor, std::move(g_anchor));
  }
  for (Eigen::Index j = 0; j < l; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    grad[L.rate_tokens].col(st.rate_idx[ju]) += g_enc_u.block(c, j, dt, 1);
    grad[L.csi_tokens].col(st.csi_idx[ju]) += g_enc_u.block(c + dt, j, dt, 1);
  }

  // Rate of y: λ/m Σ_i (η / C_{M_i}) bits_i. Capacity is a per-step constant.
  Eigen::RowVectorXd coeff(l);
  for (Eigen::Index j = 0; j < l; ++j)
    coeff(j) = weight * lambda * link.eta / st.capacities[st.alloc.stream[static_cast<std::size_t>(j)]] / st.m;
  g_y += st.d_y * coeff.asDiagonal();
  const Eigen::MatrixXd g_mu = st.d_mu * coeff.asDiagonal();
  const Eigen::MatrixXd g_sigma = st.d_sigma * coeff.asDiagonal();

  if (link.transmit_side_info) {
    // sigma = softplus(raw) + sigma_min
    Eigen::MatrixXd g_raw(2 * c, l);
    g_raw.topRows(c) = g_mu;
    g_raw.bottomRows(c) = (g_sigma.array() * st.hs_raw.bottomRows(c).unaryExpr([](double v) { return detail::sigmoid(v); }).array()).matrix();
    Eigen::MatrixXd g_z = mlp_backward(p, grad, L.h_s, st.hs, std::move(g_raw));
    // Rate of z: λ/(m C_z) bits_z, with the logistic prior parameters.
    const double kz = weight * lambda / link.c_z / st.m;
    g_z += kz * st.dz_value;
    const FactorizedPrior prior = factorized_prior(p);
    grad[L.prior_loc].col(0) += kz * st.dz_loc.rowwise().sum();
    grad[L.prior_log_scale].col(0) += kz * (st.dz_scale.rowwise().sum().array() * prior.scale.array()).matrix();
    g_y += mlp_backward(p, grad, L.h_a, st.ha, std::move(g_z));
  } else {
    const auto raw = p[L.fallback_sigma].col(0);
    for (Eigen::Index i = 0; i < c; ++i) grad[L.fallback_sigma](i, 0) += g_sigma.row(i).sum() * detail::sigmoid(raw(i));
  }

  mlp_backward(p, grad, L.g_a, st.ga, std::move(g_y));
}

}  // namespace vstmimo
