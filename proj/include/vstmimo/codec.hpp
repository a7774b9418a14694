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

// Desk-scale codec: patch MLP analysis/synthesis transforms, per-patch
// hyperprior, and a rate/CSI token conditioned JSCC encoder/decoder with
// per-level heads. All weights live in one flat vector.

#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vstmimo/asm.hpp"
#include "vstmimo/common.hpp"
#include "vstmimo/entropy.hpp"

namespace vstmimo {

/// H x W x C image, channel-interleaved, values nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  double& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  double at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + ch]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width && channels == o.channels; }
};

struct CodecConfig {
  int height = 32;
  int width = 32;
  int channels = 3;
  int patch = 4;
  int latent_dim = 16;   // c
  int hyper_dim = 4;     // c_z
  int hidden = 64;       // g_a / g_s
  int hyper_hidden = 32; // h_a / h_s
  int jscc_hidden = 64;  // f_e / f_d trunks
  int token_dim = 8;
  int unified_dim = 32;  // f_d per-level heads output
  RateQuantizer quantizer{};
  std::vector<double> cqi_levels{0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0};

  int patch_dim() const { return patch * patch * channels; }
  int grid_rows() const { return height / patch; }
  int grid_cols() const { return width / patch; }
  int num_patches() const { return grid_rows() * grid_cols(); }
  int source_dim() const { return height * width * channels; }

  void validate() const {
    require(height > 0 && width > 0 && channels > 0, "codec: image dimensions must be positive");
    require(patch > 0 && height % patch == 0 && width % patch == 0, "codec: image dimensions must be divisible by patch size");
    require(latent_dim > 0 && hyper_dim > 0 && hidden > 0 && hyper_hidden > 0 && jscc_hidden > 0 && token_dim > 0 &&
                unified_dim > 0,
            "codec: layer widths must be positive");
    quantizer.validate();
    for (int lv : quantizer.levels) require(lv % 2 == 0, "codec: quantizer levels must be even (real pairs form symbols)");
    require(!cqi_levels.empty(), "codec: empty CQI level set");
    for (std::size_t i = 1; i < cqi_levels.size(); ++i)
      require(cqi_levels[i] > cqi_levels[i - 1], "codec: CQI levels must be strictly increasing");
    require(cqi_levels.front() > 0.0, "codec: CQI levels must be positive");
  }
};

/// Latent patch sequence, one c-dimensional column per patch.
struct LatentTensor {
  Eigen::MatrixXd patches;  // c x l
  int rows = 0;
  int cols = 0;

  Eigen::Index l() const { return patches.cols(); }
  Eigen::Index c() const { return patches.rows(); }
};

/// Contiguous matrix inside the flat parameter vector (column-major).
struct Block {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct Dense {
  Block w;
  Block b;
};

/// Named view of every trainable tensor inside the flat parameter vector.
struct ParamLayout {
  std::vector<Dense> g_a, g_s, h_a, h_s;
  std::vector<Dense> enc_trunk, dec_trunk;
  std::vector<Dense> enc_heads, dec_heads;  // one per quantizer level
  Block rate_tokens, csi_tokens;            // token_dim x count
  Block prior_loc, prior_log_scale;         // c_z
  Block fallback_sigma;                     // c, raw (pre-softplus)
  std::size_t total = 0;

  explicit ParamLayout(const CodecConfig& cfg) {
    cfg.validate();
    const int pd = cfg.patch_dim(), c = cfg.latent_dim, cz = cfg.hyper_dim;
    const int h = cfg.hidden, hh = cfg.hyper_hidden, jh = cfg.jscc_hidden, dt = cfg.token_dim, du = cfg.unified_dim;
    g_a = {dense(h, pd), dense(h, h), dense(c, h)};
    g_s = {dense(h, c), dense(h, h), dense(pd, h)};
    h_a = {dense(hh, c), dense(cz, hh)};
    h_s = {dense(hh, cz), dense(2 * c, hh)};
    enc_trunk = {dense(jh, c + 2 * dt), dense(jh, jh)};
    for (int lv : cfg.quantizer.levels) enc_heads.push_back(dense(lv, jh));
    for (int lv : cfg.quantizer.levels) dec_heads.push_back(dense(du, lv));
    dec_trunk = {dense(jh, du + 2 * dt), dense(jh, jh), dense(c, jh)};
    rate_tokens = block(dt, static_cast<int>(cfg.quantizer.levels.size()));
    csi_tokens = block(dt, static_cast<int>(cfg.cqi_levels.size()));
    prior_loc = block(cz, 1);
    prior_log_scale = block(cz, 1);
    fallback_sigma = block(c, 1);
  }

 private:
  Block block(int rows, int cols) {
    Block b{total, rows, cols};
    total += b.size();
    return b;
  }
  Dense dense(int out, int in) {
    Dense d;
    d.w = block(out, in);
    d.b = block(out, 1);
    return d;
  }
};

/// All trainable weights; also used (zero-initialized) as a gradient accumulator.
class CodecParams {
 public:
  using Map = Eigen::Map<Eigen::MatrixXd>;
  using ConstMap = Eigen::Map<const Eigen::MatrixXd>;

  explicit CodecParams(CodecConfig cfg)
      : config_(std::move(cfg)), layout_(std::make_shared<const ParamLayout>(config_)), flat_(layout_->total, 0.0) {}

  const CodecConfig& config() const { return config_; }
  const ParamLayout& layout() const { return *layout_; }

  std::span<double> flat() { return flat_; }
  std::span<const double> flat() const { return flat_; }
  std::size_t size() const { return flat_.size(); }

  Map operator[](const Block& b) { return Map(flat_.data() + b.offset, b.rows, b.cols); }
  ConstMap operator[](const Block& b) const { return ConstMap(flat_.data() + b.offset, b.rows, b.cols); }

  /// Same architecture, all zeros.
  CodecParams zeros_like() const {
    CodecParams z(*this);
    std::fill(z.flat_.begin(), z.flat_.end(), 0.0);
    return z;
  }

  void set_zero() { std::fill(flat_.begin(), flat_.end(), 0.0); }

  bool operator==(const CodecParams& o) const { return flat_ == o.flat_; }

 private:
  CodecConfig config_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<double> flat_;
};

/// Gaussian fan-in initialization; tokens N(0, 1); prior unit logistic.
inline CodecParams init_params(const CodecConfig& cfg, std::uint64_t seed) {
  CodecParams p(cfg);
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto& L = p.layout();
  auto init_stack = [&](const std::vector<Dense>& stack) {
    for (const auto& d : stack) {
      auto w = p[d.w];
      const double s = 1.0 / std::sqrt(static_cast<double>(d.w.cols));
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = s * n(rng);
    }
  };
  for (const auto* stack : {&L.g_a, &L.g_s, &L.h_a, &L.h_s, &L.enc_trunk, &L.enc_heads, &L.dec_heads, &L.dec_trunk})
    init_stack(*stack);
  for (const auto* blk : {&L.rate_tokens, &L.csi_tokens}) {
    auto t = p[*blk];
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = n(rng);
  }
  p[L.prior_log_scale].setZero();
  p[L.fallback_sigma].setConstant(0.5413248546129181);  // softplus^-1(1)
  return p;
}

// ---------------------------------------------------------------------------
// MLP forward/backward over column batches.

/// Activations of one stack: inputs[k] feeds layer k, inputs.back() is the output.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;
};

/// tanh on every layer except the last (and on the last too if `activate_last`).
inline Eigen::MatrixXd mlp_forward(const CodecParams& p, std::span<const Dense> stack, const Eigen::MatrixXd& x,
                                   MlpCache* cache = nullptr, bool activate_last = false) {
  Eigen::MatrixXd a = x;
  if (cache) cache->inputs.assign(1, x);
  for (std::size_t k = 0; k < stack.size(); ++k) {
    Eigen::MatrixXd z = p[stack[k].w] * a;
    z.colwise() += p[stack[k].b].col(0);
    if (k + 1 < stack.size() || activate_last) z = z.array().tanh().matrix();
    a = std::move(z);
    if (cache) cache->inputs.push_back(a);
  }
  return a;
}

/// Accumulates parameter gradients into `grad`, returns dL/dx.
inline Eigen::MatrixXd mlp_backward(const CodecParams& p, CodecParams& grad, std::span<const Dense> stack,
                                    const MlpCache& cache, Eigen::MatrixXd g_out, bool activate_last = false) {
  for (std::size_t k = stack.size(); k-- > 0;) {
    if (k + 1 < stack.size() || activate_last) {
      const auto& act = cache.inputs[k + 1];
      g_out = (g_out.array() * (1.0 - act.array().square())).matrix();
    }
    grad[stack[k].w].noalias() += g_out * cache.inputs[k].transpose();
    grad[stack[k].b].col(0) += g_out.rowwise().sum();
    g_out = p[stack[k].w].transpose() * g_out;
  }
  return g_out;
}

// ---------------------------------------------------------------------------
// Patch extraction.

/// Columns are patches in row-major grid order; entries ordered (dy, dx, channel).
inline Eigen::MatrixXd extract_patches(const Image& x, int patch) {
  require(patch > 0 && x.height % patch == 0 && x.width % patch == 0,
          "analyze: image dimensions must be divisible by the patch size");
  const int gr = x.height / patch, gc = x.width / patch, pd = patch * patch * x.channels;
  Eigen::MatrixXd out(pd, gr * gc);
  for (int r = 0; r < gr; ++r)
    for (int q = 0; q < gc; ++q) {
      int k = 0;
      for (int dy = 0; dy < patch; ++dy)
        for (int dx = 0; dx < patch; ++dx)
          for (int ch = 0; ch < x.channels; ++ch) out(k++, r * gc + q) = x.at(r * patch + dy, q * patch + dx, ch);
    }
  return out;
}

inline Image assemble_patches(const Eigen::MatrixXd& cols, int height, int width, int channels, int patch) {
  const int gr = height / patch, gc = width / patch;
  require(cols.rows() == patch * patch * channels && cols.cols() == gr * gc, "synthesize: patch matrix shape mismatch");
  Image x(height, width, channels);
  for (int r = 0; r < gr; ++r)
    for (int q = 0; q < gc; ++q) {
      int k = 0;
      for (int dy = 0; dy < patch; ++dy)
        for (int dx = 0; dx < patch; ++dx)
          for (int ch = 0; ch < channels; ++ch) x.at(r * patch + dy, q * patch + dx, ch) = cols(k++, r * gc + q);
    }
  return x;
}

// ---------------------------------------------------------------------------
// Codec operations.

/// g_a: shared patch MLP, pd -> c.
inline LatentTensor analyze(const Image& x, const CodecParams& p) {
  const auto& cfg = p.config();
  require(x.channels == cfg.channels, "analyze: channel count does not match the codec configuration");
  LatentTensor y;
  y.patches = mlp_forward(p, p.layout().g_a, extract_patches(x, cfg.patch));
  y.rows = x.height / cfg.patch;
  y.cols = x.width / cfg.patch;
  return y;
}

/// g_s: mirror MLP, c -> pd. Clamped to [0, 1] only when `clamp` is set.
inline Image synthesize(const LatentTensor& y_hat, const CodecParams& p, bool clamp = true) {
  const auto& cfg = p.config();
  require(y_hat.c() == cfg.latent_dim && y_hat.l() == static_cast<Eigen::Index>(y_hat.rows) * y_hat.cols,
          "synthesize: latent shape mismatch");
  Image x = assemble_patches(mlp_forward(p, p.layout().g_s, y_hat.patches), y_hat.rows * cfg.patch,
                             y_hat.cols * cfg.patch, cfg.channels, cfg.patch);
  if (clamp)
    for (auto& v : x.data) v = std::clamp(v, 0.0, 1.0);
  return x;
}

/// h_a: per-patch hyperlatent (c_z x l).
inline Eigen::MatrixXd hyper_encode(const LatentTensor& y, const CodecParams& p) {
  require(y.c() == p.config().latent_dim, "hyper_encode: latent dimension mismatch");
  return mlp_forward(p, p.layout().h_a, y.patches);
}

/// Raw h_s output split into (mu, sigma) with sigma = softplus(raw) + sigma_min.
inline GaussianParams gaussian_from_raw(const Eigen::MatrixXd& raw, int c) {
  Eigen::MatrixXd sigma = raw.bottomRows(c).unaryExpr([](double v) { return detail::softplus(v) + kSigmaMin; });
  return GaussianParams(raw.topRows(c), std::move(sigma));
}

/// h_s: hyperlatent -> (mu, sigma) per latent element.
inline GaussianParams hyper_decode(const Eigen::MatrixXd& z_bar, const CodecParams& p) {
  require(z_bar.rows() == p.config().hyper_dim, "hyper_decode: hyperlatent dimension mismatch");
  return gaussian_from_raw(mlp_forward(p, p.layout().h_s, z_bar), p.config().latent_dim);
}

/// Parameters used when side information is not transmitted: mu = 0, learned constant sigma.
inline GaussianParams fallback_gaussian(const CodecParams& p, Eigen::Index l) {
  const auto raw = p[p.layout().fallback_sigma].col(0);
  Eigen::MatrixXd sigma(raw.size(), l);
  for (Eigen::Index i = 0; i < raw.size(); ++i) sigma.row(i).setConstant(detail::softplus(raw(i)) + kSigmaMin);
  return GaussianParams(Eigen::MatrixXd::Zero(raw.size(), l), std::move(sigma));
}

inline FactorizedPrior factorized_prior(const CodecParams& p) {
  FactorizedPrior prior;
  prior.loc = p[p.layout().prior_loc].col(0);
  prior.scale = p[p.layout().prior_log_scale].col(0).array().exp().matrix();
  return prior;
}

/// Column-wise token concatenation [y; r_token; c_token].
inline Eigen::MatrixXd with_tokens(const CodecParams& p, const Eigen::MatrixXd& x, std::span<const int> rate_idx,
                                   std::span<const int> csi_idx) {
  const auto& L = p.layout();
  const int dt = L.rate_tokens.rows;
  Eigen::MatrixXd u(x.rows() + 2 * dt, x.cols());
  u.topRows(x.rows()) = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto ri = rate_idx[static_cast<std::size_t>(j)];
    const auto ci = csi_idx[static_cast<std::size_t>(j)];
    require(ri >= 0 && ri < L.rate_tokens.cols, "jscc: unknown rate token");
    require(ci >= 0 && ci < L.csi_tokens.cols, "jscc: unknown CSI token");
    u.block(x.rows(), j, dt, 1) = p[L.rate_tokens].col(ri);
    u.block(x.rows() + dt, j, dt, 1) = p[L.csi_tokens].col(ci);
  }
  return u;
}

inline int level_index_checked(const CodecParams& p, int level) {
  const int idx = p.config().quantizer.index_of(level);
  require(idx >= 0, "jscc: " + std::to_string(level) + " is not a configured quantizer level");
  return idx;
}

/// f_e for one patch: k̄ real outputs, paired into k̄/2 complex symbols.
inline Eigen::VectorXd jscc_encode(const Eigen::VectorXd& y_i, int rate_token_index, int csi_token_index,
                                   int target_dims, const CodecParams& p) {
  const int lvl = level_index_checked(p, target_dims);
  require(lvl == rate_token_index, "jscc_encode: rate token does not match the target level");
  require(y_i.size() == p.config().latent_dim, "jscc_encode: patch dimension mismatch");
  const std::array<int, 1> ri{rate_token_index}, ci{csi_token_index};
  const Eigen::MatrixXd u = with_tokens(p, y_i, ri, ci);
  const Eigen::MatrixXd h = mlp_forward(p, p.layout().enc_trunk, u, nullptr, true);
  const Dense& head = p.layout().enc_heads[static_cast<std::size_t>(lvl)];
  return p[head.w] * h + p[head.b];
}

/// Real pairs (w[2j], w[2j+1]) -> complex symbols.
inline std::vector<cplx> pack_complex(const Eigen::Ref<const Eigen::VectorXd>& w) {
  require(w.size() % 2 == 0, "pack_complex: odd number of reals");
  std::vector<cplx> s(static_cast<std::size_t>(w.size() / 2));
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = {w(2 * j), w(2 * j + 1)};
  return s;
}

inline Eigen::VectorXd unpack_complex(std::span<const cplx> s) {
  Eigen::VectorXd w(2 * static_cast<Eigen::Index>(s.size()));
  for (std::size_t j = 0; j < s.size(); ++j) {
    w(2 * j) = s[j].real();
    w(2 * j + 1) = s[j].imag();
  }
  return w;
}

/// f_d for one patch: received symbols -> c-dimensional estimate.
inline Eigen::VectorXd jscc_decode(std::span<const cplx> w_hat_i, int rate_token_index, int csi_token_index,
                                   const CodecParams& p) {
  const int lvl = level_index_checked(p, static_cast<int>(2 * w_hat_i.size()));
  require(lvl == rate_token_index, "jscc_decode: rate token does not match the symbol count");
  const Dense& head = p.layout().dec_heads[static_cast<std::size_t>(lvl)];
  const Eigen::VectorXd v = p[head.w] * unpack_complex(w_hat_i) + p[head.b];
  const std::array<int, 1> ri{rate_token_index}, ci{csi_token_index};
  return mlp_forward(p, p.layout().dec_trunk, with_tokens(p, v, ri, ci));
}

// ---------------------------------------------------------------------------
// Transmit power.

struct SymbolStreams {
  std::vector<std::vector<cplx>> streams;
  double power_scale = 1.0;  // factor applied by power_normalize

  double mean_power() const {
    double e = 0.0;
    std::size_t n = 0;
    for (const auto& s : streams) {
      for (const auto& v : s) e += std::norm(v);
      n += s.size();
    }
    return n ? e / static_cast<double>(n) : 0.0;
  }
};

/// One global scale so the mean per-symbol power is 1.
inline SymbolStreams power_normalize(const SymbolStreams& in) {
  const double p = in.mean_power();
  require(p > 0.0 && std::isfinite(p), "power_normalize: streams carry no energy");
  SymbolStreams out = in;
  const double a = 1.0 / std::sqrt(p);
  for (auto& s : out.streams)
    for (auto& v : s) v *= a;
  out.power_scale = in.power_scale * a;
  return out;
}

/// Undo power_normalize.
inline SymbolStreams power_denormalize(const SymbolStreams& in) {
  SymbolStreams out = in;
  for (auto& s : out.streams)
    for (auto& v : s) v /= in.power_scale;
  out.power_scale = 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: one JSON header line, then little-endian float32 in flat order.

inline constexpr int kCheckpointVersion = 1;

/// 8x8 configuration used for finite-difference checks.
inline CodecConfig tiny_codec_config() {
  CodecConfig c;
  c.height = 8;
  c.width = 8;
  c.latent_dim = 8;
  c.hidden = 16;
  c.hyper_hidden = 8;
  c.jscc_hidden = 16;
  c.unified_dim = 8;
  c.token_dim = 4;
  return c;
}

inline nlohmann::json codec_config_to_json(const CodecConfig& c) {
  return {{"height", c.height},           {"width", c.width},
          {"channels", c.channels},       {"patch", c.patch},
          {"latent_dim", c.latent_dim},   {"hyper_dim", c.hyper_dim},
          {"hidden", c.hidden},           {"hyper_hidden", c.hyper_hidden},
          {"jscc_hidden", c.jscc_hidden}, {"token_dim", c.token_dim},
          {"unified_dim", c.unified_dim}, {"quantizer", {{"k_q", c.quantizer.k_q}, {"levels", c.quantizer.levels}}},
          {"cqi_levels", c.cqi_levels}};
}

inline CodecConfig codec_config_from_json(const nlohmann::json& j, CodecConfig c = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  get("height", c.height);
  get("width", c.width);
  get("channels", c.channels);
  get("patch", c.patch);
  get("latent_dim", c.latent_dim);
  get("hyper_dim", c.hyper_dim);
  get("hidden", c.hidden);
  get("hyper_hidden", c.hyper_hidden);
  get("jscc_hidden", c.jscc_hidden);
  get("token_dim", c.token_dim);
  get("unified_dim", c.unified_dim);
  if (j.contains("quantizer")) {
    const auto& q = j.at("quantizer");
    if (q.contains("k_q")) c.quantizer.k_q = q.at("k_q").get<unsigned>();
    if (q.contains("levels")) c.quantizer.levels = q.at("levels").get<std::vector<int>>();
  }
  get("cqi_levels", c.cqi_levels);
  c.validate();
  return c;
}

inline void save_checkpoint(std::ostream& os, const CodecParams& p) {
  const auto& L = p.layout();
  nlohmann::json header = {
      {"format", "vstmimo-checkpoint"},
      {"version", kCheckpointVersion},
      {"architecture", codec_config_to_json(p.config())},
      {"token_tables", {{"rate", {L.rate_tokens.rows, L.rate_tokens.cols}}, {"csi", {L.csi_tokens.rows, L.csi_tokens.cols}}}},
      {"param_count", p.size()},
      {"dtype", "float32-le"}};
  os << header.dump() << '\n';
  std::vector<unsigned char> buf(4 * p.size());
  std::size_t k = 0;
  for (double v : p.flat()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) buf[k++] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("checkpoint: write failed");
}

inline CodecParams load_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed header: ") + e.what());
  }
  require(header.value("format", "") == "vstmimo-checkpoint", "checkpoint: unknown format");
  require(header.value("version", 0) == kCheckpointVersion, "checkpoint: unsupported version");
  CodecParams p(codec_config_from_json(header.at("architecture")));
  require(header.at("param_count").get<std::size_t>() == p.size(), "checkpoint: parameter count does not match architecture");
  std::vector<unsigned char> buf(4 * p.size());
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  require(static_cast<std::size_t>(is.gcount()) == buf.size(), "checkpoint: truncated parameter payload");
  auto flat = p.flat();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[4 * i + b]) << (8 * b);
    flat[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return p;
}

inline void save_checkpoint(const std::string& path, const CodecParams& p) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  save_checkpoint(os, p);
}

inline CodecParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  return load_checkpoint(is);
}

}  // namespace vstmimo
