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

// Rate-distortion training of the codec through the full MIMO chain.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "vstmimo/channel.hpp"
#include "vstmimo/codec.hpp"
#include "vstmimo/evaluate.hpp"
#include "vstmimo/pipeline.hpp"

namespace vstmimo {

struct TrainConfig {
  double lambda = 0.01;
  double eta = 2.0;
  double c_z = 2.0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int steps = 2000;
  int batch = 16;
  std::uint64_t seed = 1;
  double snr_low_db = 0.0;
  double snr_high_db = 15.0;
  double anchor_weight = 3.0;

  void validate() const {
    require(lambda > 0.0 && eta > 0.0 && c_z > 0.0, "train config: lambda, eta and c_z must be > 0");
    require(learning_rate >= 0.0, "train config: learning rate must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0,
            "train config: invalid optimizer constants");
    require(steps >= 0 && batch >= 1, "train config: steps must be >= 0 and batch >= 1");
    require(snr_low_db <= snr_high_db, "train config: snr range must satisfy low <= high");
  }
};

/// Rate terms are expressed per source dimension.
struct LossBreakdown {
  double k_y_tilde = 0.0;
  double k_z_tilde = 0.0;
  double distortion = 0.0;
  double anchor = 0.0;  // MSE(x, g_s(ỹ)), enters the total with its weight
  double total = 0.0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(int step)
      : std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step)), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Loss of one item for fixed channel and frozen noise; accumulates
/// `weight` * gradient into `grad` when provided.
inline LossBreakdown compute_loss(const Image& x, const CodecParams& p, const ChannelRealization& channel,
                                  const LinkConfig& link, const Objective& obj, FrozenDraws& draws,
                                  CodecParams* grad = nullptr, double weight = 1.0) {
  PassState st;
  try {
    st = run_pipeline(x, p, channel, link, Mode::kTrain, draws);
  } catch (const StageError&) {
    throw;
  } catch (const DetectionError& e) {
    throw StageError("zf_detect", e.what());
  }
  LossBreakdown out;
  out.k_y_tilde = st.k_y_tilde;
  out.k_z_tilde = st.k_z_tilde;
  out.distortion = st.mse;
  out.anchor = st.anchor_mse;
  out.total = pass_loss(st, obj);
  if (grad) backward_pipeline(st, p, *grad, link, obj, weight);
  return out;
}

/// Adaptive moment estimation over the flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<double> m_, v_;
  int t_ = 0;
};

struct LossRow {
  int step = 0;
  LossBreakdown loss;
};

struct TrainResult {
  CodecParams params;
  std::vector<LossRow> trace;
};

inline LinkConfig link_for(const TrainConfig& tc, LinkConfig link) {
  link.eta = tc.eta;
  link.c_z = tc.c_z;
  return link;
}

/// Deterministic given the seed: batches, SNRs, channels and proxy noise all
/// come from one random source consumed in a fixed order.
inline TrainResult train(const TrainConfig& tc, const std::vector<Image>& dataset, CodecParams params,
                         const ChannelModel& model, LinkConfig link,
                         const std::function<void(const LossRow&)>& on_step = {}) {
  tc.validate();
  model.validate();
  require(!dataset.empty(), "train: dataset is empty");
  link = link_for(tc, link);
  Rng rng(tc.seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::uniform_real_distribution<double> snr(tc.snr_low_db, tc.snr_high_db);
  Adam opt(params.size(), tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon);
  CodecParams grad = params.zeros_like();
  TrainResult out{params, {}};
  out.trace.reserve(static_cast<std::size_t>(tc.steps));
  const double w = 1.0 / tc.batch;
  const Objective objective{tc.lambda, tc.anchor_weight};
  for (int step = 0; step < tc.steps; ++step) {
    grad.set_zero();
    LossRow row{step, {}};
    for (int b = 0; b < tc.batch; ++b) {
      const Image& x = dataset[pick(rng)];
      const ChannelRealization ch = model.sample(rng, snr_db_to_noise_power(snr(rng)));
      FrozenDraws draws = FrozenDraws::make(out.params.config(), static_cast<int>(x.size() / out.params.config().patch_dim()), rng);
      LossBreakdown l;
      try {
        l = compute_loss(x, out.params, ch, link, objective, draws, &grad, w);
      } catch (const NonFiniteError&) {
        throw TrainingDiverged(step);
      } catch (const std::exception&) {
        // Overflowed parameters surface as stage errors inside the chain.
        for (double v : out.params.flat())
          if (!std::isfinite(v)) throw TrainingDiverged(step);
        throw;
      }
      row.loss.k_y_tilde += w * l.k_y_tilde;
      row.loss.k_z_tilde += w * l.k_z_tilde;
      row.loss.distortion += w * l.distortion;
      row.loss.anchor += w * l.anchor;
      row.loss.total += w * l.total;
    }
    if (!std::isfinite(row.loss.total)) throw TrainingDiverged(step);
    for (double g : grad.flat())
      if (!std::isfinite(g)) throw TrainingDiverged(step);
    if (tc.learning_rate > 0.0) opt.step(out.params.flat(), grad.flat());
    out.trace.push_back(row);
    if (on_step) on_step(row);
  }
  return out;
}

/// Exponential moving average of the total loss trace.
inline std::vector<double> smoothed_loss(const std::vector<LossRow>& trace, double alpha = 0.02) {
  std::vector<double> out;
  double s = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    s = i == 0 ? trace[i].loss.total : (1.0 - alpha) * s + alpha * trace[i].loss.total;
    out.push_back(s);
  }
  return out;
}

inline void write_loss_csv(std::ostream& os, const std::vector<LossRow>& trace) {
  os << "step,k_y_tilde,k_z_tilde,distortion,anchor,total\n";
  os.precision(10);
  for (const auto& r : trace)
    os << r.step << ',' << r.loss.k_y_tilde << ',' << r.loss.k_z_tilde << ',' << r.loss.distortion << ','
       << r.loss.anchor << ',' << r.loss.total << '\n';
}

// ---------------------------------------------------------------------------
// Gradient check.

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double max_rel_error = 0.0;
  double median_rel_error = 0.0;
  double pass_fraction() const { return checked ? static_cast<double>(passed) / static_cast<double>(checked) : 0.0; }
};

/// |a - n| / max(|a|, |n|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of the loss over every parameter (or every `stride`-th).
inline GradCheckResult gradient_check(const Image& x, const CodecParams& params, const ChannelRealization& channel,
                                      const LinkConfig& link, const Objective& obj, const FrozenDraws& draws,
                                      double step = 1e-4, double tolerance = 1e-3, std::size_t stride = 1) {
  CodecParams grad = params.zeros_like();
  FrozenDraws d0 = draws;
  compute_loss(x, params, channel, link, obj, d0, &grad);
  CodecParams probe = params;
  GradCheckResult res;
  std::vector<double> errs;
  for (std::size_t i = 0; i < params.size(); i += stride) {
    const double orig = probe.flat()[i];
    probe.flat()[i] = orig + step;
    FrozenDraws dp = draws;
    const double lp = compute_loss(x, probe, channel, link, obj, dp).total;
    probe.flat()[i] = orig - step;
    FrozenDraws dm = draws;
    const double lm = compute_loss(x, probe, channel, link, obj, dm).total;
    probe.flat()[i] = orig;
    const double numeric = (lp - lm) / (2.0 * step);
    const double e = relative_error(grad.flat()[i], numeric);
    errs.push_back(e);
    ++res.checked;
    if (e < tolerance) ++res.passed;
    res.max_rel_error = std::max(res.max_rel_error, e);
  }
  if (!errs.empty()) {
    std::nth_element(errs.begin(), errs.begin() + static_cast<std::ptrdiff_t>(errs.size() / 2), errs.end());
    res.median_rel_error = errs[errs.size() / 2];
  }
  return res;
}

// ---------------------------------------------------------------------------
// Rate-distortion sweep over λ.

struct RdRow {
  double lambda = 0.0;
  SettingSummary summary;
};

struct RdTable {
  std::vector<RdRow> rows;  // sorted by mean CBR
  bool monotone = true;     // CBR non-increasing and MSE non-decreasing in λ
};

/// Trains one model per λ (from the same initialization) and evaluates at a fixed SNR.
inline RdTable rd_sweep(const std::vector<double>& lambdas, const TrainConfig& base, const std::vector<Image>& train_set,
                        const std::vector<Image>& test_set, const CodecParams& init, const ChannelModel& model,
                        const LinkConfig& link, double snr_db, std::uint64_t eval_seed) {
  require(lambdas.size() >= 2, "rd_sweep: need at least two lambda values");
  RdTable table;
  for (double lam : lambdas) {
    TrainConfig tc = base;
    tc.lambda = lam;
    const TrainResult tr = train(tc, train_set, init, model, link);
    RdRow row;
    row.lambda = lam;
    row.summary = evaluate_items(test_set, tr.params, model, link_for(tc, link), snr_db, eval_seed).first;
    table.rows.push_back(row);
  }
  std::vector<RdRow> by_lambda = table.rows;
  std::sort(by_lambda.begin(), by_lambda.end(), [](const RdRow& a, const RdRow& b) { return a.lambda < b.lambda; });
  for (std::size_t i = 1; i < by_lambda.size(); ++i) {
    if (by_lambda[i].summary.cbr.mean > by_lambda[i - 1].summary.cbr.mean) table.monotone = false;
    if (by_lambda[i].summary.mse.mean < by_lambda[i - 1].summary.mse.mean) table.monotone = false;
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const RdRow& a, const RdRow& b) { return a.summary.cbr.mean < b.summary.cbr.mean; });
  return table;
}

}  // namespace vstmimo
