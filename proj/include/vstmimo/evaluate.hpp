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

// Inference-time transmission of single items and aggregate statistics.

#pragma once

#include <cmath>
#include <vector>

#include "vstmimo/channel.hpp"
#include "vstmimo/codec.hpp"
#include "vstmimo/metrics.hpp"
#include "vstmimo/pipeline.hpp"

namespace vstmimo {

/// One row of a transmission report.
struct ReportRow {
  std::size_t item = 0;
  double snr_db = 0.0;
  double psnr = 0.0;
  double ms_ssim = 0.0;
  double mse = 0.0;
  double cbr = 0.0;
  double k_y = 0.0;
  double k_z = 0.0;
  long long overhead_bits = 0;
  std::vector<double> capacities;  // per stream, bits per complex symbol
  double realized_snr_db = 0.0;    // mean transmit power over noise power
  double tx_power = 0.0;
};

struct Transmission {
  Image x_hat;
  ReportRow row;
  RateAllocation alloc;
};

inline Transmission finish_transmission(const Image& x, const CodecParams& p, const PassState& st, double snr_db,
                                        double noise_power) {
  Transmission out;
  out.x_hat = assemble_patches(st.x_hat, x.height, x.width, x.channels, p.config().patch);
  auto& r = out.row;
  r.snr_db = snr_db;
  r.mse = mse(x, out.x_hat);
  r.psnr = psnr_from_mse(r.mse);
  r.ms_ssim = ms_ssim(x, out.x_hat);
  r.cbr = st.cbr;
  r.k_y = st.k_y;
  r.k_z = st.k_z;
  r.overhead_bits = st.overhead;
  r.capacities = st.cqi.per_stream_capacity;
  r.tx_power = st.tx_mean_power;
  out.alloc = st.alloc;
  r.realized_snr_db = noise_power > 0.0 ? 10.0 * std::log10(st.tx_mean_power / noise_power) : kPsnrCapDb;
  return out;
}

/// Full chain at inference; noise power taken from `snr_db` under unit transmit power.
inline Transmission transmit_one(const Image& x, const CodecParams& p, const ChannelModel& model,
                                 const LinkConfig& link, double snr_db, Rng& rng) {
  const double noise_power = std::isinf(snr_db) ? 0.0 : snr_db_to_noise_power(snr_db);
  const ChannelRealization ch = model.sample(rng, noise_power);
  FrozenDraws draws = FrozenDraws::make(p.config(), static_cast<int>(x.size() / p.config().patch_dim()), rng);
  const PassState st = run_pipeline(x, p, ch, link, Mode::kEval, draws);
  return finish_transmission(x, p, st, snr_db, noise_power);
}

struct Aggregate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline Aggregate aggregate(const std::vector<double>& v) {
  Aggregate a;
  if (v.empty()) return a;
  double s = 0.0;
  for (double x : v) s += x;
  a.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return a;
}

struct SettingSummary {
  double snr_db = 0.0;
  Aggregate psnr, ms_ssim, mse, cbr, k_y, k_z;
  std::size_t items = 0;
};

/// Transmits every item once at `snr_db`; item i uses seed mix(master, i).
inline std::pair<SettingSummary, std::vector<ReportRow>> evaluate_items(const std::vector<Image>& items,
                                                                       const CodecParams& p,
                                                                       const ChannelModel& model,
                                                                       const LinkConfig& link, double snr_db,
                                                                       std::uint64_t master_seed) {
  std::vector<ReportRow> rows;
  rows.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    Rng rng(mix_seed(master_seed, i));
    auto t = transmit_one(items[i], p, model, link, snr_db, rng);
    t.row.item = i;
    rows.push_back(std::move(t.row));
  }
  auto column = [&](auto f) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(f(r));
    return aggregate(v);
  };
  SettingSummary s;
  s.snr_db = snr_db;
  s.items = rows.size();
  s.psnr = column([](const ReportRow& r) { return r.psnr; });
  s.ms_ssim = column([](const ReportRow& r) { return r.ms_ssim; });
  s.mse = column([](const ReportRow& r) { return r.mse; });
  s.cbr = column([](const ReportRow& r) { return r.cbr; });
  s.k_y = column([](const ReportRow& r) { return r.k_y; });
  s.k_z = column([](const ReportRow& r) { return r.k_z; });
  return {s, rows};
}

}  // namespace vstmimo
