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

// Experiment orchestration behind the command line tool: checkpoints,
// training runs, sweeps and the files they write.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/KroneckerProduct>

#include "vstmimo/config.hpp"
#include "vstmimo/dataset.hpp"
#include "vstmimo/evaluate.hpp"
#include "vstmimo/metrics.hpp"
#include "vstmimo/training.hpp"

namespace vstmimo {

namespace fs = std::filesystem;

/// Shortest round-trippable text for CSV and .dat files.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Checkpoints.

/// Trains from scratch, writes the checkpoint and the loss trace, and returns
/// the parameters as read back (float32), so later loads give identical results.
inline CodecParams train_and_save(const ExperimentConfig& cfg, const TrainConfig& tc, const std::string& path,
                                  std::ostream& log) {
  const auto data = load_dataset(cfg.train_data, cfg.codec.patch, log);
  log << "info: training " << tc.steps << " steps (lambda " << tc.lambda << ", eta " << tc.eta << ") -> " << path
      << '\n';
  const auto result = train(tc, data, init_params(cfg.codec, tc.seed), cfg.channel, cfg.link(),
                            [&](const LossRow& r) {
                              if ((r.step + 1) % 500 == 0)
                                log << "info: step " << r.step + 1 << " loss " << r.loss.total << '\n';
                            });
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  save_checkpoint(path, result.params);
  auto trace = open_out(fs::path(path).replace_extension(".loss.csv"));
  write_loss_csv(trace, result.trace);
  return load_checkpoint(path);
}

/// Loads `path`, or trains it when allowed. A missing checkpoint with
/// training disabled is an error naming the expected file.
inline CodecParams obtain_params(const ExperimentConfig& cfg, const TrainConfig& tc, const std::string& path,
                                 std::ostream& log) {
  if (fs::exists(path)) {
    CodecParams p = load_checkpoint(path);
    require(codec_config_to_json(p.config()) == codec_config_to_json(cfg.codec),
            "checkpoint " + path + " was trained with a different codec configuration");
    return p;
  }
  if (!cfg.train_on_demand)
    throw ValidationError("missing checkpoint: expected " + path +
                          "; run `vstmimo train` with this config first or set \"train_on_demand\": true");
  return train_and_save(cfg, tc, path, log);
}

/// Checkpoint used by the cbr sweep for one λ.
inline std::string lambda_checkpoint(const ExperimentConfig& cfg, double lambda) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "model_lambda_%g.ckpt", lambda);
  return (fs::path(cfg.output_dir) / buf).string();
}

// ---------------------------------------------------------------------------
// Report files.

inline constexpr const char* kResultsHeader =
    "# vstmimo results, one row per setting.\n"
    "# columns: mode, setting (snr_db or lambda), snr_db, lambda, items,\n"
    "#   psnr_mean, psnr_stderr (dB), ms_ssim_mean, ms_ssim_stderr, mse_mean, mse_stderr,\n"
    "#   cbr_mean, cbr_stderr, k_y_mean, k_z_mean (channel symbols), monotone_ok\n";

inline constexpr const char* kItemsHeader =
    "# vstmimo per-item report.\n"
    "# columns: setting, item, snr_db, psnr, ms_ssim, mse, cbr, k_y, k_z, overhead_bits,\n"
    "#   capacities (per stream, ';' separated, bits/symbol), realized_snr_db, tx_power\n";

struct SweepRow {
  std::string mode;
  double setting = 0.0;
  double lambda = 0.0;
  SettingSummary summary;
  bool monotone_ok = true;  // versus the previous row in sweep order
};

struct SweepReport {
  std::vector<SweepRow> rows;
  bool monotone = true;
  std::vector<std::string> files;
};

inline void write_item_rows(std::ostream& os, double setting, const std::vector<ReportRow>& rows) {
  for (const auto& r : rows) {
    os << num(setting) << ',' << r.item << ',' << num(r.snr_db) << ',' << num(r.psnr) << ',' << num(r.ms_ssim) << ','
       << num(r.mse) << ',' << num(r.cbr) << ',' << num(r.k_y) << ',' << num(r.k_z) << ',' << r.overhead_bits << ',';
    for (std::size_t t = 0; t < r.capacities.size(); ++t) os << (t ? ";" : "") << num(r.capacities[t]);
    os << ',' << num(r.realized_snr_db) << ',' << num(r.tx_power) << '\n';
  }
}

inline void write_results_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kResultsHeader;
  os << "mode,setting,snr_db,lambda,items,psnr_mean,psnr_stderr,ms_ssim_mean,ms_ssim_stderr,mse_mean,mse_stderr,"
        "cbr_mean,cbr_stderr,k_y_mean,k_z_mean,monotone_ok\n";
  for (const auto& r : rows) {
    const auto& s = r.summary;
    os << r.mode << ',' << num(r.setting) << ',' << num(s.snr_db) << ',' << num(r.lambda) << ',' << s.items << ','
       << num(s.psnr.mean) << ',' << num(s.psnr.stderr_) << ',' << num(s.ms_ssim.mean) << ','
       << num(s.ms_ssim.stderr_) << ',' << num(s.mse.mean) << ',' << num(s.mse.stderr_) << ',' << num(s.cbr.mean)
       << ',' << num(s.cbr.stderr_) << ',' << num(s.k_y.mean) << ',' << num(s.k_z.mean) << ','
       << (r.monotone_ok ? 1 : 0) << '\n';
  }
}

inline nlohmann::json summary_json(const SettingSummary& s) {
  auto agg = [](const Aggregate& a) { return nlohmann::json{{"mean", a.mean}, {"stderr", a.stderr_}}; };
  return {{"snr_db", s.snr_db},    {"items", s.items},   {"psnr", agg(s.psnr)}, {"ms_ssim", agg(s.ms_ssim)},
          {"mse", agg(s.mse)},     {"cbr", agg(s.cbr)},  {"k_y", agg(s.k_y)},   {"k_z", agg(s.k_z)}};
}

// ---------------------------------------------------------------------------
// Subcommands.

/// `train`: fits the codec at the configured λ and writes the checkpoint.
inline CodecParams run_train(const ExperimentConfig& cfg, std::ostream& log = std::clog) {
  const std::string path = cfg.checkpoint_path();
  CodecParams p = train_and_save(cfg, cfg.train, path, log);
  write_json(fs::path(cfg.output_dir) / "config.resolved.json", experiment_to_json(cfg));
  return p;
}

/// `evaluate`: one pass over the test set at a single SNR.
inline SettingSummary run_evaluate(const ExperimentConfig& cfg, double snr_db, std::ostream& log = std::clog) {
  const CodecParams p = obtain_params(cfg, cfg.train, cfg.checkpoint_path(), log);
  auto test = load_dataset(cfg.test_data, cfg.codec.patch, log);
  if (test.size() > cfg.eval_items) test.resize(cfg.eval_items);
  const fs::path out = cfg.output_dir;
  const auto [summary, rows] = evaluate_items(test, p, cfg.channel, cfg.link(), snr_db, cfg.seed);

  auto items = open_out(out / "items.csv");
  items << kItemsHeader << "setting,item,snr_db,psnr,ms_ssim,mse,cbr,k_y,k_z,overhead_bits,capacities,realized_snr_db,"
                           "tx_power\n";
  write_item_rows(items, snr_db, rows);

  // Allocation and reconstruction of the first item, same seed as in the table.
  Rng rng(mix_seed(cfg.seed, 0));
  const auto first = transmit_one(test.front(), p, cfg.channel, cfg.link(), snr_db, rng);
  auto alloc = open_out(out / "allocation.csv");
  write_allocation_csv(alloc, first.alloc);
  write_png((out / "item0_source.png").string(), test.front());
  write_png((out / "item0_recon.png").string(), first.x_hat);

  write_json(out / "summary.json", {{"command", "evaluate"},
                                    {"ms_ssim_scales", ms_ssim_scales(std::min(test.front().height, test.front().width))},
                                    {"result", summary_json(summary)},
                                    {"config", experiment_to_json(cfg)}});
  return summary;
}

inline void log_scales(const std::vector<Image>& test, std::ostream& log) {
  const int side = std::min(test.front().height, test.front().width);
  const int scales = ms_ssim_scales(side);
  if (scales < 5) log << "warning: MS-SSIM uses " << scales << " of 5 scales for " << side << "-pixel images\n";
}

/// `sweep --mode snr`: one model over the SNR grid. `--mode cbr`: one model
/// per λ at a fixed SNR, rows sorted by CBR.
inline SweepReport run_sweep(const ExperimentConfig& cfg, const std::string& mode, std::ostream& log = std::clog) {
  require(mode == "snr" || mode == "cbr", "sweep: mode must be 'snr' or 'cbr'");
  auto test = load_dataset(cfg.test_data, cfg.codec.patch, log);
  if (test.size() > cfg.eval_items) test.resize(cfg.eval_items);
  log_scales(test, log);
  const fs::path out = cfg.output_dir;
  SweepReport rep;

  auto items = open_out(out / ("items_" + mode + ".csv"));
  items << kItemsHeader << "setting,item,snr_db,psnr,ms_ssim,mse,cbr,k_y,k_z,overhead_bits,capacities,realized_snr_db,"
                           "tx_power\n";

  if (mode == "snr") {
    const CodecParams p = obtain_params(cfg, cfg.train, cfg.checkpoint_path(), log);
    std::vector<double> grid = cfg.snr_db;
    for (double snr : grid) {
      const auto [s, rows] = evaluate_items(test, p, cfg.channel, cfg.link(), snr, cfg.seed);
      write_item_rows(items, snr, rows);
      SweepRow row{"snr", snr, cfg.train.lambda, s, true};
      if (!rep.rows.empty() && s.psnr.mean < rep.rows.back().summary.psnr.mean) {
        row.monotone_ok = false;
        rep.monotone = false;
        log << "warning: mean PSNR decreases from " << rep.rows.back().setting << " dB to " << snr << " dB\n";
      }
      rep.rows.push_back(row);
    }
  } else {
    std::vector<double> lambdas = cfg.lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    for (double lam : lambdas) {
      TrainConfig tc = cfg.train;
      tc.lambda = lam;
      ExperimentConfig c = cfg;
      c.train = tc;
      const CodecParams p = obtain_params(c, tc, lambda_checkpoint(cfg, lam), log);
      const auto [s, rows] = evaluate_items(test, p, cfg.channel, c.link(), cfg.cbr_snr_db, cfg.seed);
      write_item_rows(items, lam, rows);
      SweepRow row{"cbr", lam, lam, s, true};
      if (!rep.rows.empty()) {
        const auto& prev = rep.rows.back().summary;
        if (s.cbr.mean > prev.cbr.mean || s.mse.mean < prev.mse.mean) {
          row.monotone_ok = false;
          rep.monotone = false;
          log << "warning: rate-distortion ordering violated at lambda " << lam << '\n';
        }
      }
      rep.rows.push_back(row);
    }
    std::stable_sort(rep.rows.begin(), rep.rows.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.summary.cbr.mean < b.summary.cbr.mean; });
  }
  rep.files.push_back((out / ("items_" + mode + ".csv")).string());

  const fs::path results = out / "results.csv";
  {
    auto os = open_out(results);
    write_results_csv(os, rep.rows);
  }
  rep.files.push_back(results.string());

  const fs::path dat = out / ("sweep_" + mode + ".dat");
  {
    auto os = open_out(dat);
    if (mode == "snr")
      os << "# snr_db psnr psnr_stderr ms_ssim ms_ssim_stderr cbr\n";
    else
      os << "# cbr psnr psnr_stderr ms_ssim ms_ssim_stderr lambda\n";
    for (const auto& r : rep.rows) {
      const auto& s = r.summary;
      os << num(mode == "snr" ? r.setting : s.cbr.mean) << ' ' << num(s.psnr.mean) << ' ' << num(s.psnr.stderr_)
         << ' ' << num(s.ms_ssim.mean) << ' ' << num(s.ms_ssim.stderr_) << ' '
         << num(mode == "snr" ? s.cbr.mean : r.lambda) << '\n';
    }
  }
  rep.files.push_back(dat.string());

  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    auto j = summary_json(r.summary);
    j["setting"] = r.setting;
    j["lambda"] = r.lambda;
    j["monotone_ok"] = r.monotone_ok;
    jrows.push_back(j);
  }
  const fs::path summary = out / "summary.json";
  write_json(summary, {{"command", "sweep"},
                       {"mode", mode},
                       {"monotone", rep.monotone},
                       {"ms_ssim_scales", ms_ssim_scales(std::min(test.front().height, test.front().width))},
                       {"rows", jrows},
                       {"config", experiment_to_json(cfg)}});
  rep.files.push_back(summary.string());
  return rep;
}

/// `channel-stats`: empirical vec(H) covariance of subcarrier 0 against its
/// model value, plus per-sample post-ZF SINR and capacity.
inline std::vector<std::string> run_channel_stats(const ExperimentConfig& cfg, std::size_t samples,
                                                  std::ostream& log = std::clog) {
  require(samples >= 2, "channel-stats: need at least two samples");
  const auto& model = cfg.channel;
  const auto nr = static_cast<Eigen::Index>(model.n_r), nt = static_cast<Eigen::Index>(model.n_t);
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(nr * nt, nr * nt);
  const fs::path out = cfg.output_dir;
  auto sinr = open_out(out / "channel_sinr.csv");
  sinr << "# columns: sample, snr_db, stream, sinr_db, capacity (bits/symbol, subcarrier mean), cqi_index\n"
       << "sample,snr_db,stream,sinr_db,capacity,cqi_index\n";
  Rng rng(cfg.seed);
  for (std::size_t n = 0; n < samples; ++n) {
    const auto real = model.sample(rng, 1.0);
    const Eigen::MatrixXcd& h = real.h.front();
    const Eigen::VectorXcd v = Eigen::Map<const Eigen::VectorXcd>(h.data(), h.size());
    acc += v * v.adjoint();
    for (double snr : cfg.snr_db) {
      ChannelRealization r = real;
      r.noise_power = snr_db_to_noise_power(snr);
      try {
        const auto cqi = ZeroForcing(r, cfg.n_s).cqi(cfg.codec.cqi_levels);
        for (std::size_t t = 0; t < cfg.n_s; ++t)
          sinr << n << ',' << num(snr) << ',' << t + 1 << ',' << num(10.0 * std::log10(cqi.per_stream_sinr[t])) << ','
               << num(cqi.per_stream_capacity[t]) << ',' << cqi.quantized_cqi[t] << '\n';
      } catch (const DetectionError& e) {
        log << "warning: sample " << n << ": " << e.what() << '\n';
      }
    }
  }
  acc /= static_cast<double>(samples);
  Eigen::MatrixXcd expected;
  if (model.kind == ChannelModel::Kind::kKronecker)
    expected = Eigen::kroneckerProduct(model.kronecker.r_tx.transpose(), model.kronecker.r_rx);
  else
    expected = Eigen::MatrixXcd::Identity(nr * nt, nr * nt);
  auto cov = open_out(out / "channel_covariance.csv");
  cov << "# vec(H) covariance on subcarrier 0 over " << samples << " samples\n"
      << "# columns: row, col, empirical_re, empirical_im, model_re, model_im, abs_error\n"
      << "row,col,empirical_re,empirical_im,model_re,model_im,abs_error\n";
  double worst = 0.0;
  for (Eigen::Index i = 0; i < acc.rows(); ++i)
    for (Eigen::Index j = 0; j < acc.cols(); ++j) {
      const double err = std::abs(acc(i, j) - expected(i, j));
      worst = std::max(worst, err);
      cov << i << ',' << j << ',' << num(acc(i, j).real()) << ',' << num(acc(i, j).imag()) << ','
          << num(expected(i, j).real()) << ',' << num(expected(i, j).imag()) << ',' << num(err) << '\n';
    }
  log << "info: max covariance error " << worst << " over " << samples << " samples\n";
  return {(out / "channel_covariance.csv").string(), (out / "channel_sinr.csv").string()};
}

struct GradCheckPoint {
  std::uint64_t seed = 0;
  bool side_info = true;
  GradCheckResult result;
};

/// `gradcheck`: central differences on the tiny configuration at random points.
inline std::vector<GradCheckPoint> run_gradcheck(std::uint64_t seed, int points, double anchor_weight,
                                                 const fs::path& out_dir, std::ostream& log = std::clog) {
  const CodecConfig tiny = tiny_codec_config();
  const auto model = ChannelModel::reference_kronecker();
  SyntheticSpec spec;
  spec.size = tiny.height;
  spec.count = points;
  spec.seed = seed;
  std::vector<GradCheckPoint> res;
  for (int k = 0; k < points; ++k) {
    GradCheckPoint pt;
    pt.seed = mix_seed(seed, static_cast<std::uint64_t>(k));
    pt.side_info = k % 2 == 0;
    Rng rng(pt.seed);
    const CodecParams p = init_params(tiny, rng());
    const Image x = synthetic_image(spec, static_cast<std::size_t>(k));
    std::uniform_real_distribution<double> snr(0.0, 15.0);
    const auto ch = model.sample(rng, snr_db_to_noise_power(snr(rng)));
    const auto draws = FrozenDraws::make(tiny, rng);
    LinkConfig link;
    link.transmit_side_info = pt.side_info;
    pt.result = gradient_check(x, p, ch, link, Objective{0.01, anchor_weight}, draws);
    log << "info: point " << k << " pass " << pt.result.pass_fraction() << " max rel error "
        << pt.result.max_rel_error << '\n';
    res.push_back(pt);
  }
  if (!out_dir.empty()) {
    auto os = open_out(out_dir / "gradcheck.csv");
    os << "# columns: point, seed, side_info, checked, passed, pass_fraction, max_rel_error, median_rel_error\n"
       << "point,seed,side_info,checked,passed,pass_fraction,max_rel_error,median_rel_error\n";
    for (std::size_t k = 0; k < res.size(); ++k) {
      const auto& r = res[k].result;
      os << k << ',' << res[k].seed << ',' << res[k].side_info << ',' << r.checked << ',' << r.passed << ','
         << num(r.pass_fraction()) << ',' << num(r.max_rel_error) << ',' << num(r.median_rel_error) << '\n';
    }
  }
  return res;
}

}  // namespace vstmimo
