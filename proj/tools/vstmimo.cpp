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

// Command line front end: train, evaluate, sweep, channel-stats, gradcheck.

#include <cmath>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vstmimo/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (JSON, schema version 1)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed; overrides the config");
  cmd->add_option("--out", c.out, "Output directory; overrides the config");
}

vstmimo::ExperimentConfig resolve(const Common& c) {
  vstmimo::ExperimentConfig cfg = c.config.empty() ? vstmimo::ExperimentConfig{} : vstmimo::load_experiment(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  if (!c.out.empty()) {
    // A checkpoint left at its default follows the output directory.
    const bool default_ckpt = cfg.checkpoint.empty() ||
                              cfg.checkpoint == (std::filesystem::path(cfg.output_dir) / "model.ckpt").string();
    cfg.output_dir = c.out;
    if (default_ckpt) cfg.checkpoint.clear();
  }
  return cfg;
}

void print_summary(const vstmimo::SettingSummary& s) {
  std::cout << "snr_db " << s.snr_db << "  items " << s.items << "  psnr " << s.psnr.mean << " +- " << s.psnr.stderr_
            << " dB  ms_ssim " << s.ms_ssim.mean << "  cbr " << s.cbr.mean << "  k_y " << s.k_y.mean << "  k_z "
            << s.k_z.mean << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic coded transmission over MIMO fading channels"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, sweep_opts, stats_opts, grad_opts;

  auto* train_cmd = app.add_subcommand("train", "Train the codec and write a checkpoint");
  add_common(train_cmd, train_opts);
  std::optional<int> steps;
  train_cmd->add_option("--steps", steps, "Override train.steps");

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test set at one SNR");
  add_common(eval_cmd, eval_opts);
  std::optional<double> eval_snr;
  eval_cmd->add_option("--snr", eval_snr, "SNR in dB (default: first entry of snr_db)");

  auto* sweep_cmd = app.add_subcommand("sweep", "SNR sweep or rate-distortion (CBR) sweep");
  add_common(sweep_cmd, sweep_opts);
  std::string mode = "snr";
  sweep_cmd->add_option("--mode", mode, "snr or cbr")->check(CLI::IsMember({"snr", "cbr"}));

  auto* stats_cmd = app.add_subcommand("channel-stats", "Empirical channel covariance and post-ZF SINR as CSV");
  add_common(stats_cmd, stats_opts, false);
  std::size_t samples = 100000;
  stats_cmd->add_option("--samples", samples, "Number of channel draws");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the training gradient");
  add_common(grad_cmd, grad_opts, false);
  int points = 5;
  double anchor = 0.0;
  grad_cmd->add_option("--points", points, "Random parameter points");
  grad_cmd->add_option("--anchor-weight", anchor, "Weight of the anchor term in the checked loss");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      auto cfg = resolve(train_opts);
      if (steps) cfg.train.steps = *steps;
      vstmimo::run_train(cfg);
      std::cout << "checkpoint " << cfg.checkpoint_path() << '\n';
    } else if (*eval_cmd) {
      const auto cfg = resolve(eval_opts);
      print_summary(vstmimo::run_evaluate(cfg, eval_snr.value_or(cfg.snr_db.front())));
    } else if (*sweep_cmd) {
      const auto cfg = resolve(sweep_opts);
      const auto rep = vstmimo::run_sweep(cfg, mode);
      for (const auto& r : rep.rows) {
        if (mode == "cbr") std::cout << "lambda " << r.lambda << "  ";
        print_summary(r.summary);
      }
      std::cout << (rep.monotone ? "ordering ok" : "ordering VIOLATED (see warnings)") << '\n';
      for (const auto& f : rep.files) std::cout << "wrote " << f << '\n';
    } else if (*stats_cmd) {
      const auto cfg = resolve(stats_opts);
      for (const auto& f : vstmimo::run_channel_stats(cfg, samples)) std::cout << "wrote " << f << '\n';
    } else if (*grad_cmd) {
      const auto cfg = resolve(grad_opts);
      const auto res = vstmimo::run_gradcheck(cfg.seed, points, anchor, cfg.output_dir);
      bool ok = true;
      for (std::size_t k = 0; k < res.size(); ++k) {
        const auto& r = res[k].result;
        std::cout << "point " << k << " side_info " << res[k].side_info << " checked " << r.checked << " pass "
                  << r.pass_fraction() << " max_rel " << r.max_rel_error << '\n';
        ok = ok && r.pass_fraction() >= 0.99;
      }
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
