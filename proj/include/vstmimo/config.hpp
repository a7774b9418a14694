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

// Experiment configuration, schema version 1. See docs/config.md.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vstmimo/channel.hpp"
#include "vstmimo/codec.hpp"
#include "vstmimo/common.hpp"
#include "vstmimo/dataset.hpp"
#include "vstmimo/pipeline.hpp"
#include "vstmimo/training.hpp"

namespace vstmimo {

inline constexpr int kConfigSchemaVersion = 1;

/// Either the synthetic generator or a directory of images.
struct DatasetSpec {
  enum class Kind { kSynthetic, kDirectory };
  Kind kind = Kind::kSynthetic;
  SyntheticSpec synthetic{};
  std::string path;
};

struct ExperimentConfig {
  ChannelModel channel = ChannelModel::reference_kronecker();
  std::size_t n_s = 2;
  std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0};
  CodecConfig codec{};
  TrainConfig train{};
  DatasetSpec train_data{};
  DatasetSpec test_data{};
  std::size_t eval_items = 200;
  double cbr_snr_db = 10.0;                 // fixed SNR of cbr sweeps
  std::vector<double> lambdas{1e-3, 1e-2, 1e-1};
  std::string output_dir = "out";
  std::uint64_t seed = 1;                   // evaluation master seed
  bool transmit_side_info = true;
  bool count_overhead_in_cbr = false;
  std::string checkpoint;                   // empty: <output_dir>/model.ckpt
  bool train_on_demand = true;

  ExperimentConfig() {
    train_data.synthetic.count = 1024;
    test_data.synthetic.seed = 99;
    test_data.synthetic.count = 200;
  }

  LinkConfig link() const {
    LinkConfig l;
    l.n_t = channel.n_t;
    l.n_s = n_s;
    l.eta = train.eta;
    l.c_z = train.c_z;
    l.transmit_side_info = transmit_side_info;
    l.count_overhead_in_cbr = count_overhead_in_cbr;
    return l;
  }

  std::string checkpoint_path() const {
    if (!checkpoint.empty()) return checkpoint;
    return (std::filesystem::path(output_dir) / "model.ckpt").string();
  }

  void validate() const {
    channel.validate();
    require(n_s >= 1 && n_s <= std::min(channel.n_t, channel.n_r), "config: n_s must satisfy 1 <= n_s <= min(n_t, n_r)");
    require(!snr_db.empty(), "config: snr_db list is empty");
    codec.validate();
    train.validate();
    require(eval_items >= 1, "config: eval.items must be >= 1");
    require(lambdas.size() >= 2, "config: sweep.lambdas needs at least two values");
    for (const DatasetSpec* d : {&train_data, &test_data}) {
      if (d->kind == DatasetSpec::Kind::kDirectory)
        require(std::filesystem::is_directory(d->path), "config: dataset directory does not exist: " + d->path);
      else
        d->synthetic.validate();
    }
  }
};

namespace detail {

template <class T>
void get_opt(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

inline Eigen::MatrixXcd real_matrix(const nlohmann::json& j, const char* what) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  require(!rows.empty(), std::string("config: empty matrix ") + what);
  Eigen::MatrixXcd m(rows.size(), rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == rows.size(), std::string("config: matrix must be square: ") + what);
    for (std::size_t c = 0; c < rows.size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

inline nlohmann::json matrix_json(const Eigen::MatrixXcd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c).real());
    out.push_back(row);
  }
  return out;
}

inline DatasetSpec dataset_from_json(const nlohmann::json& j, DatasetSpec d, const std::filesystem::path& base) {
  const std::string kind = j.value("kind", "synthetic");
  if (kind == "directory") {
    d.kind = DatasetSpec::Kind::kDirectory;
    std::filesystem::path p = j.at("path").get<std::string>();
    d.path = (p.is_relative() ? base / p : p).string();
  } else if (kind == "synthetic") {
    d.kind = DatasetSpec::Kind::kSynthetic;
    auto& s = d.synthetic;
    get_opt(j, "size", s.size);
    get_opt(j, "rho", s.rho);
    get_opt(j, "count", s.count);
    get_opt(j, "seed", s.seed);
    get_opt(j, "channels", s.channels);
    get_opt(j, "contrast", s.contrast);
    get_opt(j, "shared", s.shared);
  } else {
    throw ValidationError("config: unknown dataset kind '" + kind + "'");
  }
  return d;
}

inline nlohmann::json dataset_json(const DatasetSpec& d) {
  if (d.kind == DatasetSpec::Kind::kDirectory) return {{"kind", "directory"}, {"path", d.path}};
  const auto& s = d.synthetic;
  return {{"kind", "synthetic"}, {"size", s.size},     {"rho", s.rho},         {"count", s.count},
          {"seed", s.seed},      {"channels", s.channels}, {"contrast", s.contrast}, {"shared", s.shared}};
}

}  // namespace detail

/// Relative paths resolve against `base` (the config file's directory).
inline ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  using detail::get_opt;
  require(j.is_object(), "config: top level must be an object");
  require(j.value("schema_version", 0) == kConfigSchemaVersion,
          "config: schema_version must be " + std::to_string(kConfigSchemaVersion));
  ExperimentConfig c;
  get_opt(j, "seed", c.seed);
  get_opt(j, "snr_db", c.snr_db);
  if (j.contains("output_dir")) {
    std::filesystem::path p = j.at("output_dir").get<std::string>();
    c.output_dir = (p.is_relative() ? base / p : p).lexically_normal().string();
  }
  if (j.contains("checkpoint")) {
    std::filesystem::path p = j.at("checkpoint").get<std::string>();
    c.checkpoint = (p.is_relative() ? base / p : p).lexically_normal().string();
  }
  get_opt(j, "train_on_demand", c.train_on_demand);

  if (j.contains("channel")) {
    const auto& ch = j.at("channel");
    const std::string kind = ch.value("kind", "kronecker");
    get_opt(ch, "n_t", c.channel.n_t);
    get_opt(ch, "n_r", c.channel.n_r);
    get_opt(ch, "n_c", c.channel.n_c);
    c.n_s = c.channel.n_t;
    get_opt(ch, "n_s", c.n_s);
    if (kind == "kronecker") {
      c.channel.kind = ChannelModel::Kind::kKronecker;
      if (ch.contains("r_tx")) c.channel.kronecker.r_tx = detail::real_matrix(ch.at("r_tx"), "r_tx");
      else if (c.channel.n_t != 2) c.channel.kronecker.r_tx = Eigen::MatrixXcd::Identity(c.channel.n_t, c.channel.n_t);
      if (ch.contains("r_rx")) c.channel.kronecker.r_rx = detail::real_matrix(ch.at("r_rx"), "r_rx");
      else if (c.channel.n_r != 2) c.channel.kronecker.r_rx = Eigen::MatrixXcd::Identity(c.channel.n_r, c.channel.n_r);
    } else if (kind == "wideband") {
      c.channel.kind = ChannelModel::Kind::kWideband;
      if (ch.contains("power_profile")) {
        c.channel.power_profile = ch.at("power_profile").get<std::vector<double>>();
      } else {
        const std::size_t taps = ch.value("taps", std::size_t{8});
        const double decay = ch.value("decay", 0.0);
        c.channel.power_profile = decay > 0.0 ? exponential_profile(taps, decay) : uniform_profile(taps);
      }
    } else {
      throw ValidationError("config: unknown channel kind '" + kind + "'");
    }
  }

  if (j.contains("codec")) c.codec = codec_config_from_json(j.at("codec"), c.codec);
  if (j.contains("quantizer")) c.codec = codec_config_from_json({{"quantizer", j.at("quantizer")}}, c.codec);
  if (j.contains("cqi_levels")) c.codec = codec_config_from_json({{"cqi_levels", j.at("cqi_levels")}}, c.codec);

  if (j.contains("train")) {
    const auto& t = j.at("train");
    auto& tc = c.train;
    get_opt(t, "lambda", tc.lambda);
    get_opt(t, "eta", tc.eta);
    get_opt(t, "c_z", tc.c_z);
    get_opt(t, "learning_rate", tc.learning_rate);
    get_opt(t, "beta1", tc.beta1);
    get_opt(t, "beta2", tc.beta2);
    get_opt(t, "epsilon", tc.epsilon);
    get_opt(t, "steps", tc.steps);
    get_opt(t, "batch", tc.batch);
    get_opt(t, "seed", tc.seed);
    get_opt(t, "anchor_weight", tc.anchor_weight);
    if (t.contains("snr_range_db")) {
      const auto r = t.at("snr_range_db").get<std::vector<double>>();
      require(r.size() == 2, "config: train.snr_range_db must have two entries");
      tc.snr_low_db = r[0];
      tc.snr_high_db = r[1];
    }
  }

  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    if (d.contains("train")) c.train_data = detail::dataset_from_json(d.at("train"), c.train_data, base);
    if (d.contains("test")) c.test_data = detail::dataset_from_json(d.at("test"), c.test_data, base);
  }
  if (j.contains("eval")) {
    get_opt(j.at("eval"), "items", c.eval_items);
  }
  if (j.contains("sweep")) {
    get_opt(j.at("sweep"), "lambdas", c.lambdas);
    get_opt(j.at("sweep"), "cbr_snr_db", c.cbr_snr_db);
  }
  if (j.contains("flags")) {
    get_opt(j.at("flags"), "transmit_side_info", c.transmit_side_info);
    get_opt(j.at("flags"), "count_overhead_in_cbr", c.count_overhead_in_cbr);
  }
  c.validate();
  return c;
}

inline nlohmann::json experiment_to_json(const ExperimentConfig& c) {
  nlohmann::json ch = {{"n_t", c.channel.n_t}, {"n_r", c.channel.n_r}, {"n_s", c.n_s}, {"n_c", c.channel.n_c}};
  if (c.channel.kind == ChannelModel::Kind::kKronecker) {
    ch["kind"] = "kronecker";
    ch["r_tx"] = detail::matrix_json(c.channel.kronecker.r_tx);
    ch["r_rx"] = detail::matrix_json(c.channel.kronecker.r_rx);
  } else {
    ch["kind"] = "wideband";
    ch["power_profile"] = c.channel.power_profile;
  }
  const auto& t = c.train;
  nlohmann::json out = {
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"checkpoint", c.checkpoint_path()},
      {"train_on_demand", c.train_on_demand},
      {"channel", ch},
      {"snr_db", c.snr_db},
      {"codec", codec_config_to_json(c.codec)},
      {"train",
       {{"lambda", t.lambda},
        {"eta", t.eta},
        {"c_z", t.c_z},
        {"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"epsilon", t.epsilon},
        {"steps", t.steps},
        {"batch", t.batch},
        {"seed", t.seed},
        {"anchor_weight", t.anchor_weight},
        {"snr_range_db", {t.snr_low_db, t.snr_high_db}}}},
      {"dataset", {{"train", detail::dataset_json(c.train_data)}, {"test", detail::dataset_json(c.test_data)}}},
      {"eval", {{"items", c.eval_items}}},
      {"sweep", {{"lambdas", c.lambdas}, {"cbr_snr_db", c.cbr_snr_db}}},
      {"flags", {{"transmit_side_info", c.transmit_side_info}, {"count_overhead_in_cbr", c.count_overhead_in_cbr}}}};
  return out;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config: " + path + ": " + e.what());
  }
  return experiment_from_json(j, std::filesystem::path(path).parent_path());
}

/// Materializes a dataset; directory images are cropped to the patch grid.
inline std::vector<Image> load_dataset(const DatasetSpec& d, int patch, std::ostream& log = std::clog) {
  if (d.kind == DatasetSpec::Kind::kSynthetic) return synthetic_dataset(d.synthetic);
  IngestStats stats;
  auto out = ingest_directory(d.path, patch, &stats, log);
  log << "info: ingested " << stats.loaded << " images from " << d.path << " (" << stats.skipped << " skipped, "
      << stats.cropped << " cropped)\n";
  return out;
}

}  // namespace vstmimo
