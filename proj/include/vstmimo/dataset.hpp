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

// Source ingestion: seeded Gauss-Markov textures and 8-bit RGB rasters
// (PNG via libpng, binary PPM).

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "vstmimo/codec.hpp"
#include "vstmimo/common.hpp"

namespace vstmimo {

/// Separable AR(1) textures: a shared luminance field plus per-channel detail.
struct SyntheticSpec {
  int size = 32;
  double rho = 0.9;
  int count = 256;
  std::uint64_t seed = 7;
  int channels = 3;
  double contrast = 0.15;     // standard deviation around mid-gray
  double shared = 0.9;        // weight of the common field in each channel

  void validate() const {
    require(size > 0 && count > 0 && channels > 0, "synthetic: size, count and channels must be positive");
    require(rho >= 0.0 && rho < 1.0, "synthetic: rho must be in [0, 1)");
    require(shared >= 0.0 && shared <= 1.0, "synthetic: shared weight must be in [0, 1]");
  }
};

/// Unit-variance field with correlation rho^(|di| + |dj|).
inline std::vector<double> gauss_markov_field(int n, double rho, Rng& rng) {
  std::normal_distribution<double> e(0.0, 1.0);
  const double a = std::sqrt(1.0 - rho * rho);
  std::vector<double> f(static_cast<std::size_t>(n) * n);
  auto at = [&](int i, int j) -> double& { return f[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == 0 && j == 0)
        at(i, j) = e(rng);
      else if (i == 0)
        at(i, j) = rho * at(i, j - 1) + a * e(rng);
      else if (j == 0)
        at(i, j) = rho * at(i - 1, j) + a * e(rng);
      else
        at(i, j) = rho * at(i - 1, j) + rho * at(i, j - 1) - rho * rho * at(i - 1, j - 1) + a * a * e(rng);
    }
  return f;
}

/// Item `index` of the synthetic set; independent of how many items are drawn.
inline Image synthetic_image(const SyntheticSpec& spec, std::size_t index) {
  Rng rng(mix_seed(spec.seed, index));
  const int n = spec.size;
  const auto base = gauss_markov_field(n, spec.rho, rng);
  const double w_own = std::sqrt(1.0 - spec.shared * spec.shared);
  Image img(n, n, spec.channels);
  for (int ch = 0; ch < spec.channels; ++ch) {
    const auto own = gauss_markov_field(n, spec.rho, rng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::size_t k = static_cast<std::size_t>(i) * n + j;
        const double v = 0.5 + spec.contrast * (spec.shared * base[k] + w_own * own[k]);
        img.at(i, j, ch) = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
      }
  }
  return img;
}

inline std::vector<Image> synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) out.push_back(synthetic_image(spec, static_cast<std::size_t>(i)));
  return out;
}

// ---------------------------------------------------------------------------
// Raster I/O.

inline Image read_png(const std::string& path) {
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str()))
    throw std::runtime_error("png: cannot read " + path + ": " + im.message);
  im.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&im);
    throw std::runtime_error("png: cannot decode " + path + ": " + im.message);
  }
  Image out(static_cast<int>(im.height), static_cast<int>(im.width), 3);
  for (std::size_t k = 0; k < buf.size(); ++k) out.data[k] = buf[k] / 255.0;
  return out;
}

inline std::vector<png_byte> to_bytes(const Image& img) {
  std::vector<png_byte> buf(img.size());
  for (std::size_t k = 0; k < buf.size(); ++k)
    buf[k] = static_cast<png_byte>(std::lround(std::clamp(img.data[k], 0.0, 1.0) * 255.0));
  return buf;
}

inline void write_png(const std::string& path, const Image& img) {
  require(img.channels == 3 || img.channels == 1, "png: only 1- or 3-channel images");
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(img.width);
  im.height = static_cast<png_uint_32>(img.height);
  im.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto buf = to_bytes(img);
  if (!png_image_write_to_file(&im, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("png: cannot write " + path + ": " + im.message);
}

/// Binary PPM (P6, maxval 255).
inline Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("ppm: cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw std::runtime_error("ppm: " + path + " is not a binary PPM");
  auto next_int = [&]() {
    is >> std::ws;
    while (is.peek() == '#') {
      std::string skip;
      std::getline(is, skip);
      is >> std::ws;
    }
    int v = -1;
    is >> v;
    return v;
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("ppm: unsupported header in " + path);
  is.get();
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw std::runtime_error("ppm: truncated " + path);
  Image out(h, w, 3);
  for (std::size_t k = 0; k < buf.size(); ++k) out.data[k] = buf[k] / 255.0;
  return out;
}

inline void write_ppm(const std::string& path, const Image& img) {
  require(img.channels == 3, "ppm: only 3-channel images");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("ppm: cannot open " + path + " for writing");
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  const auto buf = to_bytes(img);
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

/// Largest centered window whose sides are multiples of `patch`.
inline Image center_crop(const Image& img, int patch) {
  const int h = img.height - img.height % patch;
  const int w = img.width - img.width % patch;
  require(h > 0 && w > 0, "crop: image smaller than one patch");
  const int oy = (img.height - h) / 2, ox = (img.width - w) / 2;
  Image out(h, w, img.channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < img.channels; ++ch) out.at(y, x, ch) = img.at(y + oy, x + ox, ch);
  return out;
}

struct IngestStats {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::size_t cropped = 0;
};

/// Reads every .png / .ppm file of a directory in lexicographic order.
inline std::vector<Image> ingest_directory(const std::string& dir, int patch, IngestStats* stats = nullptr,
                                           std::ostream& log = std::clog) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), "ingest: " + dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  IngestStats local;
  std::vector<Image> out;
  for (const auto& f : files) {
    Image img;
    try {
      img = f.extension() == ".ppm" || f.extension() == ".PPM" ? read_ppm(f.string()) : read_png(f.string());
    } catch (const std::exception& e) {
      log << "warning: skipping " << f.string() << ": " << e.what() << '\n';
      ++local.skipped;
      continue;
    }
    if (img.height % patch || img.width % patch) {
      Image c = center_crop(img, patch);
      log << "info: center-cropped " << f.string() << " from " << img.height << 'x' << img.width << " to "
          << c.height << 'x' << c.width << '\n';
      img = std::move(c);
      ++local.cropped;
    }
    out.push_back(std::move(img));
    ++local.loaded;
  }
  if (stats) *stats = local;
  if (out.empty()) throw ValidationError("ingest: no readable images in " + dir);
  return out;
}

}  // namespace vstmimo
