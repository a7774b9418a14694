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

// Adaptive spatial multiplexing: per-patch rate allocation from entropy and
// per-stream capacity, greedy min-max stream mapping and bandwidth accounting.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "vstmimo/common.hpp"

namespace vstmimo {

/// Scalar rate quantizer with 2^k_q levels (channel-input lengths).
struct RateQuantizer {
  unsigned k_q = 3;
  std::vector<int> levels{2, 4, 8, 16, 24, 32, 48, 64};

  void validate() const {
    require(k_q >= 1 && k_q < 16, "rate quantizer: k_q must be in [1, 15]");
    require(levels.size() == (std::size_t{1} << k_q), "rate quantizer: need exactly 2^k_q levels");
    require(levels.front() >= 1, "rate quantizer: levels must be >= 1");
    for (std::size_t i = 1; i < levels.size(); ++i)
      require(levels[i] > levels[i - 1], "rate quantizer: levels must be strictly increasing");
  }

  int max_level() const { return levels.back(); }

  /// Index of `level` in the level set, or -1.
  int index_of(int level) const {
    auto it = std::find(levels.begin(), levels.end(), level);
    return it == levels.end() ? -1 : static_cast<int>(it - levels.begin());
  }

  /// Nearest level index; ties go to the larger level, saturating at both ends.
  std::size_t nearest(double value) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < levels.size(); ++i) {
      if (std::abs(value - levels[i]) <= std::abs(value - levels[best])) best = i;
    }
    return best;
  }
};

struct RateAllocation {
  std::vector<double> continuous;    // k, channel-input lengths before Q
  std::vector<int> quantized;        // k̄, member of the level set
  std::vector<std::size_t> stream;   // 0-based stream index (M - 1)
  std::vector<double> entropy_bits;  // per-patch NLL
  double eta = 1.0;

  std::size_t size() const { return quantized.size(); }

  /// Σ_i 1(M_i = t) k̄_i for every stream.
  std::vector<double> stream_loads(std::size_t n_s) const {
    std::vector<double> load(n_s, 0.0);
    for (std::size_t i = 0; i < size(); ++i) load.at(stream[i]) += quantized[i];
    return load;
  }
};

struct BandwidthReport {
  double k_y = 0.0;
  double k_z = 0.0;
  long long overhead_bits = 0;
  std::vector<double> per_stream_load;
  double cbr = 0.0;
};

struct QuantizedRate {
  double continuous;
  int quantized;
};

/// k = η · bits / C_t, k̄ = Q(k).
inline QuantizedRate allocate_rate(double patch_nll_bits, double c_t, double eta, const RateQuantizer& q) {
  require(std::isfinite(c_t) && c_t > 0.0, "allocate_rate: capacity must be > 0");
  require(std::isfinite(eta) && eta > 0.0, "allocate_rate: eta must be > 0");
  require(std::isfinite(patch_nll_bits) && patch_nll_bits >= 0.0, "allocate_rate: entropy must be finite and >= 0");
  const double k = eta * patch_nll_bits / c_t;
  return {k, q.levels[q.nearest(k)]};
}

/// Greedy mapping: patches by descending entropy, each to the stream that
/// minimizes the resulting maximum stream load; ties to the higher capacity.
inline RateAllocation map_streams(std::span<const double> entropies, std::span<const double> capacities, double eta,
                                  const RateQuantizer& q) {
  require(!entropies.empty(), "map_streams: no patches");
  require(!capacities.empty(), "map_streams: no streams");
  q.validate();
  const std::size_t l = entropies.size();
  const std::size_t ns = capacities.size();

  std::vector<std::size_t> order(l);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return entropies[a] > entropies[b]; });

  // Stream preference order for tie-breaking: capacity descending, then index.
  std::vector<std::size_t> pref(ns);
  std::iota(pref.begin(), pref.end(), 0);
  std::stable_sort(pref.begin(), pref.end(), [&](std::size_t a, std::size_t b) { return capacities[a] > capacities[b]; });

  RateAllocation alloc;
  alloc.eta = eta;
  alloc.continuous.resize(l);
  alloc.quantized.resize(l);
  alloc.stream.resize(l);
  alloc.entropy_bits.assign(entropies.begin(), entropies.end());

  std::vector<double> load(ns, 0.0);
  for (std::size_t i : order) {
    std::size_t best_stream = pref.front();
    double best_obj = std::numeric_limits<double>::infinity();
    QuantizedRate best_rate{};
    for (std::size_t t : pref) {
      const QuantizedRate r = allocate_rate(entropies[i], capacities[t], eta, q);
      double obj = load[t] + r.quantized;
      for (std::size_t u = 0; u < ns; ++u)
        if (u != t) obj = std::max(obj, load[u]);
      if (obj < best_obj) {
        best_obj = obj;
        best_stream = t;
        best_rate = r;
      }
    }
    alloc.stream[i] = best_stream;
    alloc.continuous[i] = best_rate.continuous;
    alloc.quantized[i] = best_rate.quantized;
    load[best_stream] += best_rate.quantized;
  }
  return alloc;
}

/// k_y = N_s / (2 N_t) · max_t Σ_i 1(M_i = t) k̄_i
inline double total_bandwidth(const RateAllocation& alloc, std::size_t n_s, std::size_t n_t) {
  require(n_s >= 1 && n_t >= 1, "total_bandwidth: counts must be >= 1");
  const auto load = alloc.stream_loads(n_s);
  const double peak = *std::max_element(load.begin(), load.end());
  return static_cast<double>(n_s) / (2.0 * static_cast<double>(n_t)) * peak;
}

/// l · (k_q + log2 N_s) signaling bits.
inline long long overhead_bits(std::size_t l, unsigned k_q, std::size_t n_s) {
  require(n_s >= 1 && std::has_single_bit(n_s), "overhead_bits: N_s must be a power of two");
  const auto log2_ns = static_cast<long long>(std::countr_zero(n_s));
  return static_cast<long long>(l) * (static_cast<long long>(k_q) + log2_ns);
}

/// R = k / m.
inline double channel_bandwidth_ratio(double k_total, double m) {
  require(m >= 1.0, "cbr: source dimension must be >= 1");
  require(k_total >= 0.0, "cbr: bandwidth must be >= 0");
  return k_total / m;
}

/// CSV: patch index, entropy bits, stream (1-based), continuous rate, quantized rate.
inline void write_allocation_csv(std::ostream& os, const RateAllocation& alloc) {
  os << "patch,entropy_bits,stream,continuous_rate,quantized_rate\n";
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    os << i << ',' << alloc.entropy_bits[i] << ',' << alloc.stream[i] + 1 << ',' << alloc.continuous[i] << ','
       << alloc.quantized[i] << '\n';
  }
}

}  // namespace vstmimo
