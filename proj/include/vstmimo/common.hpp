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

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace vstmimo {

using cplx = std::complex<double>;

/// Raised when an input violates a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by zero-forcing detection when a subcarrier matrix is not invertible.
class DetectionError : public std::runtime_error {
 public:
  DetectionError(std::size_t subcarrier, const std::string& what)
      : std::runtime_error(what), subcarrier_(subcarrier) {}
  std::size_t subcarrier() const noexcept { return subcarrier_; }

 private:
  std::size_t subcarrier_;
};

/// Wraps an error raised inside one stage of the transmit/receive chain.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// A stage produced non-finite values, typically from overflowed parameters.
class NonFiniteError : public StageError {
 public:
  using StageError::StageError;
};

/// Seeded random source used everywhere randomness enters.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; derives independent per-item seeds from a master seed.
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Circularly-symmetric complex Gaussian with total variance `var`.
inline cplx complex_normal(Rng& rng, double var = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double s = std::sqrt(var / 2.0);
  const double re = n(rng);
  const double im = n(rng);
  return {s * re, s * im};
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace vstmimo
