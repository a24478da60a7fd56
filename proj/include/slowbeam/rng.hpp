// Copyright 2026 The slowbeam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SLOWBEAM_RNG_HPP
#define SLOWBEAM_RNG_HPP

#include "slowbeam/types.hpp"

#include <cstdint>
#include <random>

namespace slowbeam {

using Rng = std::mt19937_64;

/// Independent named streams of a Monte Carlo run. Each (seed, trial,
/// stream) triple maps to its own engine, so results do not depend on how
/// trials are distributed over workers.
enum class Stream : std::uint32_t {
  kMobility = 1,
  kAoaError = 2,
  kChannel = 3,
  kSymbols = 4,
  kNoise = 5,
  kTraining = 6,
  kAux = 7,
};

inline Rng make_rng(std::uint64_t master_seed, std::uint64_t trial, Stream stream,
                    std::uint64_t extra = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(extra),
                    static_cast<std::uint32_t>(extra >> 32)};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

/// Circularly symmetric CN(0,1) draw.
inline cdouble complex_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline CMatrix complex_normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_normal(rng);
  return m;
}

/// Unit-energy QPSK symbol.
inline cdouble qpsk(Rng& rng) {
  std::uniform_int_distribution<int> bit(0, 1);
  const double a = 1.0 / std::sqrt(2.0);
  const double re = bit(rng) ? a : -a;
  const double im = bit(rng) ? a : -a;
  return {re, im};
}

}  // namespace slowbeam

#endif  // SLOWBEAM_RNG_HPP
