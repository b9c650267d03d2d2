// Copyright 2026 The dpdfd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPDFD_RNG_H_
#define DPDFD_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>

namespace dpdfd {

// Seeded random stream. The engine is std::mt19937_64, whose output sequence
// is fixed by the C++ standard; uniforms take the top 53 bits and Gaussians
// use the Box-Muller transform, so the stream does not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double gaussian();
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  std::uint64_t seed() const { return seed_; }
  // Number of 64-bit words drawn so far.
  std::uint64_t position() const { return position_; }

 private:
  std::uint64_t seed_;
  std::uint64_t position_ = 0;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// The mechanism's Gaussian noise stream. Must not be shared between
// concurrent sanitizations.
using NoiseSource = Rng;

// splitmix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dpdfd

#endif  // DPDFD_RNG_H_
