// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace xmimo {

/// Derives an independent 64-bit stream key from the campaign seed, a stream
/// name ("drop", "shadowing", "clusters", "phases", ...) and any number of
/// integer indices (drop, cell, UE, ...).
std::uint64_t substream_key(std::uint64_t seed, std::string_view name,
                            std::initializer_list<std::uint64_t> indices = {});

/// mt19937_64 with platform-independent uniform/normal transforms. The
/// <random> distributions are implementation-defined, so they are avoided to
/// keep drops bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : engine_(key) {}
  Rng(std::uint64_t seed, std::string_view name,
      std::initializer_list<std::uint64_t> indices = {})
      : engine_(substream_key(seed, name, indices)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform in (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace xmimo
