// Copyright 2026 The CoMerge Authors
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

#ifndef COMERGE__RNG_HPP_
#define COMERGE__RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace comerge
{

/// 64-bit FNV-1a, used for stream naming and content digests.
inline constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 14695981039346656037ULL)
{
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Independent random stream derived from (seed, name). Streams with different
/// names never share state, so consuming one does not shift another.
class NamedStream
{
public:
  NamedStream(std::uint64_t seed, std::string_view name)
  : engine_(mix(seed ^ fnv1a64(name))) {}

  /// Uniform in [0, 1), 53-bit resolution; identical on every platform.
  double uniform() {return static_cast<double>(engine_() >> 11) * 0x1.0p-53;}

  double uniform(double lo, double hi) {return lo + (hi - lo) * uniform();}

  /// Standard normal via Box-Muller (no cached second value, so each call
  /// consumes exactly two engine draws).
  double normal()
  {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) {
      u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

private:
  static std::uint64_t mix(std::uint64_t z)
  {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

}  // namespace comerge

#endif  // COMERGE__RNG_HPP_
