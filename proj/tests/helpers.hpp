/**
 * Copyright 2026 the svsep authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef SVS_TESTS_HELPERS_HPP
#define SVS_TESTS_HELPERS_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "svs/audio.hpp"
#include "svs/rng.hpp"

namespace svs::test {

inline AudioClip noise_clip(int channels, size_t length, int rate, uint64_t seed,
                            double amplitude = 0.5) {
  Rng rng(seed);
  AudioClip clip = AudioClip::zeros(channels, length, rate);
  for (auto& ch : clip.samples)
    for (auto& s : ch) s = rng.uniform(-amplitude, amplitude);
  return clip;
}

inline AudioClip sine_clip(int channels, size_t length, int rate, double freq_hz,
                           double amplitude = 0.5, double phase = 0.0) {
  AudioClip clip = AudioClip::zeros(channels, length, rate);
  for (int ch = 0; ch < channels; ++ch)
    for (size_t i = 0; i < length; ++i)
      clip.samples[static_cast<size_t>(ch)][i] =
          amplitude * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate + phase);
  return clip;
}

inline double relative_l2_error(const std::vector<double>& a,
                                const std::vector<double>& b, size_t lo, size_t hi) {
  double num = 0.0, den = 0.0;
  for (size_t i = lo; i < hi && i < a.size() && i < b.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

inline double correlation(const std::vector<double>& a, const std::vector<double>& b,
                          size_t lo, size_t hi) {
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (size_t i = lo; i < hi && i < a.size() && i < b.size(); ++i) {
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

/// Scratch directory under the system temp dir, unique per test tag.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("svsep_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace svs::test

#endif  // SVS_TESTS_HELPERS_HPP
