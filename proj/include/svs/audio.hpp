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
#ifndef SVS_AUDIO_HPP
#define SVS_AUDIO_HPP

#include <cstddef>
#include <filesystem>
#include <vector>

namespace svs {

/// Multichannel PCM signal. Samples are dimensionless amplitudes with a
/// nominal range of [-1, 1]; all channels have equal length.
struct AudioClip {
  std::vector<std::vector<double>> samples;  // [channel][sample]
  int sample_rate = 0;

  int channels() const { return static_cast<int>(samples.size()); }
  size_t length() const { return samples.empty() ? 0 : samples[0].size(); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(length()) / sample_rate : 0.0;
  }

  static AudioClip zeros(int channels, size_t length, int sample_rate);

  /// Throws invalid-input if channel lengths differ or the rate is not positive.
  void validate() const;
};

/// Average of all channels.
AudioClip downmix_mono(const AudioClip& clip);

/// Mono clips are duplicated, stereo passed through; more channels rejected.
AudioClip to_stereo(const AudioClip& clip);

/// Elementwise sum of equally shaped clips.
AudioClip mix_clips(const std::vector<AudioClip>& clips);

double rms(const AudioClip& clip);

enum class WavFormat { pcm16, float32 };

/// Little-endian RIFF reader; accepts PCM 16-bit and IEEE float 32-bit,
/// 1 or 2 channels. Anything else is an io-error.
AudioClip read_wav(const std::filesystem::path& path);

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavFormat format = WavFormat::float32);

}  // namespace svs

#endif  // SVS_AUDIO_HPP
