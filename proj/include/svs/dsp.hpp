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
#ifndef SVS_DSP_HPP
#define SVS_DSP_HPP

#include <complex>
#include <cstddef>
#include <limits>
#include <vector>

#include "svs/audio.hpp"

namespace svs {

/// Time-frequency grid indexed (channel, frame, bin). Either complex STFT
/// values or nonnegative magnitudes, selected by kind().
class Spectrogram {
 public:
  enum class Kind { complex_grid, magnitude };

  Spectrogram() = default;

  static Spectrogram complex_zeros(int channels, int frames, int bins,
                                   int window, int hop, int sample_rate);
  static Spectrogram magnitude_zeros(int channels, int frames, int bins,
                                     int window, int hop, int sample_rate);

  Kind kind() const { return kind_; }
  bool is_complex() const { return kind_ == Kind::complex_grid; }
  int channels() const { return channels_; }
  int frames() const { return frames_; }
  int bins() const { return bins_; }
  int window() const { return window_; }
  int hop() const { return hop_; }
  int sample_rate() const { return sample_rate_; }
  size_t grid_size() const {
    return static_cast<size_t>(channels_) * frames_ * bins_;
  }

  std::complex<double>& c_at(int ch, int frame, int bin);
  const std::complex<double>& c_at(int ch, int frame, int bin) const;
  double& m_at(int ch, int frame, int bin);
  double m_at(int ch, int frame, int bin) const;

  std::vector<std::complex<double>>& complex_values();
  const std::vector<std::complex<double>>& complex_values() const;
  std::vector<double>& magnitude_values();
  const std::vector<double>& magnitude_values() const;

  bool same_shape(const Spectrogram& other) const {
    return channels_ == other.channels_ && frames_ == other.frames_ &&
           bins_ == other.bins_;
  }

  /// Elementwise |.| of a complex grid.
  Spectrogram magnitude() const;

 private:
  Kind kind_ = Kind::magnitude;
  int channels_ = 0, frames_ = 0, bins_ = 0;
  int window_ = 0, hop_ = 0, sample_rate_ = 0;
  std::vector<std::complex<double>> cvalues_;
  std::vector<double> mvalues_;

  size_t index(int ch, int frame, int bin) const {
    return (static_cast<size_t>(ch) * frames_ + frame) * bins_ + bin;
  }
};

/// Geometry of the pipeline-standard training segment: 11.88 s at 22050 Hz,
/// window 2048, hop 512, which yields magnitude grids of (2, 512, 1024)
/// once the top frequency bin is removed.
struct SegmentSpec {
  double duration_s = 11.88;
  int frames = 512;
  int bins = 1024;  // window/2, highest bin dropped
  int window = 2048;
  int hop = 512;
  int rate = 22050;

  size_t segment_samples() const;
  void validate() const;

  static SegmentSpec standard();
  /// Reduced geometry for CPU-scale experiments; window = 2*bins, hop = window/4.
  static SegmentSpec desk(int frames, int bins, int rate = 22050);
};

/// Centered STFT: half-window reflect padding, periodic Hann analysis
/// window, frame count 1 + floor(len/hop), window/2+1 bins.
Spectrogram stft(const AudioClip& clip, int window_size, int hop);

inline constexpr size_t kIstftNaturalLength = std::numeric_limits<size_t>::max();

/// Least-squares overlap-add inversion of a complex spectrogram. A grid with
/// the top bin dropped (bins == window/2) gets it re-appended as zeros.
/// `length` trims or zero-pads the result; the default keeps the natural
/// (frames-1)*hop samples.
AudioClip istft(const Spectrogram& spec, size_t length = kIstftNaturalLength);

/// Band-limited polyphase windowed-sinc resampler (Kaiser beta = 8).
/// Output length is round(len * target/source).
AudioClip resample(const AudioClip& clip, int target_rate);

/// Cuts duration_s seconds starting at offset_s, computes the magnitude
/// STFT and drops the highest bin: exactly (2, frames, bins). Mono input is
/// duplicated to stereo. Pure function of (samples, offset).
Spectrogram segment_to_standard(const AudioClip& clip, const SegmentSpec& spec,
                                double offset_s);

}  // namespace svs

#endif  // SVS_DSP_HPP
