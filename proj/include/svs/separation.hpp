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
#ifndef SVS_SEPARATION_HPP
#define SVS_SEPARATION_HPP

#include <functional>
#include <map>
#include <string>

#include "svs/audio.hpp"
#include "svs/dsp.hpp"
#include "svs/model.hpp"

namespace svs {

enum class StemMode { two_stem, four_stem };

StemMode stem_mode_from_name(const std::string& name);
const char* stem_mode_name(StemMode mode);

/// Which per-source models a mode needs.
std::vector<std::string> stem_mode_sources(StemMode mode);

inline constexpr double kMaskFloor = 1e-10;
inline constexpr double kSilentDenominator = 1e-8;

/// mask[source] = est[source] / (sum of all estimates + eps). Where the
/// summed estimate falls below kSilentDenominator the sources share the bin
/// equally so that masks always sum to one.
Spectrogram ratio_mask(const std::map<std::string, Spectrogram>& estimates,
                       const std::string& source, double floor_eps = kMaskFloor);

/// Elementwise drums + bass + other.
Spectrogram combine_stems_to_instrumental(
    const std::map<std::string, Spectrogram>& estimates);

/// Per-source magnitude estimator for one standard segment; the model-backed
/// implementation wraps UNet::forward, tests may inject oracles.
using SegmentEstimator = std::function<Tensor3(const Tensor3& mixture_magnitude)>;

/// Full-song inference: resample to the segment rate, cut into standard
/// segments, estimate every source, ratio-mask the mixture's complex
/// spectrogram (mixture phase preserved), invert, concatenate, and resample
/// back. Output clips are exactly as long as the input. Outputs are always
/// {vocals, instrumental}; four-stem estimators are combined first.
std::map<std::string, AudioClip> separate_song(
    const AudioClip& clip, const std::map<std::string, SegmentEstimator>& estimators,
    StemMode mode, const SegmentSpec& seg = SegmentSpec::standard());

/// Convenience wrapper banking on trained networks.
std::map<std::string, AudioClip> separate_song(
    const AudioClip& clip, const std::map<std::string, UNet>& models, StemMode mode,
    const SegmentSpec& seg = SegmentSpec::standard());

}  // namespace svs

#endif  // SVS_SEPARATION_HPP
