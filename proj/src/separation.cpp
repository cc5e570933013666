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
#include "svs/separation.hpp"

#include <algorithm>
#include <cmath>

#include "svs/errors.hpp"

namespace svs {

StemMode stem_mode_from_name(const std::string& name) {
  if (name == "two_stem") return StemMode::two_stem;
  if (name == "four_stem") return StemMode::four_stem;
  raise(ErrorCode::invalid_config, "unknown stem mode '" + name + "'");
}

const char* stem_mode_name(StemMode mode) {
  return mode == StemMode::two_stem ? "two_stem" : "four_stem";
}

std::vector<std::string> stem_mode_sources(StemMode mode) {
  if (mode == StemMode::two_stem) return {kStemVocals, kStemInstrumental};
  return {kStemVocals, kStemDrums, kStemBass, kStemOther};
}

Spectrogram ratio_mask(const std::map<std::string, Spectrogram>& estimates,
                       const std::string& source, double floor_eps) {
  const auto it = estimates.find(source);
  if (it == estimates.end())
    raise(ErrorCode::missing_source, "no estimate for source '" + source + "'");
  const Spectrogram& own = it->second;
  for (const auto& [name, grid] : estimates)
    if (!grid.same_shape(own))
      raise(ErrorCode::shape_mismatch, "estimate '" + name + "' shape differs");

  Spectrogram mask = own;  // same axes/kind, values overwritten below
  const auto n_sources = static_cast<double>(estimates.size());
  auto& out = mask.magnitude_values();
  const auto& numer = own.magnitude_values();
  for (size_t i = 0; i < out.size(); ++i) {
    double denom = 0.0;
    for (const auto& [name, grid] : estimates) denom += grid.magnitude_values()[i];
    if (denom < kSilentDenominator) {
      out[i] = 1.0 / n_sources;  // silent bin: split evenly, masks sum to 1
    } else {
      // epsilon floors the denominator; above the floor the per-source
      // masks sum to exactly one, keeping reconstruction conservative
      out[i] = numer[i] / std::max(denom, floor_eps);
    }
  }
  return mask;
}

Spectrogram combine_stems_to_instrumental(
    const std::map<std::string, Spectrogram>& estimates) {
  for (const char* stem : {kStemDrums, kStemBass, kStemOther})
    if (estimates.find(stem) == estimates.end())
      raise(ErrorCode::missing_stem, std::string("no estimate for stem '") + stem + "'");
  Spectrogram out = estimates.at(kStemDrums);
  const auto& bass = estimates.at(kStemBass).magnitude_values();
  const auto& other = estimates.at(kStemOther).magnitude_values();
  if (!estimates.at(kStemBass).same_shape(out) || !estimates.at(kStemOther).same_shape(out))
    raise(ErrorCode::shape_mismatch, "stem estimates must share shape");
  auto& v = out.magnitude_values();
  for (size_t i = 0; i < v.size(); ++i) v[i] += bass[i] + other[i];
  return out;
}

std::map<std::string, AudioClip> separate_song(
    const AudioClip& clip, const std::map<std::string, SegmentEstimator>& estimators,
    StemMode mode, const SegmentSpec& seg) {
  clip.validate();
  seg.validate();
  for (const auto& source : stem_mode_sources(mode))
    if (estimators.find(source) == estimators.end())
      raise(ErrorCode::missing_source,
            "mode " + std::string(stem_mode_name(mode)) + " needs an estimator for '" +
                source + "'");

  const int original_rate = clip.sample_rate;
  const size_t original_len = clip.length();
  const int original_channels = clip.channels();

  AudioClip work = clip.sample_rate == seg.rate ? clip : resample(clip, seg.rate);
  work = to_stereo(work);
  const size_t work_len = work.length();

  // zero-pad to a whole number of segments
  const size_t seg_len = seg.segment_samples();
  const size_t n_segments = std::max<size_t>(1, (work_len + seg_len - 1) / seg_len);
  for (auto& ch : work.samples) ch.resize(n_segments * seg_len, 0.0);

  const std::vector<std::string> outputs = {kStemVocals, kStemInstrumental};
  std::map<std::string, AudioClip> result22;
  for (const auto& name : outputs)
    result22.emplace(name, AudioClip::zeros(2, n_segments * seg_len, seg.rate));

  for (size_t s = 0; s < n_segments; ++s) {
    AudioClip excerpt = AudioClip::zeros(2, seg_len, seg.rate);
    for (int ch = 0; ch < 2; ++ch)
      std::copy_n(work.samples[static_cast<size_t>(ch)].begin() +
                      static_cast<long>(s * seg_len),
                  seg_len, excerpt.samples[static_cast<size_t>(ch)].begin());

    // full complex grid (bins+1) for reconstruction, dropped-bin magnitude
    // grid for the models
    const Spectrogram full = stft(excerpt, seg.window, seg.hop);
    Tensor3 mag = Tensor3::zeros({2, seg.frames, seg.bins});
    for (int ch = 0; ch < 2; ++ch)
      for (int f = 0; f < seg.frames; ++f)
        for (int b = 0; b < seg.bins; ++b)
          mag.at(ch, f, b) = std::abs(full.c_at(ch, f, b));

    std::map<std::string, Spectrogram> estimates;
    for (const auto& source : stem_mode_sources(mode)) {
      const Tensor3 est = estimators.at(source)(mag);
      if (!(est.shape == mag.shape))
        raise(ErrorCode::shape_mismatch, "estimator for '" + source +
                                             "' returned a mismatched shape");
      estimates.emplace(source,
                        magnitude_from_tensor(est, seg.window, seg.hop, seg.rate));
    }
    if (mode == StemMode::four_stem) {
      Spectrogram inst = combine_stems_to_instrumental(estimates);
      estimates = {{kStemVocals, estimates.at(kStemVocals)},
                   {kStemInstrumental, std::move(inst)}};
    }

    for (const auto& name : outputs) {
      const Spectrogram mask = ratio_mask(estimates, name);
      // masked complex spectrogram keeps the mixture phase; the dropped top
      // bin passes through with an even split so the sources conserve it
      Spectrogram masked = Spectrogram::complex_zeros(2, seg.frames, seg.bins + 1,
                                                      seg.window, seg.hop, seg.rate);
      const double top_share = 1.0 / outputs.size();
      for (int ch = 0; ch < 2; ++ch)
        for (int f = 0; f < seg.frames; ++f) {
          for (int b = 0; b < seg.bins; ++b)
            masked.c_at(ch, f, b) = full.c_at(ch, f, b) * mask.m_at(ch, f, b);
          masked.c_at(ch, f, seg.bins) = full.c_at(ch, f, seg.bins) * top_share;
        }
      const AudioClip piece = istft(masked, seg_len);
      auto& dst = result22.at(name);
      for (int ch = 0; ch < 2; ++ch)
        std::copy_n(piece.samples[static_cast<size_t>(ch)].begin(), seg_len,
                    dst.samples[static_cast<size_t>(ch)].begin() +
                        static_cast<long>(s * seg_len));
    }
  }

  // trim padding, restore channel count and rate, enforce the length contract
  std::map<std::string, AudioClip> result;
  for (auto& [name, clip22] : result22) {
    for (auto& ch : clip22.samples) ch.resize(work_len);
    AudioClip out = original_channels == 1 ? downmix_mono(clip22) : clip22;
    if (original_rate != seg.rate) out = resample(out, original_rate);
    for (auto& ch : out.samples) ch.resize(original_len, 0.0);
    result.emplace(name, std::move(out));
  }
  return result;
}

std::map<std::string, AudioClip> separate_song(
    const AudioClip& clip, const std::map<std::string, UNet>& models, StemMode mode,
    const SegmentSpec& seg) {
  std::map<std::string, SegmentEstimator> estimators;
  for (const auto& [source, net] : models)
    estimators.emplace(source, [&net](const Tensor3& mix) {
      return net.forward(mix).estimate;
    });
  return separate_song(clip, estimators, mode, seg);
}

}  // namespace svs
