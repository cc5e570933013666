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
#include "svs/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "svs/errors.hpp"
#include "svs/fft.hpp"

namespace svs {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Periodic Hann window of size w.
std::vector<double> hann_periodic(int w) {
  std::vector<double> win(static_cast<size_t>(w));
  for (int n = 0; n < w; ++n)
    win[static_cast<size_t>(n)] = 0.5 * (1.0 - std::cos(kTwoPi * n / w));
  return win;
}

/// Reflect-folded sample access: index into x as if mirrored at both ends
/// (librosa-style reflection, no edge duplication).
double reflect_at(const std::vector<double>& x, long long i) {
  const long long n = static_cast<long long>(x.size());
  if (n == 1) return x[0];
  const long long period = 2 * (n - 1);
  long long j = i % period;
  if (j < 0) j += period;
  if (j >= n) j = period - j;
  return x[static_cast<size_t>(j)];
}

}  // namespace

// ---------------------------------------------------------------------------
// Spectrogram

Spectrogram Spectrogram::complex_zeros(int channels, int frames, int bins,
                                       int window, int hop, int sample_rate) {
  Spectrogram s;
  s.kind_ = Kind::complex_grid;
  s.channels_ = channels;
  s.frames_ = frames;
  s.bins_ = bins;
  s.window_ = window;
  s.hop_ = hop;
  s.sample_rate_ = sample_rate;
  s.cvalues_.assign(s.grid_size(), std::complex<double>(0.0, 0.0));
  return s;
}

Spectrogram Spectrogram::magnitude_zeros(int channels, int frames, int bins,
                                         int window, int hop, int sample_rate) {
  Spectrogram s;
  s.kind_ = Kind::magnitude;
  s.channels_ = channels;
  s.frames_ = frames;
  s.bins_ = bins;
  s.window_ = window;
  s.hop_ = hop;
  s.sample_rate_ = sample_rate;
  s.mvalues_.assign(s.grid_size(), 0.0);
  return s;
}

std::complex<double>& Spectrogram::c_at(int ch, int frame, int bin) {
  return complex_values()[index(ch, frame, bin)];
}

const std::complex<double>& Spectrogram::c_at(int ch, int frame, int bin) const {
  return complex_values()[index(ch, frame, bin)];
}

double& Spectrogram::m_at(int ch, int frame, int bin) {
  return magnitude_values()[index(ch, frame, bin)];
}

double Spectrogram::m_at(int ch, int frame, int bin) const {
  return magnitude_values()[index(ch, frame, bin)];
}

std::vector<std::complex<double>>& Spectrogram::complex_values() {
  if (kind_ != Kind::complex_grid)
    raise(ErrorCode::kind_mismatch, "complex values requested from magnitude grid");
  return cvalues_;
}

const std::vector<std::complex<double>>& Spectrogram::complex_values() const {
  if (kind_ != Kind::complex_grid)
    raise(ErrorCode::kind_mismatch, "complex values requested from magnitude grid");
  return cvalues_;
}

std::vector<double>& Spectrogram::magnitude_values() {
  if (kind_ != Kind::magnitude)
    raise(ErrorCode::kind_mismatch, "magnitude values requested from complex grid");
  return mvalues_;
}

const std::vector<double>& Spectrogram::magnitude_values() const {
  if (kind_ != Kind::magnitude)
    raise(ErrorCode::kind_mismatch, "magnitude values requested from complex grid");
  return mvalues_;
}

Spectrogram Spectrogram::magnitude() const {
  if (kind_ == Kind::magnitude) return *this;
  Spectrogram out = magnitude_zeros(channels_, frames_, bins_, window_, hop_,
                                    sample_rate_);
  for (size_t i = 0; i < cvalues_.size(); ++i) out.mvalues_[i] = std::abs(cvalues_[i]);
  return out;
}

// ---------------------------------------------------------------------------
// SegmentSpec

size_t SegmentSpec::segment_samples() const {
  return static_cast<size_t>(std::llround(duration_s * rate));
}

void SegmentSpec::validate() const {
  if (frames <= 0 || bins <= 0 || window <= 0 || hop <= 0 || rate <= 0)
    raise(ErrorCode::invalid_input, "segment spec fields must be positive");
  if (!is_power_of_two(static_cast<size_t>(frames)) ||
      !is_power_of_two(static_cast<size_t>(bins)))
    raise(ErrorCode::invalid_input, "frames and bins must be powers of two");
  if (bins != window / 2)
    raise(ErrorCode::invalid_input, "bins must equal window/2 (top bin dropped)");
  const size_t n = segment_samples();
  // frame-count identity: 1 + floor(n/hop) == frames
  if (1 + n / static_cast<size_t>(hop) != static_cast<size_t>(frames))
    raise(ErrorCode::invalid_input, "duration inconsistent with frames*hop");
}

SegmentSpec SegmentSpec::standard() { return SegmentSpec{}; }

SegmentSpec SegmentSpec::desk(int frames, int bins, int rate) {
  SegmentSpec s;
  s.frames = frames;
  s.bins = bins;
  s.window = 2 * bins;
  s.hop = s.window / 4;
  s.rate = rate;
  // pick a sample count in the middle of the bucket that maps to `frames`
  const size_t samples = static_cast<size_t>(frames - 1) * s.hop + s.hop / 2;
  s.duration_s = static_cast<double>(samples) / rate;
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// STFT / iSTFT

Spectrogram stft(const AudioClip& clip, int window_size, int hop) {
  clip.validate();
  if (clip.length() == 0) raise(ErrorCode::invalid_input, "stft of empty clip");
  if (window_size <= 0 || window_size % 2 != 0)
    raise(ErrorCode::invalid_input, "window size must be even and positive");
  if (hop <= 0 || hop > window_size)
    raise(ErrorCode::invalid_input, "hop must be in (0, window]");
  if (!is_power_of_two(static_cast<size_t>(window_size)))
    raise(ErrorCode::invalid_input, "window size must be a power of two");

  const size_t len = clip.length();
  const int frames = static_cast<int>(1 + len / static_cast<size_t>(hop));
  const int bins = window_size / 2 + 1;
  const int half = window_size / 2;

  Spectrogram out = Spectrogram::complex_zeros(clip.channels(), frames, bins,
                                               window_size, hop, clip.sample_rate);
  const std::vector<double> win = hann_periodic(window_size);
  std::vector<double> frame(static_cast<size_t>(window_size));

  for (int ch = 0; ch < clip.channels(); ++ch) {
    const auto& x = clip.samples[static_cast<size_t>(ch)];
    for (int m = 0; m < frames; ++m) {
      const long long start = static_cast<long long>(m) * hop - half;
      for (int n = 0; n < window_size; ++n)
        frame[static_cast<size_t>(n)] = reflect_at(x, start + n) * win[static_cast<size_t>(n)];
      const auto spec = rfft(frame);
      for (int b = 0; b < bins; ++b) out.c_at(ch, m, b) = spec[static_cast<size_t>(b)];
    }
  }
  return out;
}

AudioClip istft(const Spectrogram& spec, size_t length) {
  if (!spec.is_complex())
    raise(ErrorCode::kind_mismatch, "istft needs a complex spectrogram");
  const int window = spec.window();
  const int hop = spec.hop();
  const int frames = spec.frames();
  const int half = window / 2;
  const bool top_dropped = spec.bins() == window / 2;
  if (!top_dropped && spec.bins() != window / 2 + 1)
    raise(ErrorCode::invalid_input, "bin count inconsistent with window size");

  const std::vector<double> win = hann_periodic(window);
  const size_t padded_len = static_cast<size_t>(frames - 1) * hop + window;
  const size_t natural_len = static_cast<size_t>(frames - 1) * hop;
  const size_t out_len = length == kIstftNaturalLength ? natural_len : length;

  AudioClip out = AudioClip::zeros(spec.channels(), out_len, spec.sample_rate());
  std::vector<double> acc(padded_len);
  std::vector<double> wsum(padded_len);
  std::vector<std::complex<double>> bins(static_cast<size_t>(window / 2 + 1));

  for (int ch = 0; ch < spec.channels(); ++ch) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(wsum.begin(), wsum.end(), 0.0);
    for (int m = 0; m < frames; ++m) {
      for (int b = 0; b < spec.bins(); ++b) bins[static_cast<size_t>(b)] = spec.c_at(ch, m, b);
      if (top_dropped) bins.back() = {0.0, 0.0};  // dropped bin re-inserted as zeros
      const auto chunk = irfft(bins, static_cast<size_t>(window));
      const size_t base = static_cast<size_t>(m) * hop;
      for (int n = 0; n < window; ++n) {
        acc[base + n] += win[static_cast<size_t>(n)] * chunk[static_cast<size_t>(n)];
        wsum[base + n] += win[static_cast<size_t>(n)] * win[static_cast<size_t>(n)];
      }
    }
    // least-squares OLA normalization, then crop the reflect padding
    for (size_t i = 0; i < out_len; ++i) {
      const size_t p = i + static_cast<size_t>(half);
      if (p >= padded_len) break;  // beyond frame coverage: stays zero
      out.samples[static_cast<size_t>(ch)][i] = wsum[p] > 1e-12 ? acc[p] / wsum[p] : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampler

namespace {

// Modified Bessel function of the first kind, order zero (series expansion).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

struct SincKernel {
  // Tabulated right half of the symmetric kernel, `steps` entries per tap.
  std::vector<double> table;
  double half_width;  // in source samples
  int steps;

  double operator()(double t) const {
    const double a = std::abs(t);
    if (a >= half_width) return 0.0;
    const double pos = a * steps;
    const auto i = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= table.size()) return table.back() * (1.0 - frac);
    return table[i] * (1.0 - frac) + table[i + 1] * frac;
  }
};

SincKernel build_kernel(double ratio) {
  // ratio = target/source; cutoff shrinks and support widens when decimating
  const double scale = std::min(1.0, ratio);
  const double cutoff = 0.5 * scale * 0.95;
  const int taps_per_side = 32;
  SincKernel k;
  k.half_width = taps_per_side / scale;
  k.steps = 512;
  const double beta = 8.0;
  const double i0_beta = bessel_i0(beta);
  const auto count = static_cast<size_t>(k.half_width * k.steps) + 2;
  k.table.resize(count);
  for (size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / k.steps;
    const double x = t / k.half_width;  // [0, 1]
    if (x >= 1.0) {
      k.table[i] = 0.0;
      continue;
    }
    const double sinc_arg = 2.0 * cutoff * t;
    const double sinc = sinc_arg == 0.0
                            ? 1.0
                            : std::sin(kTwoPi / 2.0 * sinc_arg) / (kTwoPi / 2.0 * sinc_arg);
    const double kaiser = bessel_i0(beta * std::sqrt(1.0 - x * x)) / i0_beta;
    k.table[i] = 2.0 * cutoff * sinc * kaiser;
  }
  return k;
}

}  // namespace

AudioClip resample(const AudioClip& clip, int target_rate) {
  clip.validate();
  if (target_rate <= 0) raise(ErrorCode::invalid_input, "target rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const int source_rate = clip.sample_rate;
  const double ratio = static_cast<double>(target_rate) / source_rate;
  const size_t in_len = clip.length();
  const auto out_len =
      static_cast<size_t>(std::llround(static_cast<double>(in_len) * ratio));

  const SincKernel kernel = build_kernel(ratio);
  AudioClip out = AudioClip::zeros(clip.channels(), out_len, target_rate);

  for (size_t n = 0; n < out_len; ++n) {
    // exact rational source position: n * source / target
    const unsigned long long num =
        static_cast<unsigned long long>(n) * static_cast<unsigned long long>(source_rate);
    const auto center_int = static_cast<long long>(num / target_rate);
    const double frac =
        static_cast<double>(num % static_cast<unsigned long long>(target_rate)) / target_rate;
    const auto lo = static_cast<long long>(
        std::ceil(static_cast<double>(center_int) + frac - kernel.half_width));
    const auto hi = static_cast<long long>(
        std::floor(static_cast<double>(center_int) + frac + kernel.half_width));

    double wsum = 0.0;
    for (long long k = lo; k <= hi; ++k)
      wsum += kernel(static_cast<double>(center_int - k) + frac);
    if (wsum == 0.0) wsum = 1.0;

    for (int ch = 0; ch < clip.channels(); ++ch) {
      const auto& x = clip.samples[static_cast<size_t>(ch)];
      double acc = 0.0;
      for (long long k = std::max<long long>(0, lo);
           k <= std::min<long long>(static_cast<long long>(in_len) - 1, hi); ++k)
        acc += x[static_cast<size_t>(k)] *
               kernel(static_cast<double>(center_int - k) + frac);
      out.samples[static_cast<size_t>(ch)][n] = acc / wsum;  // unit DC gain per phase
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

Spectrogram segment_to_standard(const AudioClip& clip, const SegmentSpec& spec,
                                double offset_s) {
  spec.validate();
  clip.validate();
  if (clip.sample_rate != spec.rate)
    raise(ErrorCode::invalid_input,
          "clip rate " + std::to_string(clip.sample_rate) + " != segment rate " +
              std::to_string(spec.rate));

  const AudioClip stereo = to_stereo(clip);
  const auto start = static_cast<long long>(std::llround(offset_s * spec.rate));
  const size_t need = spec.segment_samples();
  if (start < 0 || static_cast<size_t>(start) + need > stereo.length())
    raise(ErrorCode::segment_out_of_range,
          "segment [" + std::to_string(offset_s) + "s, +" +
              std::to_string(spec.duration_s) + "s) outside clip of " +
              std::to_string(stereo.duration_s()) + "s");

  AudioClip excerpt = AudioClip::zeros(2, need, spec.rate);
  for (int ch = 0; ch < 2; ++ch)
    std::copy_n(stereo.samples[static_cast<size_t>(ch)].begin() + start, need,
                excerpt.samples[static_cast<size_t>(ch)].begin());

  const Spectrogram full = stft(excerpt, spec.window, spec.hop);
  // exact frame count guaranteed by SegmentSpec::validate
  Spectrogram out = Spectrogram::magnitude_zeros(2, spec.frames, spec.bins,
                                                 spec.window, spec.hop, spec.rate);
  for (int ch = 0; ch < 2; ++ch)
    for (int f = 0; f < spec.frames; ++f)
      for (int b = 0; b < spec.bins; ++b)  // top bin dropped
        out.m_at(ch, f, b) = std::abs(full.c_at(ch, f, b));
  return out;
}

}  // namespace svs
