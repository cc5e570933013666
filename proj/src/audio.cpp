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
#include "svs/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "svs/errors.hpp"

namespace svs {

namespace {

// RIFF chunks are little-endian; so are all targets we care about, but the
// byte-level codecs below keep file I/O independent of host endianness.
uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

float bits_to_float(uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

uint32_t float_to_bits(float f) {
  uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  return bits;
}

}  // namespace

AudioClip AudioClip::zeros(int channels, size_t length, int sample_rate) {
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.assign(static_cast<size_t>(channels), std::vector<double>(length, 0.0));
  return clip;
}

void AudioClip::validate() const {
  if (sample_rate <= 0) raise(ErrorCode::invalid_input, "sample rate must be positive");
  if (samples.empty()) raise(ErrorCode::invalid_input, "clip has no channels");
  for (const auto& ch : samples) {
    if (ch.size() != samples[0].size())
      raise(ErrorCode::invalid_input, "channel lengths differ");
  }
}

AudioClip downmix_mono(const AudioClip& clip) {
  clip.validate();
  AudioClip out = AudioClip::zeros(1, clip.length(), clip.sample_rate);
  const double scale = 1.0 / clip.channels();
  for (const auto& ch : clip.samples)
    for (size_t i = 0; i < ch.size(); ++i) out.samples[0][i] += ch[i] * scale;
  return out;
}

AudioClip to_stereo(const AudioClip& clip) {
  clip.validate();
  if (clip.channels() == 2) return clip;
  if (clip.channels() == 1) {
    AudioClip out = clip;
    out.samples.push_back(clip.samples[0]);
    return out;
  }
  raise(ErrorCode::invalid_input, "only 1- or 2-channel clips supported");
}

AudioClip mix_clips(const std::vector<AudioClip>& clips) {
  if (clips.empty()) raise(ErrorCode::invalid_input, "nothing to mix");
  AudioClip out = clips[0];
  for (size_t k = 1; k < clips.size(); ++k) {
    const AudioClip& c = clips[k];
    if (c.channels() != out.channels() || c.length() != out.length() ||
        c.sample_rate != out.sample_rate)
      raise(ErrorCode::shape_mismatch, "clips to mix must share shape and rate");
    for (int ch = 0; ch < out.channels(); ++ch)
      for (size_t i = 0; i < out.length(); ++i) out.samples[ch][i] += c.samples[ch][i];
  }
  return out;
}

double rms(const AudioClip& clip) {
  clip.validate();
  double acc = 0.0;
  size_t n = 0;
  for (const auto& ch : clip.samples) {
    for (const double s : ch) acc += s * s;
    n += ch.size();
  }
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::io_error, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    raise(ErrorCode::io_error, "not a RIFF/WAVE file: " + path.string());

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  const uint8_t* data = nullptr;
  uint32_t data_len = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
    const uint8_t* body = bytes.data() + pos + 8;
    if (pos + 8 + chunk_len > bytes.size())
      raise(ErrorCode::io_error, "truncated chunk in " + path.string());
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data = body;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data == nullptr)
    raise(ErrorCode::io_error, "missing fmt or data chunk: " + path.string());
  if (channels < 1 || channels > 2)
    raise(ErrorCode::io_error, "unsupported channel count " + std::to_string(channels));

  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    raise(ErrorCode::io_error, "unsupported WAV encoding (want PCM16 or float32)");

  const uint32_t bytes_per_sample = pcm16 ? 2 : 4;
  const uint32_t frame_size = bytes_per_sample * channels;
  const size_t frames = data_len / frame_size;

  AudioClip clip = AudioClip::zeros(channels, frames, static_cast<int>(rate));
  for (size_t i = 0; i < frames; ++i) {
    for (uint16_t ch = 0; ch < channels; ++ch) {
      const uint8_t* p = data + i * frame_size + ch * bytes_per_sample;
      if (pcm16) {
        const int16_t v = static_cast<int16_t>(read_u16(p));
        clip.samples[ch][i] = static_cast<double>(v) / 32768.0;
      } else {
        clip.samples[ch][i] = static_cast<double>(bits_to_float(read_u32(p)));
      }
    }
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavFormat format) {
  clip.validate();
  if (clip.channels() > 2)
    raise(ErrorCode::invalid_input, "WAV writer supports 1 or 2 channels");

  const uint16_t channels = static_cast<uint16_t>(clip.channels());
  const size_t frames = clip.length();
  const bool f32 = format == WavFormat::float32;
  const uint16_t bits = f32 ? 32 : 16;
  const uint16_t block_align = static_cast<uint16_t>(channels * bits / 8);
  const uint32_t data_len = static_cast<uint32_t>(frames * block_align);
  const uint32_t fact_len = f32 ? 12 : 0;  // float WAVs carry a fact chunk

  std::string out;
  out.reserve(44 + fact_len + data_len);
  out.append("RIFF");
  put_u32(out, 4 + 24 + fact_len + 8 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, f32 ? 3 : 1);
  put_u16(out, channels);
  put_u32(out, static_cast<uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<uint32_t>(clip.sample_rate) * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  if (f32) {
    out.append("fact");
    put_u32(out, 4);
    put_u32(out, static_cast<uint32_t>(frames));
  }
  out.append("data");
  put_u32(out, data_len);

  for (size_t i = 0; i < frames; ++i) {
    for (uint16_t ch = 0; ch < channels; ++ch) {
      const double s = clip.samples[ch][i];
      if (f32) {
        put_u32(out, float_to_bits(static_cast<float>(s)));
      } else {
        const double clamped = std::clamp(s, -1.0, 1.0);
        const auto v = static_cast<int16_t>(std::lrint(clamped * 32767.0));
        put_u16(out, static_cast<uint16_t>(v));
      }
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(ErrorCode::io_error, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) raise(ErrorCode::io_error, "short write to " + path.string());
}

}  // namespace svs
