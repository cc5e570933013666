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
#include "svs/png.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "svs/errors.hpp"

namespace svs {

namespace {

uint32_t crc32_table_entry(uint32_t n) {
  uint32_t c = n;
  for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
  return c;
}

uint32_t crc32(const uint8_t* data, size_t len, uint32_t crc = 0xffffffffu) {
  static uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (uint32_t n = 0; n < 256; ++n) table[n] = crc32_table_entry(n);
    init = true;
  }
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc;
}

uint32_t adler32(const uint8_t* data, size_t len) {
  uint32_t a = 1, b = 0;
  for (size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::vector<uint8_t>& out, const char type[4],
               const std::vector<uint8_t>& body) {
  put_be32(out, static_cast<uint32_t>(body.size()));
  const size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), body.begin(), body.end());
  put_be32(out, crc32(out.data() + crc_start, out.size() - crc_start) ^ 0xffffffffu);
}

}  // namespace

void write_png_gray8(const std::filesystem::path& path, const std::vector<uint8_t>& pixels,
                     int width, int height) {
  if (width <= 0 || height <= 0 ||
      pixels.size() != static_cast<size_t>(width) * static_cast<size_t>(height))
    raise(ErrorCode::invalid_input, "pixel buffer does not match dimensions");

  // raw scanlines with filter byte 0
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(height) * (static_cast<size_t>(width) + 1));
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    const auto* row = pixels.data() + static_cast<size_t>(y) * width;
    raw.insert(raw.end(), row, row + width);
  }

  // zlib stream with stored (uncompressed) deflate blocks
  std::vector<uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t pos = 0;
  while (pos < raw.size()) {
    const size_t n = std::min<size_t>(65535, raw.size() - pos);
    const bool final = pos + n == raw.size();
    z.push_back(final ? 1 : 0);
    z.push_back(static_cast<uint8_t>(n & 0xff));
    z.push_back(static_cast<uint8_t>(n >> 8));
    z.push_back(static_cast<uint8_t>(~n & 0xff));
    z.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<long>(pos),
             raw.begin() + static_cast<long>(pos + n));
    pos += n;
  }
  put_be32(z, adler32(raw.data(), raw.size()));

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<uint8_t> ihdr;
  put_be32(ihdr, static_cast<uint32_t>(width));
  put_be32(ihdr, static_cast<uint32_t>(height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(ErrorCode::io_error, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

void write_spectrogram_png(const std::filesystem::path& path, const Spectrogram& spec,
                           int channel, double dynamic_range_db) {
  if (spec.kind() != Spectrogram::Kind::magnitude)
    raise(ErrorCode::kind_mismatch, "spectrogram rendering needs magnitudes");
  if (channel < 0 || channel >= spec.channels())
    raise(ErrorCode::invalid_input, "channel out of range");

  double peak = 0.0;
  for (int f = 0; f < spec.frames(); ++f)
    for (int b = 0; b < spec.bins(); ++b) peak = std::max(peak, spec.m_at(channel, f, b));
  if (peak <= 0.0) peak = 1.0;

  const int width = spec.frames(), height = spec.bins();
  std::vector<uint8_t> pixels(static_cast<size_t>(width) * height, 0);
  for (int f = 0; f < width; ++f)
    for (int b = 0; b < height; ++b) {
      const double v = spec.m_at(channel, f, b);
      const double db = v > 0.0 ? 20.0 * std::log10(v / peak) : -dynamic_range_db;
      const double unit = std::clamp(1.0 + db / dynamic_range_db, 0.0, 1.0);
      // low frequencies at the bottom of the image
      pixels[static_cast<size_t>(height - 1 - b) * width + f] =
          static_cast<uint8_t>(std::lround(unit * 255.0));
    }
  write_png_gray8(path, pixels, width, height);
}

}  // namespace svs
