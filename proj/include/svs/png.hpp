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
#ifndef SVS_PNG_HPP
#define SVS_PNG_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svs/dsp.hpp"

namespace svs {

/// Minimal grayscale-8 PNG writer (stored deflate blocks, no compression).
void write_png_gray8(const std::filesystem::path& path, const std::vector<uint8_t>& pixels,
                     int width, int height);

/// Log-magnitude rendering of one channel, frequency on the vertical axis
/// (low bins at the bottom), time left to right.
void write_spectrogram_png(const std::filesystem::path& path, const Spectrogram& spec,
                           int channel = 0, double dynamic_range_db = 80.0);

}  // namespace svs

#endif  // SVS_PNG_HPP
