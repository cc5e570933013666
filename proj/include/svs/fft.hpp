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
#ifndef SVS_FFT_HPP
#define SVS_FFT_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace svs {

/// In-place radix-2 Cooley-Tukey transform. Size must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse);

bool is_power_of_two(size_t n);
size_t next_power_of_two(size_t n);

/// Forward transform of a real signal (power-of-two length n); returns the
/// n/2+1 nonredundant bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

/// Inverse of rfft: n/2+1 bins back to n real samples.
std::vector<double> irfft(std::span<const std::complex<double>> bins, size_t n);

}  // namespace svs

#endif  // SVS_FFT_HPP
