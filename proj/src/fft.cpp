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
#include "svs/fft.hpp"

#include <cmath>

#include "svs/errors.hpp"

namespace svs {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

bool is_power_of_two(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_power_of_two(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0) raise(ErrorCode::invalid_input, "fft of empty vector");
  if (!is_power_of_two(n))
    raise(ErrorCode::invalid_input, "fft size must be a power of two");

  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const size_t n = x.size();
  if (!is_power_of_two(n))
    raise(ErrorCode::invalid_input, "rfft length must be a power of two");
  std::vector<std::complex<double>> a(n);
  for (size_t i = 0; i < n; ++i) a[i] = std::complex<double>(x[i], 0.0);
  fft(a, false);
  a.resize(n / 2 + 1);
  return a;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, size_t n) {
  if (!is_power_of_two(n))
    raise(ErrorCode::invalid_input, "irfft length must be a power of two");
  if (bins.size() != n / 2 + 1)
    raise(ErrorCode::invalid_input, "irfft expects n/2+1 bins");
  std::vector<std::complex<double>> a(n);
  a[0] = bins[0];
  a[n / 2] = bins[n / 2];
  for (size_t k = 1; k < n / 2; ++k) {
    a[k] = bins[k];
    a[n - k] = std::conj(bins[k]);
  }
  fft(a, true);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = a[i].real();
  return out;
}

}  // namespace svs
