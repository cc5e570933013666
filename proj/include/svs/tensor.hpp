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
#ifndef SVS_TENSOR_HPP
#define SVS_TENSOR_HPP

#include <cstddef>
#include <vector>

#include "svs/dsp.hpp"
#include "svs/errors.hpp"

namespace svs {

struct Shape3 {
  int c = 0, h = 0, w = 0;
  bool operator==(const Shape3&) const = default;
  size_t count() const {
    return static_cast<size_t>(c) * static_cast<size_t>(h) * static_cast<size_t>(w);
  }
};

/// Dense (channel, row, col) grid of doubles; the network currency.
struct Tensor3 {
  Shape3 shape{};
  std::vector<double> v;

  static Tensor3 zeros(Shape3 s) {
    Tensor3 t;
    t.shape = s;
    t.v.assign(s.count(), 0.0);
    return t;
  }

  double& at(int c, int y, int x) {
    return v[(static_cast<size_t>(c) * shape.h + static_cast<size_t>(y)) * shape.w + x];
  }
  double at(int c, int y, int x) const {
    return v[(static_cast<size_t>(c) * shape.h + static_cast<size_t>(y)) * shape.w + x];
  }
  double* plane(int c) { return v.data() + static_cast<size_t>(c) * shape.h * shape.w; }
  const double* plane(int c) const {
    return v.data() + static_cast<size_t>(c) * shape.h * shape.w;
  }
};

inline Tensor3 tensor_from_magnitude(const Spectrogram& spec) {
  if (spec.kind() != Spectrogram::Kind::magnitude)
    raise(ErrorCode::kind_mismatch, "tensor conversion needs a magnitude grid");
  Tensor3 t = Tensor3::zeros({spec.channels(), spec.frames(), spec.bins()});
  t.v = spec.magnitude_values();
  return t;
}

inline Spectrogram magnitude_from_tensor(const Tensor3& t, int window, int hop,
                                         int sample_rate) {
  auto spec = Spectrogram::magnitude_zeros(t.shape.c, t.shape.h, t.shape.w, window,
                                           hop, sample_rate);
  spec.magnitude_values() = t.v;
  return spec;
}

}  // namespace svs

#endif  // SVS_TENSOR_HPP
