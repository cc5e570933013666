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
#include "svs/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "svs/errors.hpp"

namespace svs {

using nlohmann::json;

// ---------------------------------------------------------------------------
// UNetConfig

void UNetConfig::validate() const {
  if (depth < 1) raise(ErrorCode::invalid_config, "depth must be >= 1");
  if (base_channels < 1) raise(ErrorCode::invalid_config, "base_channels must be >= 1");
  if (kernel != 5 || stride != 2)
    raise(ErrorCode::invalid_config, "only 5x5 kernels with stride 2 are supported");
  if (in_channels < 1 || frames < 1 || bins < 1)
    raise(ErrorCode::invalid_config, "input shape fields must be positive");
  const int div = 1 << depth;
  if (frames % div != 0 || bins % div != 0)
    raise(ErrorCode::invalid_config,
          "frames and bins must be divisible by 2^depth = " + std::to_string(div));
  if (dropout < 0.0 || dropout >= 1.0)
    raise(ErrorCode::invalid_config, "dropout must be in [0, 1)");
}

UNetConfig UNetConfig::desk_scale() {
  UNetConfig c;
  c.depth = 3;
  c.base_channels = 8;
  c.frames = 128;
  c.bins = 256;
  return c;
}

std::string UNetConfig::to_json_string() const {
  json doc;
  doc["depth"] = depth;
  doc["base_channels"] = base_channels;
  doc["kernel"] = kernel;
  doc["stride"] = stride;
  doc["dropout"] = dropout;
  doc["dropout_layers"] = dropout_layers;
  doc["in_channels"] = in_channels;
  doc["frames"] = frames;
  doc["bins"] = bins;
  doc["leaky_slope"] = leaky_slope;
  doc["norm_epsilon"] = norm_epsilon;
  doc["norm_momentum"] = norm_momentum;
  return doc.dump();
}

UNetConfig UNetConfig::from_json_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::invalid_config, "config parse error: " + std::string(e.what()));
  }
  UNetConfig c;
  c.depth = doc.value("depth", c.depth);
  c.base_channels = doc.value("base_channels", c.base_channels);
  c.kernel = doc.value("kernel", c.kernel);
  c.stride = doc.value("stride", c.stride);
  c.dropout = doc.value("dropout", c.dropout);
  c.dropout_layers = doc.value("dropout_layers", c.dropout_layers);
  c.in_channels = doc.value("in_channels", c.in_channels);
  c.frames = doc.value("frames", c.frames);
  c.bins = doc.value("bins", c.bins);
  c.leaky_slope = doc.value("leaky_slope", c.leaky_slope);
  c.norm_epsilon = doc.value("norm_epsilon", c.norm_epsilon);
  c.norm_momentum = doc.value("norm_momentum", c.norm_momentum);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Convolution primitives. Strided 5x5 gather with pad 1 halves each spatial
// axis; the scatter adjoint doubles it. Weight layouts: conv W[co][ci][ky][kx],
// deconv W[ci][co][ky][kx].

namespace {

constexpr int kPad = 1;

struct KRange {
  int lo, hi;  // valid kernel-tap range [lo, hi)
};

inline KRange tap_range(int origin, int k, int limit) {
  return {std::max(0, -origin), std::min(k, limit - origin)};
}

void conv_forward(const double* x, Shape3 xs, const double* w, const double* b,
                  int k, int s, double* y, Shape3 ys) {
  const int hw_in = xs.h * xs.w;
  for (int co = 0; co < ys.c; ++co) {
    double* yplane = y + static_cast<size_t>(co) * ys.h * ys.w;
    for (int oy = 0; oy < ys.h; ++oy) {
      const int iy0 = oy * s - kPad;
      const KRange kyr = tap_range(iy0, k, xs.h);
      for (int ox = 0; ox < ys.w; ++ox) {
        const int ix0 = ox * s - kPad;
        const KRange kxr = tap_range(ix0, k, xs.w);
        double acc = b ? b[co] : 0.0;
        for (int ci = 0; ci < xs.c; ++ci) {
          const double* xplane = x + static_cast<size_t>(ci) * hw_in;
          const double* wbase =
              w + ((static_cast<size_t>(co) * xs.c + ci) * k) * k;
          for (int ky = kyr.lo; ky < kyr.hi; ++ky) {
            const double* xrow = xplane + static_cast<size_t>(iy0 + ky) * xs.w + ix0;
            const double* wrow = wbase + static_cast<size_t>(ky) * k;
            for (int kx = kxr.lo; kx < kxr.hi; ++kx) acc += wrow[kx] * xrow[kx];
          }
        }
        yplane[static_cast<size_t>(oy) * ys.w + ox] = acc;
      }
    }
  }
}

void conv_backward_input(const double* gy, Shape3 ys, const double* w, int k, int s,
                         double* gx, Shape3 xs) {
  std::fill(gx, gx + xs.count(), 0.0);
  const int hw_in = xs.h * xs.w;
  for (int co = 0; co < ys.c; ++co) {
    const double* gyplane = gy + static_cast<size_t>(co) * ys.h * ys.w;
    for (int oy = 0; oy < ys.h; ++oy) {
      const int iy0 = oy * s - kPad;
      const KRange kyr = tap_range(iy0, k, xs.h);
      for (int ox = 0; ox < ys.w; ++ox) {
        const int ix0 = ox * s - kPad;
        const KRange kxr = tap_range(ix0, k, xs.w);
        const double g = gyplane[static_cast<size_t>(oy) * ys.w + ox];
        if (g == 0.0) continue;
        for (int ci = 0; ci < xs.c; ++ci) {
          double* gxplane = gx + static_cast<size_t>(ci) * hw_in;
          const double* wbase =
              w + ((static_cast<size_t>(co) * xs.c + ci) * k) * k;
          for (int ky = kyr.lo; ky < kyr.hi; ++ky) {
            double* gxrow = gxplane + static_cast<size_t>(iy0 + ky) * xs.w + ix0;
            const double* wrow = wbase + static_cast<size_t>(ky) * k;
            for (int kx = kxr.lo; kx < kxr.hi; ++kx) gxrow[kx] += g * wrow[kx];
          }
        }
      }
    }
  }
}

void conv_backward_params(const double* x, Shape3 xs, const double* gy, Shape3 ys,
                          int k, int s, double* gw, double* gb) {
  const int hw_in = xs.h * xs.w;
  for (int co = 0; co < ys.c; ++co) {
    const double* gyplane = gy + static_cast<size_t>(co) * ys.h * ys.w;
    for (int oy = 0; oy < ys.h; ++oy) {
      const int iy0 = oy * s - kPad;
      const KRange kyr = tap_range(iy0, k, xs.h);
      for (int ox = 0; ox < ys.w; ++ox) {
        const int ix0 = ox * s - kPad;
        const KRange kxr = tap_range(ix0, k, xs.w);
        const double g = gyplane[static_cast<size_t>(oy) * ys.w + ox];
        gb[co] += g;
        if (g == 0.0) continue;
        for (int ci = 0; ci < xs.c; ++ci) {
          const double* xplane = x + static_cast<size_t>(ci) * hw_in;
          double* gwbase = gw + ((static_cast<size_t>(co) * xs.c + ci) * k) * k;
          for (int ky = kyr.lo; ky < kyr.hi; ++ky) {
            const double* xrow = xplane + static_cast<size_t>(iy0 + ky) * xs.w + ix0;
            double* gwrow = gwbase + static_cast<size_t>(ky) * k;
            for (int kx = kxr.lo; kx < kxr.hi; ++kx) gwrow[kx] += g * xrow[kx];
          }
        }
      }
    }
  }
}

// scatter: y[co][oy*s-pad+ky][ox*s-pad+kx] += w[ci][co][ky][kx] * x[ci][oy][ox]
void deconv_forward(const double* x, Shape3 xs, const double* w, const double* b,
                    int k, int s, double* y, Shape3 ys) {
  for (int co = 0; co < ys.c; ++co) {
    double* yplane = y + static_cast<size_t>(co) * ys.h * ys.w;
    const double fill = b ? b[co] : 0.0;
    std::fill(yplane, yplane + static_cast<size_t>(ys.h) * ys.w, fill);
  }
  const int hw_in = xs.h * xs.w;
  for (int ci = 0; ci < xs.c; ++ci) {
    const double* xplane = x + static_cast<size_t>(ci) * hw_in;
    for (int oy = 0; oy < xs.h; ++oy) {
      const int iy0 = oy * s - kPad;
      const KRange kyr = tap_range(iy0, k, ys.h);
      for (int ox = 0; ox < xs.w; ++ox) {
        const int ix0 = ox * s - kPad;
        const KRange kxr = tap_range(ix0, k, ys.w);
        const double v = xplane[static_cast<size_t>(oy) * xs.w + ox];
        if (v == 0.0) continue;
        for (int co = 0; co < ys.c; ++co) {
          double* yplane = y + static_cast<size_t>(co) * ys.h * ys.w;
          const double* wbase =
              w + ((static_cast<size_t>(ci) * ys.c + co) * k) * k;
          for (int ky = kyr.lo; ky < kyr.hi; ++ky) {
            double* yrow = yplane + static_cast<size_t>(iy0 + ky) * ys.w + ix0;
            const double* wrow = wbase + static_cast<size_t>(ky) * k;
            for (int kx = kxr.lo; kx < kxr.hi; ++kx) yrow[kx] += v * wrow[kx];
          }
        }
      }
    }
  }
}

void deconv_backward_input(const double* gy, Shape3 ys, const double* w, int k,
                           int s, double* gx, Shape3 xs) {
  // gather adjoint of the scatter above
  for (int ci = 0; ci < xs.c; ++ci) {
    double* gxplane = gx + static_cast<size_t>(ci) * xs.h * xs.w;
    for (int oy = 0; oy < xs.h; ++oy) {
      const int iy0 = oy * s - kPad;
      const KRange kyr = tap_range(iy0, k, ys.h);
      for (int ox = 0; ox < xs.w; ++ox) {
        const int ix0 = ox * s - kPad;
        const KRange kxr = tap_range(ix0, k, ys.w);
        double acc = 0.0;
        for (int co = 0; co < ys.c; ++co) {
          const double* gyplane = gy + static_cast<size_t>(co) * ys.h * ys.w;
          const double* wbase =
              w + ((static_cast<size_t>(ci) * ys.c + co) * k) * k;
          for (int ky = kyr.lo; ky < kyr.hi; ++ky) {
            const double* gyrow =
                gyplane + static_cast<size_t>(iy0 + ky) * ys.w + ix0;
            const double* wrow = wbase + static_cast<size_t>(ky) * k;
            for (int kx = kxr.lo; kx < kxr.hi; ++kx) acc += gyrow[kx] * wrow[kx];
          }
        }
        gxplane[static_cast<size_t>(oy) * xs.w + ox] = acc;
      }
    }
  }
}

void deconv_backward_params(const double* x, Shape3 xs, const double* gy, Shape3 ys,
                            int k, int s, double* gw, double* gb) {
  for (int co = 0; co < ys.c; ++co) {
    const double* gyplane = gy + static_cast<size_t>(co) * ys.h * ys.w;
    double acc = 0.0;
    for (int i = 0; i < ys.h * ys.w; ++i) acc += gyplane[i];
    gb[co] += acc;
  }
  const int hw_in = xs.h * xs.w;
  for (int ci = 0; ci < xs.c; ++ci) {
    const double* xplane = x + static_cast<size_t>(ci) * hw_in;
    for (int oy = 0; oy < xs.h; ++oy) {
      const int iy0 = oy * s - kPad;
      const KRange kyr = tap_range(iy0, k, ys.h);
      for (int ox = 0; ox < xs.w; ++ox) {
        const int ix0 = ox * s - kPad;
        const KRange kxr = tap_range(ix0, k, ys.w);
        const double v = xplane[static_cast<size_t>(oy) * xs.w + ox];
        if (v == 0.0) continue;
        for (int co = 0; co < ys.c; ++co) {
          const double* gyplane = gy + static_cast<size_t>(co) * ys.h * ys.w;
          double* gwbase = gw + ((static_cast<size_t>(ci) * ys.c + co) * k) * k;
          for (int ky = kyr.lo; ky < kyr.hi; ++ky) {
            const double* gyrow =
                gyplane + static_cast<size_t>(iy0 + ky) * ys.w + ix0;
            double* gwrow = gwbase + static_cast<size_t>(ky) * k;
            for (int kx = kxr.lo; kx < kxr.hi; ++kx) gwrow[kx] += v * gyrow[kx];
          }
        }
      }
    }
  }
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ---------------------------------------------------------------------------
// UNet

UNet::UNet(const UNetConfig& config) : config_(config) {
  config_.validate();
  const int k = config_.kernel;
  size_t p = 0, st = 0;

  auto enc_out_ch = [&](int i) { return config_.base_channels << i; };
  auto dec_out_ch = [&](int j) {
    return j < config_.depth - 1 ? (config_.base_channels << (config_.depth - 2 - j))
                                 : config_.base_channels;
  };

  for (int i = 0; i < config_.depth; ++i) {
    LayerOffsets L;
    L.in_ch = i == 0 ? config_.in_channels : enc_out_ch(i - 1);
    L.out_ch = enc_out_ch(i);
    L.conv_w = p;
    p += static_cast<size_t>(L.out_ch) * L.in_ch * k * k;
    L.conv_b = p;
    p += static_cast<size_t>(L.out_ch);
    L.gamma = p;
    p += static_cast<size_t>(L.out_ch);
    L.beta = p;
    p += static_cast<size_t>(L.out_ch);
    L.run_mean = st;
    st += static_cast<size_t>(L.out_ch);
    L.run_var = st;
    st += static_cast<size_t>(L.out_ch);
    enc_.push_back(L);
  }
  for (int j = 0; j < config_.depth; ++j) {
    LayerOffsets L;
    L.in_ch = j == 0 ? enc_out_ch(config_.depth - 1)
                     : dec_out_ch(j - 1) + enc_out_ch(config_.depth - 1 - j);
    L.out_ch = dec_out_ch(j);
    L.conv_w = p;
    p += static_cast<size_t>(L.in_ch) * L.out_ch * k * k;
    L.conv_b = p;
    p += static_cast<size_t>(L.out_ch);
    dec_.push_back(L);
  }
  head_.in_ch = config_.base_channels;
  head_.out_ch = config_.in_channels;
  head_.conv_w = p;
  p += static_cast<size_t>(head_.in_ch) * head_.out_ch;
  head_.conv_b = p;
  p += static_cast<size_t>(head_.out_ch);

  params_.assign(p, 0.0);
  stats_.assign(st, 0.0);
}

void UNet::init_params(Rng& rng) {
  const int k = config_.kernel;
  auto glorot = [&](size_t offset, size_t count, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (size_t i = 0; i < count; ++i)
      params_[offset + i] = rng.uniform(-limit, limit);
  };
  for (const auto& L : enc_) {
    glorot(L.conv_w, static_cast<size_t>(L.out_ch) * L.in_ch * k * k,
           L.in_ch * k * k, L.out_ch * k * k);
    std::fill_n(params_.begin() + static_cast<long>(L.conv_b), L.out_ch, 0.0);
    std::fill_n(params_.begin() + static_cast<long>(L.gamma), L.out_ch, 1.0);
    std::fill_n(params_.begin() + static_cast<long>(L.beta), L.out_ch, 0.0);
    std::fill_n(stats_.begin() + static_cast<long>(L.run_mean), L.out_ch, 0.0);
    std::fill_n(stats_.begin() + static_cast<long>(L.run_var), L.out_ch, 1.0);
  }
  for (const auto& L : dec_) {
    glorot(L.conv_w, static_cast<size_t>(L.in_ch) * L.out_ch * k * k,
           L.in_ch * k * k, L.out_ch * k * k);
    std::fill_n(params_.begin() + static_cast<long>(L.conv_b), L.out_ch, 0.0);
  }
  glorot(head_.conv_w, static_cast<size_t>(head_.in_ch) * head_.out_ch, head_.in_ch,
         head_.out_ch);
  std::fill_n(params_.begin() + static_cast<long>(head_.conv_b), head_.out_ch, 0.0);
}

struct UNet::Workspace {
  Tensor3 input;
  std::vector<Tensor3> enc_pre;    // conv outputs
  std::vector<Tensor3> enc_norm;   // normalized outputs (pre-activation)
  std::vector<Tensor3> enc_act;    // leaky relu outputs
  std::vector<std::vector<double>> norm_mean, norm_inv_std;  // per layer, per channel
  std::vector<Tensor3> dec_in;     // concatenated decoder inputs
  std::vector<Tensor3> dec_pre;    // deconv outputs
  std::vector<Tensor3> dec_act;    // relu (+dropout) outputs
  std::vector<std::vector<double>> drop_mask;  // empty when not applied
  Tensor3 head_pre;
  Tensor3 mask;
  Tensor3 estimate;
};

void UNet::run_forward(const Tensor3& mixture, bool training, uint64_t dropout_seed,
                       Workspace* ws, Tensor3* mask_out, Tensor3* estimate_out,
                       bool update_running_stats) {
  const auto& c = config_;
  if (mixture.shape.c != c.in_channels || mixture.shape.h != c.frames ||
      mixture.shape.w != c.bins)
    raise(ErrorCode::shape_mismatch,
          "mixture shape (" + std::to_string(mixture.shape.c) + "," +
              std::to_string(mixture.shape.h) + "," + std::to_string(mixture.shape.w) +
              ") does not match the configured input shape");

  const int k = c.kernel, s = c.stride;
  Workspace local;
  Workspace& w = ws ? *ws : local;
  w.input = mixture;
  w.enc_pre.resize(static_cast<size_t>(c.depth));
  w.enc_norm.resize(static_cast<size_t>(c.depth));
  w.enc_act.resize(static_cast<size_t>(c.depth));
  w.norm_mean.resize(static_cast<size_t>(c.depth));
  w.norm_inv_std.resize(static_cast<size_t>(c.depth));
  w.dec_in.resize(static_cast<size_t>(c.depth));
  w.dec_pre.resize(static_cast<size_t>(c.depth));
  w.dec_act.resize(static_cast<size_t>(c.depth));
  w.drop_mask.assign(static_cast<size_t>(c.depth), {});

  // encoder
  const Tensor3* x = &w.input;
  for (int i = 0; i < c.depth; ++i) {
    const auto& L = enc_[static_cast<size_t>(i)];
    const Shape3 ys{L.out_ch, x->shape.h / s, x->shape.w / s};
    auto& pre = w.enc_pre[static_cast<size_t>(i)];
    pre = Tensor3::zeros(ys);
    conv_forward(x->v.data(), x->shape, params_.data() + L.conv_w,
                 params_.data() + L.conv_b, k, s, pre.v.data(), ys);

    // per-channel normalization; batch statistics in training mode
    auto& norm = w.enc_norm[static_cast<size_t>(i)];
    norm = Tensor3::zeros(ys);
    auto& means = w.norm_mean[static_cast<size_t>(i)];
    auto& inv_stds = w.norm_inv_std[static_cast<size_t>(i)];
    means.assign(static_cast<size_t>(ys.c), 0.0);
    inv_stds.assign(static_cast<size_t>(ys.c), 0.0);
    const auto m_count = static_cast<double>(ys.h) * ys.w;
    for (int ch = 0; ch < ys.c; ++ch) {
      const double* src = pre.plane(ch);
      double mean, var;
      if (training) {
        double sum = 0.0;
        for (int i2 = 0; i2 < ys.h * ys.w; ++i2) sum += src[i2];
        mean = sum / m_count;
        double sq = 0.0;
        for (int i2 = 0; i2 < ys.h * ys.w; ++i2) {
          const double d = src[i2] - mean;
          sq += d * d;
        }
        var = sq / m_count;
        if (update_running_stats) {
          stats_[L.run_mean + static_cast<size_t>(ch)] =
              (1.0 - c.norm_momentum) * stats_[L.run_mean + static_cast<size_t>(ch)] +
              c.norm_momentum * mean;
          stats_[L.run_var + static_cast<size_t>(ch)] =
              (1.0 - c.norm_momentum) * stats_[L.run_var + static_cast<size_t>(ch)] +
              c.norm_momentum * var;
        }
      } else {
        mean = stats_[L.run_mean + static_cast<size_t>(ch)];
        var = stats_[L.run_var + static_cast<size_t>(ch)];
      }
      const double inv_std = 1.0 / std::sqrt(var + c.norm_epsilon);
      means[static_cast<size_t>(ch)] = mean;
      inv_stds[static_cast<size_t>(ch)] = inv_std;
      const double gamma = params_[L.gamma + static_cast<size_t>(ch)];
      const double beta = params_[L.beta + static_cast<size_t>(ch)];
      double* dst = norm.plane(ch);
      for (int i2 = 0; i2 < ys.h * ys.w; ++i2)
        dst[i2] = gamma * (src[i2] - mean) * inv_std + beta;
    }

    auto& act = w.enc_act[static_cast<size_t>(i)];
    act = Tensor3::zeros(ys);
    for (size_t i2 = 0; i2 < act.v.size(); ++i2) {
      const double z = norm.v[i2];
      act.v[i2] = z > 0.0 ? z : c.leaky_slope * z;
    }
    x = &act;
  }

  // decoder with skip concatenations
  Rng drop_rng(dropout_seed);
  const Tensor3* up = &w.enc_act[static_cast<size_t>(c.depth - 1)];
  for (int j = 0; j < c.depth; ++j) {
    const auto& L = dec_[static_cast<size_t>(j)];
    auto& din = w.dec_in[static_cast<size_t>(j)];
    if (j == 0) {
      din = *up;
    } else {
      const Tensor3& skip = w.enc_act[static_cast<size_t>(c.depth - 1 - j)];
      din = Tensor3::zeros({up->shape.c + skip.shape.c, up->shape.h, up->shape.w});
      std::copy(up->v.begin(), up->v.end(), din.v.begin());
      std::copy(skip.v.begin(), skip.v.end(),
                din.v.begin() + static_cast<long>(up->v.size()));
    }

    const Shape3 ys{L.out_ch, din.shape.h * s, din.shape.w * s};
    auto& pre = w.dec_pre[static_cast<size_t>(j)];
    pre = Tensor3::zeros(ys);
    deconv_forward(din.v.data(), din.shape, params_.data() + L.conv_w,
                   params_.data() + L.conv_b, k, s, pre.v.data(), ys);

    auto& act = w.dec_act[static_cast<size_t>(j)];
    act = Tensor3::zeros(ys);
    for (size_t i2 = 0; i2 < act.v.size(); ++i2)
      act.v[i2] = pre.v[i2] > 0.0 ? pre.v[i2] : 0.0;

    if (training && c.dropout > 0.0 && j < c.dropout_layers) {
      auto& mask = w.drop_mask[static_cast<size_t>(j)];
      mask.resize(act.v.size());
      const double keep = 1.0 - c.dropout;
      for (size_t i2 = 0; i2 < mask.size(); ++i2)
        mask[i2] = drop_rng.bernoulli(keep) ? 1.0 / keep : 0.0;
      for (size_t i2 = 0; i2 < act.v.size(); ++i2) act.v[i2] *= mask[i2];
    }
    up = &act;
  }

  // 1x1 head + sigmoid mask, estimate = mask * mixture
  const Shape3 full{c.in_channels, c.frames, c.bins};
  w.head_pre = Tensor3::zeros(full);
  const Tensor3& last = *up;
  for (int co = 0; co < c.in_channels; ++co) {
    double* dst = w.head_pre.plane(co);
    const double bias = params_[head_.conv_b + static_cast<size_t>(co)];
    for (int i2 = 0; i2 < full.h * full.w; ++i2) dst[i2] = bias;
    for (int ci = 0; ci < head_.in_ch; ++ci) {
      const double wv =
          params_[head_.conv_w + static_cast<size_t>(co) * head_.in_ch + ci];
      const double* src = last.plane(ci);
      for (int i2 = 0; i2 < full.h * full.w; ++i2) dst[i2] += wv * src[i2];
    }
  }
  w.mask = Tensor3::zeros(full);
  w.estimate = Tensor3::zeros(full);
  for (size_t i2 = 0; i2 < w.mask.v.size(); ++i2) {
    w.mask.v[i2] = sigmoid(w.head_pre.v[i2]);
    w.estimate.v[i2] = w.mask.v[i2] * mixture.v[i2];
  }

  if (mask_out) *mask_out = w.mask;
  if (estimate_out) *estimate_out = w.estimate;
}

UNet::ForwardResult UNet::forward(const Tensor3& mixture) const {
  ForwardResult out;
  // inference never mutates the network; const_cast is confined to the
  // non-mutating path (training=false, no stat updates)
  auto* self = const_cast<UNet*>(this);
  self->run_forward(mixture, /*training=*/false, 0, nullptr, &out.mask,
                    &out.estimate, /*update_running_stats=*/false);
  return out;
}

double UNet::training_loss(const Tensor3& mixture, const Tensor3& target,
                           uint64_t dropout_seed) const {
  Tensor3 estimate;
  auto* self = const_cast<UNet*>(this);
  self->run_forward(mixture, /*training=*/true, dropout_seed, nullptr, nullptr,
                    &estimate, /*update_running_stats=*/false);
  return l1_masked_loss(estimate, target);
}

double UNet::eval_loss(const Tensor3& mixture, const Tensor3& target) const {
  const auto out = forward(mixture);
  return l1_masked_loss(out.estimate, target);
}

namespace {

/// Names the first tensor holding a non-finite value, for diagnostics.
std::string find_nonfinite(const std::vector<std::pair<std::string, const Tensor3*>>& stages) {
  for (const auto& [name, t] : stages)
    for (const double v : t->v)
      if (!std::isfinite(v)) return name;
  return "unknown stage";
}

}  // namespace

double UNet::loss_and_gradient(const Tensor3& mixture, const Tensor3& target,
                               uint64_t dropout_seed, std::vector<double>& grad,
                               bool update_running_stats) {
  const auto& c = config_;
  if (!(target.shape == mixture.shape))
    raise(ErrorCode::shape_mismatch, "target shape differs from mixture shape");

  Workspace ws;
  run_forward(mixture, /*training=*/true, dropout_seed, &ws, nullptr, nullptr,
              update_running_stats);
  const double loss = l1_masked_loss(ws.estimate, target);

  if (!std::isfinite(loss)) {
    std::vector<std::pair<std::string, const Tensor3*>> stages;
    for (int i = 0; i < c.depth; ++i) {
      stages.emplace_back("encoder " + std::to_string(i) + " conv",
                          &ws.enc_pre[static_cast<size_t>(i)]);
      stages.emplace_back("encoder " + std::to_string(i) + " norm",
                          &ws.enc_norm[static_cast<size_t>(i)]);
    }
    for (int j = 0; j < c.depth; ++j)
      stages.emplace_back("decoder " + std::to_string(j) + " deconv",
                          &ws.dec_pre[static_cast<size_t>(j)]);
    stages.emplace_back("head", &ws.head_pre);
    raise(ErrorCode::numeric_error,
          "non-finite training loss; first bad stage: " + find_nonfinite(stages));
  }

  grad.assign(params_.size(), 0.0);
  const int k = c.kernel, s = c.stride;
  const auto n_total = static_cast<double>(ws.estimate.v.size());

  // d loss / d estimate, then d/d mask through the elementwise product
  Tensor3 g_mask = Tensor3::zeros(ws.mask.shape);
  for (size_t i = 0; i < g_mask.v.size(); ++i) {
    const double d = ws.estimate.v[i] - target.v[i];
    const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);  // subgradient 0 at kinks
    g_mask.v[i] = sign / n_total * mixture.v[i];
  }
  // sigmoid head backward
  Tensor3 g_head_pre = Tensor3::zeros(ws.head_pre.shape);
  for (size_t i = 0; i < g_head_pre.v.size(); ++i) {
    const double m = ws.mask.v[i];
    g_head_pre.v[i] = g_mask.v[i] * m * (1.0 - m);
  }
  // 1x1 conv backward
  const Tensor3& last_act = ws.dec_act[static_cast<size_t>(c.depth - 1)];
  Tensor3 g_last = Tensor3::zeros(last_act.shape);
  {
    const int hw = ws.head_pre.shape.h * ws.head_pre.shape.w;
    for (int co = 0; co < head_.out_ch; ++co) {
      const double* g = g_head_pre.plane(co);
      double gb = 0.0;
      for (int i2 = 0; i2 < hw; ++i2) gb += g[i2];
      grad[head_.conv_b + static_cast<size_t>(co)] += gb;
      for (int ci = 0; ci < head_.in_ch; ++ci) {
        const double* a = last_act.plane(ci);
        double* gl = g_last.plane(ci);
        const double wv =
            params_[head_.conv_w + static_cast<size_t>(co) * head_.in_ch + ci];
        double gw = 0.0;
        for (int i2 = 0; i2 < hw; ++i2) {
          gw += g[i2] * a[i2];
          gl[i2] += g[i2] * wv;
        }
        grad[head_.conv_w + static_cast<size_t>(co) * head_.in_ch + ci] += gw;
      }
    }
  }

  // decoder backward; skip-connection gradients accumulate per encoder layer
  std::vector<Tensor3> g_enc_act(static_cast<size_t>(c.depth));
  for (int i = 0; i < c.depth; ++i)
    g_enc_act[static_cast<size_t>(i)] =
        Tensor3::zeros(ws.enc_act[static_cast<size_t>(i)].shape);

  Tensor3 g_dec = std::move(g_last);
  for (int j = c.depth - 1; j >= 0; --j) {
    const auto& L = dec_[static_cast<size_t>(j)];
    const auto& pre = ws.dec_pre[static_cast<size_t>(j)];
    // dropout and relu backward
    const auto& drop = ws.drop_mask[static_cast<size_t>(j)];
    Tensor3 g_pre = Tensor3::zeros(pre.shape);
    for (size_t i = 0; i < g_pre.v.size(); ++i) {
      double g = g_dec.v[i];
      if (!drop.empty()) g *= drop[i];
      g_pre.v[i] = pre.v[i] > 0.0 ? g : 0.0;
    }
    const Tensor3& din = ws.dec_in[static_cast<size_t>(j)];
    Tensor3 g_din = Tensor3::zeros(din.shape);
    deconv_backward_params(din.v.data(), din.shape, g_pre.v.data(), pre.shape, k, s,
                           grad.data() + L.conv_w, grad.data() + L.conv_b);
    deconv_backward_input(g_pre.v.data(), pre.shape, params_.data() + L.conv_w, k, s,
                          g_din.v.data(), din.shape);
    if (j == 0) {
      auto& acc = g_enc_act[static_cast<size_t>(c.depth - 1)];
      for (size_t i = 0; i < acc.v.size(); ++i) acc.v[i] += g_din.v[i];
    } else {
      // split the concat gradient: decoder chain part, then the skip part
      const Tensor3& up_prev = ws.dec_act[static_cast<size_t>(j - 1)];
      Tensor3 g_up = Tensor3::zeros(up_prev.shape);
      std::copy_n(g_din.v.begin(), g_up.v.size(), g_up.v.begin());
      auto& acc = g_enc_act[static_cast<size_t>(c.depth - 1 - j)];
      for (size_t i = 0; i < acc.v.size(); ++i)
        acc.v[i] += g_din.v[g_up.v.size() + i];
      g_dec = std::move(g_up);
    }
  }

  // encoder backward
  for (int i = c.depth - 1; i >= 0; --i) {
    const auto& L = enc_[static_cast<size_t>(i)];
    const auto& norm = ws.enc_norm[static_cast<size_t>(i)];
    const auto& pre = ws.enc_pre[static_cast<size_t>(i)];
    const Shape3 ys = pre.shape;
    Tensor3& g_act = g_enc_act[static_cast<size_t>(i)];

    // leaky relu backward (slope on the negative side of its input)
    Tensor3 g_norm = Tensor3::zeros(ys);
    for (size_t i2 = 0; i2 < g_norm.v.size(); ++i2)
      g_norm.v[i2] = g_act.v[i2] * (norm.v[i2] > 0.0 ? 1.0 : c.leaky_slope);

    // normalization backward (batch-statistics path)
    Tensor3 g_pre = Tensor3::zeros(ys);
    const auto m_count = static_cast<double>(ys.h) * ys.w;
    for (int ch = 0; ch < ys.c; ++ch) {
      const double mean = ws.norm_mean[static_cast<size_t>(i)][static_cast<size_t>(ch)];
      const double inv_std =
          ws.norm_inv_std[static_cast<size_t>(i)][static_cast<size_t>(ch)];
      const double gamma = params_[L.gamma + static_cast<size_t>(ch)];
      const double* xp = pre.plane(ch);
      const double* gn = g_norm.plane(ch);
      double* gp = g_pre.plane(ch);
      double sum_g = 0.0, sum_gx = 0.0, g_gamma = 0.0;
      for (int i2 = 0; i2 < ys.h * ys.w; ++i2) {
        const double xhat = (xp[i2] - mean) * inv_std;
        sum_g += gn[i2];
        sum_gx += gn[i2] * xhat;
        g_gamma += gn[i2] * xhat;
      }
      grad[L.gamma + static_cast<size_t>(ch)] += g_gamma;
      grad[L.beta + static_cast<size_t>(ch)] += sum_g;
      const double mean_g = sum_g / m_count;
      const double mean_gx = sum_gx / m_count;
      for (int i2 = 0; i2 < ys.h * ys.w; ++i2) {
        const double xhat = (xp[i2] - mean) * inv_std;
        gp[i2] = gamma * inv_std * (gn[i2] - mean_g - xhat * mean_gx);
      }
    }

    const Tensor3& x =
        i == 0 ? ws.input : ws.enc_act[static_cast<size_t>(i - 1)];
    conv_backward_params(x.v.data(), x.shape, g_pre.v.data(), ys, k, s,
                         grad.data() + L.conv_w, grad.data() + L.conv_b);
    if (i > 0) {
      Tensor3 g_x = Tensor3::zeros(x.shape);
      conv_backward_input(g_pre.v.data(), ys, params_.data() + L.conv_w, k, s,
                          g_x.v.data(), x.shape);
      auto& acc = g_enc_act[static_cast<size_t>(i - 1)];
      for (size_t i2 = 0; i2 < acc.v.size(); ++i2) acc.v[i2] += g_x.v[i2];
    }
  }

  for (const double g : grad)
    if (!std::isfinite(g))
      raise(ErrorCode::numeric_error, "non-finite gradient after backward pass");
  return loss;
}

// ---------------------------------------------------------------------------
// Loss and optimizer

double l1_masked_loss(const Tensor3& estimate, const Tensor3& target) {
  if (!(estimate.shape == target.shape))
    raise(ErrorCode::shape_mismatch, "l1 loss needs equal shapes");
  double acc = 0.0;
  for (size_t i = 0; i < estimate.v.size(); ++i)
    acc += std::abs(estimate.v[i] - target.v[i]);
  return acc / static_cast<double>(estimate.v.size());
}

double l1_masked_loss(const Spectrogram& estimate, const Spectrogram& target) {
  if (!estimate.same_shape(target))
    raise(ErrorCode::shape_mismatch, "l1 loss needs equal shapes");
  const auto& a = estimate.magnitude_values();
  const auto& b = target.magnitude_values();
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  if (params.size() != grad.size())
    raise(ErrorCode::shape_mismatch, "gradient size differs from parameter size");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) raise(ErrorCode::invalid_config, "learning rate must be positive");
  if (batch_size != 1)
    raise(ErrorCode::invalid_config, "this pipeline trains with batch size 1");
  if (epochs < 1 || steps_per_epoch < 1)
    raise(ErrorCode::invalid_config, "epochs and steps_per_epoch must be positive");
  if (patience < 0) raise(ErrorCode::invalid_config, "patience must be >= 0");
}

TrainHistory train_model(UNet& net, const std::string& source,
                         const SampleStream& stream,
                         const std::vector<TrainingSample>& validation,
                         const TrainConfig& config) {
  config.validate();
  if (!stream) raise(ErrorCode::invalid_input, "training sample stream is empty");
  if (validation.empty())
    raise(ErrorCode::invalid_input, "at least one validation sample is required");

  const Rng base(config.seed);
  Rng init_rng = base.fork("init/" + source);
  net.init_params(init_rng);

  // fixed validation tensors
  std::vector<std::pair<Tensor3, Tensor3>> val;
  val.reserve(validation.size());
  for (const auto& sample : validation) {
    const auto it = sample.targets.find(source);
    if (it == sample.targets.end())
      raise(ErrorCode::missing_stem, "validation sample lacks target '" + source + "'");
    val.emplace_back(tensor_from_magnitude(sample.mixture),
                     tensor_from_magnitude(it->second));
  }
  auto validation_loss = [&]() {
    double acc = 0.0;
    for (const auto& [mix, tgt] : val) acc += net.eval_loss(mix, tgt);
    return acc / static_cast<double>(val.size());
  };

  TrainHistory history;
  history.val_loss.push_back(validation_loss());

  AdamState adam;
  std::vector<double> grad;
  double best_val = history.val_loss[0];
  std::vector<double> best_params = net.params();
  std::vector<double> best_stats = net.stats();
  int best_epoch = 0;
  int since_best = 0;

  const bool checkpointing = !config.checkpoint_dir.empty();
  if (checkpointing) std::filesystem::create_directories(config.checkpoint_dir);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int step = 0; step < config.steps_per_epoch; ++step) {
      Rng step_rng = base.fork("train/" + source + "/epoch/" + std::to_string(epoch) +
                               "/step/" + std::to_string(step));
      TrainingSample sample = stream(step_rng);
      const auto it = sample.targets.find(source);
      if (it == sample.targets.end())
        raise(ErrorCode::missing_stem, "training sample lacks target '" + source + "'");
      const Tensor3 mix = tensor_from_magnitude(sample.mixture);
      const Tensor3 tgt = tensor_from_magnitude(it->second);
      const uint64_t drop_seed = step_rng.fork("dropout").seed();
      const double loss = net.loss_and_gradient(mix, tgt, drop_seed, grad, true);
      adam_step(net.params(), grad, adam, config.learning_rate, config.beta1,
                config.beta2, config.adam_epsilon);
      epoch_loss += loss;
      ++history.total_steps;
    }
    history.train_loss.push_back(epoch_loss / config.steps_per_epoch);
    history.val_loss.push_back(validation_loss());
    history.epochs_run = epoch;

    const double current = history.val_loss.back();
    if (current < best_val) {
      best_val = current;
      best_params = net.params();
      best_stats = net.stats();
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }

    if (checkpointing) {
      CheckpointMeta meta;
      meta.source = source;
      meta.epoch = epoch;
      meta.train_loss = history.train_loss;
      meta.val_loss = history.val_loss;
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
      save_checkpoint(config.checkpoint_dir / name, net, meta);
    }

    if (since_best > config.patience) break;
  }

  // restore the best-epoch weights
  net.params() = best_params;
  net.stats() = best_stats;
  history.best_epoch = best_epoch;

  if (checkpointing) {
    CheckpointMeta meta;
    meta.source = source;
    meta.epoch = best_epoch;
    meta.train_loss = history.train_loss;
    meta.val_loss = history.val_loss;
    save_checkpoint(config.checkpoint_dir / "best.ckpt", net, meta);
  }
  return history;
}

std::map<std::string, UNet> train_sources(const std::vector<std::string>& sources,
                                          const UNetConfig& net_config,
                                          const SampleStreamFactory& make_stream,
                                          const std::vector<TrainingSample>& validation,
                                          const TrainConfig& config,
                                          std::map<std::string, TrainHistory>* history) {
  if (sources.empty()) raise(ErrorCode::invalid_input, "no sources requested");
  std::map<std::string, UNet> nets;
  for (const auto& source : sources) {
    UNet net(net_config);
    TrainConfig per_source = config;
    if (!config.checkpoint_dir.empty())
      per_source.checkpoint_dir = config.checkpoint_dir / source;
    const TrainHistory h =
        train_model(net, source, make_stream(), validation, per_source);
    if (history) (*history)[source] = h;
    nets.emplace(source, std::move(net));
  }
  return nets;
}

// ---------------------------------------------------------------------------
// Checkpoints: "SVSCKPT1" magic, u32 header length, JSON header, then the
// parameter and statistics blocks as little-endian float32.

namespace {

constexpr char kCkptMagic[8] = {'S', 'V', 'S', 'C', 'K', 'P', 'T', '1'};

void put_f32_block(std::string& out, const std::vector<double>& values) {
  for (const double v : values) {
    const auto f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    out.push_back(static_cast<char>(bits & 0xff));
    out.push_back(static_cast<char>((bits >> 8) & 0xff));
    out.push_back(static_cast<char>((bits >> 16) & 0xff));
    out.push_back(static_cast<char>((bits >> 24) & 0xff));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const UNet& net,
                     const CheckpointMeta& meta) {
  json header;
  header["format"] = "svsckpt";
  header["version"] = 1;
  header["config"] = json::parse(net.config().to_json_string());
  header["source"] = meta.source;
  header["epoch"] = meta.epoch;
  header["train_loss"] = meta.train_loss;
  header["val_loss"] = meta.val_loss;
  header["param_count"] = net.param_count();
  header["stats_count"] = net.stats_count();
  const std::string header_text = header.dump();

  std::string out;
  out.append(kCkptMagic, sizeof(kCkptMagic));
  const auto len = static_cast<uint32_t>(header_text.size());
  out.push_back(static_cast<char>(len & 0xff));
  out.push_back(static_cast<char>((len >> 8) & 0xff));
  out.push_back(static_cast<char>((len >> 16) & 0xff));
  out.push_back(static_cast<char>((len >> 24) & 0xff));
  out.append(header_text);
  put_f32_block(out, net.params());
  put_f32_block(out, net.stats());

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(ErrorCode::io_error, "cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) raise(ErrorCode::io_error, "short write to " + path.string());
}

UNet load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::io_error, "cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCkptMagic, 8) != 0)
    raise(ErrorCode::io_error, "not a checkpoint file: " + path.string());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + 8);
  const uint32_t len = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                       (static_cast<uint32_t>(p[2]) << 16) |
                       (static_cast<uint32_t>(p[3]) << 24);
  if (bytes.size() < 12 + len)
    raise(ErrorCode::io_error, "truncated checkpoint header: " + path.string());

  json header;
  try {
    header = json::parse(bytes.substr(12, len));
  } catch (const json::exception& e) {
    raise(ErrorCode::io_error, "checkpoint header parse error: " + std::string(e.what()));
  }
  UNet net(UNetConfig::from_json_string(header.at("config").dump()));
  const auto param_count = header.at("param_count").get<size_t>();
  const auto stats_count = header.at("stats_count").get<size_t>();
  if (param_count != net.param_count() || stats_count != net.stats_count())
    raise(ErrorCode::io_error, "checkpoint block sizes do not match the config");
  const size_t need = 12 + len + 4 * (param_count + stats_count);
  if (bytes.size() < need)
    raise(ErrorCode::io_error, "truncated checkpoint data: " + path.string());

  auto read_block = [&](size_t offset, std::vector<double>& dst, size_t count) {
    const auto* q = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
    for (size_t i = 0; i < count; ++i) {
      const uint32_t bits = static_cast<uint32_t>(q[4 * i]) |
                            (static_cast<uint32_t>(q[4 * i + 1]) << 8) |
                            (static_cast<uint32_t>(q[4 * i + 2]) << 16) |
                            (static_cast<uint32_t>(q[4 * i + 3]) << 24);
      float f;
      std::memcpy(&f, &bits, sizeof(f));
      dst[i] = static_cast<double>(f);
    }
  };
  read_block(12 + len, net.params(), param_count);
  read_block(12 + len + 4 * param_count, net.stats(), stats_count);

  if (meta) {
    meta->source = header.value("source", "");
    meta->epoch = header.value("epoch", 0);
    meta->train_loss = header.value("train_loss", std::vector<double>{});
    meta->val_loss = header.value("val_loss", std::vector<double>{});
  }
  return net;
}

}  // namespace svs
