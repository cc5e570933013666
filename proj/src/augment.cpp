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
#include "svs/augment.hpp"

#include <cmath>
#include <functional>

#include <json.hpp>

#include "svs/errors.hpp"

namespace svs {

using nlohmann::json;

const char* augment_kind_name(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::none: return "none";
    case AugmentKind::swap: return "swap";
    case AugmentKind::stretch: return "stretch";
    case AugmentKind::shift: return "shift";
    case AugmentKind::remix: return "remix";
    case AugmentKind::filter: return "filter";
    case AugmentKind::scale: return "scale";
    case AugmentKind::combined: return "combined";
  }
  return "none";
}

AugmentKind augment_kind_from_name(const std::string& name) {
  for (const auto kind : {AugmentKind::none, AugmentKind::swap, AugmentKind::stretch,
                          AugmentKind::shift, AugmentKind::remix, AugmentKind::filter,
                          AugmentKind::scale, AugmentKind::combined})
    if (name == augment_kind_name(kind)) return kind;
  raise(ErrorCode::invalid_spec, "unknown augmentation kind '" + name + "'");
}

std::string AugmentationSpec::to_json_string() const {
  json doc;
  doc["kind"] = augment_kind_name(kind);
  doc["swap_channels"] = swap_channels;
  doc["beta_stretch"] = beta_stretch;
  doc["beta_shift"] = beta_shift;
  json gains;
  for (const auto& [source, db] : remix_gains_db) gains[source] = db;
  doc["remix_gains_db"] = gains;
  doc["filter_mu_hz"] = filter_mu_hz;
  doc["filter_sigma_hz"] = filter_sigma_hz;
  doc["scale_db"] = scale_db;
  return doc.dump(2);
}

AugmentationSpec AugmentationSpec::from_json_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    raise(ErrorCode::invalid_spec, "augmentation spec parse error: " + std::string(e.what()));
  }
  AugmentationSpec spec;
  spec.kind = augment_kind_from_name(doc.value("kind", "none"));
  spec.swap_channels = doc.value("swap_channels", false);
  spec.beta_stretch = doc.value("beta_stretch", 1.0);
  spec.beta_shift = doc.value("beta_shift", 1.0);
  const json gains = doc.value("remix_gains_db", json::object());
  for (const auto& [source, db] : gains.items())
    spec.remix_gains_db[source] = db.get<double>();
  spec.filter_mu_hz = doc.value("filter_mu_hz", 0.0);
  spec.filter_sigma_hz = doc.value("filter_sigma_hz", 0.0);
  spec.scale_db = doc.value("scale_db", 0.0);
  return spec;
}

AugmentationSpec draw_spec(AugmentKind kind, const std::vector<std::string>& sources,
                           Rng& rng) {
  AugmentationSpec spec;
  spec.kind = kind;
  switch (kind) {
    case AugmentKind::none:
      break;
    case AugmentKind::swap:
      spec.swap_channels = rng.bernoulli(0.5);
      break;
    case AugmentKind::stretch:
      spec.beta_stretch = rng.uniform(0.7, 1.3);
      break;
    case AugmentKind::shift:
      spec.beta_shift = rng.uniform(0.7, 1.3);
      break;
    case AugmentKind::remix:
      for (const auto& s : sources) spec.remix_gains_db[s] = rng.uniform(-9.0, 9.0);
      break;
    case AugmentKind::filter:
      spec.filter_mu_hz = rng.uniform(0.0, 4410.0);
      spec.filter_sigma_hz = rng.uniform(500.0, 1000.0);
      break;
    case AugmentKind::scale:
      spec.scale_db = rng.uniform(-10.0, 10.0);
      break;
    case AugmentKind::combined:
      spec.swap_channels = rng.bernoulli(0.5);
      spec.beta_shift = rng.uniform(0.7, 1.3);
      spec.beta_stretch = rng.uniform(0.7, 1.3);
      for (const auto& s : sources) spec.remix_gains_db[s] = rng.uniform(-9.0, 9.0);
      break;
  }
  return spec;
}

double inverse_gaussian_response(double s_hz, double mu_hz, double sigma_hz) {
  const double d = s_hz - mu_hz;
  return 1.0 - std::exp(-d * d / (2.0 * sigma_hz * sigma_hz));
}

namespace {

using GridOp = std::function<void(Spectrogram&)>;

void for_each_grid(TrainingSample& sample, const GridOp& op) {
  op(sample.mixture);
  for (auto& [name, grid] : sample.targets) op(grid);
}

void swap_grid_channels(Spectrogram& g) {
  if (g.channels() != 2) return;  // mono grids unaffected
  for (int f = 0; f < g.frames(); ++f)
    for (int b = 0; b < g.bins(); ++b) std::swap(g.m_at(0, f, b), g.m_at(1, f, b));
}

/// Linear interpolation along the time axis at position c + (t - c)*beta,
/// reflecting out-of-range positions back into [0, frames-1].
void stretch_grid(Spectrogram& g, double beta) {
  const int frames = g.frames();
  const double c = frames / 2.0;
  const double span = static_cast<double>(frames - 1);
  Spectrogram out = g;
  for (int t = 0; t < frames; ++t) {
    double pos = c + (static_cast<double>(t) - c) * beta;
    // reflect into range
    if (span > 0.0) {
      const double period = 2.0 * span;
      pos = std::fmod(pos, period);
      if (pos < 0.0) pos += period;
      if (pos > span) pos = period - pos;
    } else {
      pos = 0.0;
    }
    const int i0 = static_cast<int>(pos);
    const int i1 = std::min(i0 + 1, frames - 1);
    const double frac = pos - i0;
    for (int ch = 0; ch < g.channels(); ++ch)
      for (int b = 0; b < g.bins(); ++b)
        out.m_at(ch, t, b) =
            (1.0 - frac) * g.m_at(ch, i0, b) + frac * g.m_at(ch, i1, b);
  }
  g = std::move(out);
}

/// Linear interpolation along the frequency axis: output bin k reads input
/// position k/beta; positions past the top are zero-filled, bin 0 stays at
/// 0 Hz.
void shift_grid(Spectrogram& g, double beta) {
  const int bins = g.bins();
  Spectrogram out = g;
  for (int k = 0; k < bins; ++k) {
    const double pos = static_cast<double>(k) / beta;
    if (pos > static_cast<double>(bins - 1)) {
      for (int ch = 0; ch < g.channels(); ++ch)
        for (int f = 0; f < g.frames(); ++f) out.m_at(ch, f, k) = 0.0;
      continue;
    }
    const int i0 = static_cast<int>(pos);
    const int i1 = std::min(i0 + 1, bins - 1);
    const double frac = pos - i0;
    for (int ch = 0; ch < g.channels(); ++ch)
      for (int f = 0; f < g.frames(); ++f)
        out.m_at(ch, f, k) =
            (1.0 - frac) * g.m_at(ch, f, i0) + frac * g.m_at(ch, f, i1);
  }
  g = std::move(out);
}

void filter_grid(Spectrogram& g, double mu_hz, double sigma_hz) {
  // bin k is centered at k * rate / window
  const double bin_hz = static_cast<double>(g.sample_rate()) / g.window();
  std::vector<double> gain(static_cast<size_t>(g.bins()));
  for (int k = 0; k < g.bins(); ++k)
    gain[static_cast<size_t>(k)] = inverse_gaussian_response(k * bin_hz, mu_hz, sigma_hz);
  for (int ch = 0; ch < g.channels(); ++ch)
    for (int f = 0; f < g.frames(); ++f)
      for (int k = 0; k < g.bins(); ++k) g.m_at(ch, f, k) *= gain[static_cast<size_t>(k)];
}

void scale_grid(Spectrogram& g, double factor) {
  for (auto& v : g.magnitude_values()) v *= factor;
}

}  // namespace

Spectrogram remix_mixture(const std::map<std::string, Spectrogram>& targets,
                          const std::map<std::string, double>& gains_db) {
  if (targets.empty()) raise(ErrorCode::invalid_input, "remix of empty target set");
  Spectrogram out = targets.begin()->second;
  for (auto& v : out.magnitude_values()) v = 0.0;
  for (const auto& [source, grid] : targets) {
    if (!grid.same_shape(out))
      raise(ErrorCode::shape_mismatch, "remix targets must share shape");
    const auto it = gains_db.find(source);
    if (it == gains_db.end())
      raise(ErrorCode::invalid_spec, "no remix gain for source '" + source + "'");
    const double gain = db_to_gain(it->second);
    const auto& src = grid.magnitude_values();
    auto& dst = out.magnitude_values();
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += gain * src[i];
  }
  return out;
}

TrainingSample apply(const TrainingSample& sample, const AugmentationSpec& spec) {
  sample.validate();
  TrainingSample out = sample;

  const bool do_swap = spec.kind == AugmentKind::swap || spec.kind == AugmentKind::combined;
  const bool do_stretch =
      spec.kind == AugmentKind::stretch || spec.kind == AugmentKind::combined;
  const bool do_shift = spec.kind == AugmentKind::shift || spec.kind == AugmentKind::combined;
  const bool do_remix = spec.kind == AugmentKind::remix || spec.kind == AugmentKind::combined;

  switch (spec.kind) {
    case AugmentKind::none:
      return out;
    case AugmentKind::filter:
      for_each_grid(out, [&](Spectrogram& g) {
        filter_grid(g, spec.filter_mu_hz, spec.filter_sigma_hz);
      });
      return out;
    case AugmentKind::scale: {
      const double factor = db_to_gain(spec.scale_db);
      if (factor != 1.0)
        for_each_grid(out, [&](Spectrogram& g) { scale_grid(g, factor); });
      return out;
    }
    case AugmentKind::swap:
    case AugmentKind::stretch:
    case AugmentKind::shift:
    case AugmentKind::remix:
    case AugmentKind::combined:
      break;
  }

  if (do_swap && spec.swap_channels)
    for_each_grid(out, swap_grid_channels);
  if (do_stretch && spec.beta_stretch != 1.0)
    for_each_grid(out, [&](Spectrogram& g) { stretch_grid(g, spec.beta_stretch); });
  if (do_shift && spec.beta_shift != 1.0)
    for_each_grid(out, [&](Spectrogram& g) { shift_grid(g, spec.beta_shift); });
  if (do_remix) {
    for (auto& [source, grid] : out.targets) {
      const auto it = spec.remix_gains_db.find(source);
      if (it == spec.remix_gains_db.end())
        raise(ErrorCode::invalid_spec, "no remix gain for source '" + source + "'");
      const double gain = db_to_gain(it->second);
      if (gain != 1.0) scale_grid(grid, gain);
    }
    // the mixture is rebuilt from the already-scaled targets
    std::map<std::string, double> zero_db;
    for (const auto& [source, grid] : out.targets) zero_db[source] = 0.0;
    out.mixture = remix_mixture(out.targets, zero_db);
  }
  return out;
}

}  // namespace svs
