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
#ifndef SVS_AUGMENT_HPP
#define SVS_AUGMENT_HPP

#include <map>
#include <string>
#include <vector>

#include "svs/dataset.hpp"
#include "svs/dsp.hpp"
#include "svs/rng.hpp"

namespace svs {

/// The seven training-time transforms. Each is applied with identical
/// parameter draws to the mixture and every target grid of a sample;
/// `remix` additionally rebuilds the mixture from the scaled targets.
enum class AugmentKind {
  none,
  swap,     // exchange stereo channels, probability 0.5
  stretch,  // linear time-axis scale by beta in [0.7, 1.3], central part kept
  shift,    // linear frequency-axis scale by beta in [0.7, 1.3], bottom-aligned
  remix,    // per-source gains uniform in [-9, +9] dB, mixture recomputed
  filter,   // inverse-Gaussian frequency response, mu in [0, 4410] Hz
  scale,    // global gain uniform in [-10, +10] dB
  combined, // swap + shift + stretch + remix together
};

const char* augment_kind_name(AugmentKind kind);
AugmentKind augment_kind_from_name(const std::string& name);

/// A realized draw of transform parameters; applying a spec is deterministic.
struct AugmentationSpec {
  AugmentKind kind = AugmentKind::none;
  bool swap_channels = false;
  double beta_stretch = 1.0;
  double beta_shift = 1.0;
  std::map<std::string, double> remix_gains_db;  // source -> dB
  double filter_mu_hz = 0.0;
  double filter_sigma_hz = 0.0;
  double scale_db = 0.0;

  std::string to_json_string() const;
  static AugmentationSpec from_json_string(const std::string& text);
};

/// Draws parameters for `kind` from the published ranges. `sources` names
/// the targets that receive remix gains.
AugmentationSpec draw_spec(AugmentKind kind, const std::vector<std::string>& sources,
                           Rng& rng);

/// Applies the realized transform to every grid of the sample.
TrainingSample apply(const TrainingSample& sample, const AugmentationSpec& spec);

/// Gain-weighted elementwise sum of target magnitudes: the recomputed
/// mixture of the remix transform.
Spectrogram remix_mixture(const std::map<std::string, Spectrogram>& targets,
                          const std::map<std::string, double>& gains_db);

/// f(s) = 1 - exp(-(s - mu)^2 / (2 sigma^2)); zero at mu, ~1 far away.
double inverse_gaussian_response(double s_hz, double mu_hz, double sigma_hz);

inline double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

}  // namespace svs

#endif  // SVS_AUGMENT_HPP
