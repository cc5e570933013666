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
#ifndef SVS_DATASET_HPP
#define SVS_DATASET_HPP

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "svs/dsp.hpp"
#include "svs/rng.hpp"

namespace svs {

inline constexpr const char* kStemVocals = "vocals";
inline constexpr const char* kStemDrums = "drums";
inline constexpr const char* kStemBass = "bass";
inline constexpr const char* kStemOther = "other";
inline constexpr const char* kStemInstrumental = "instrumental";

/// One song: mixture plus named stems plus metadata.
struct TrackBundle {
  enum class Quality { separated_recordings, estimates };

  std::string id;
  std::string artist;
  std::string genre;  // normalized to lowercase on load
  double duration_s = 0.0;
  std::filesystem::path mixture;
  std::map<std::string, std::filesystem::path> stems;
  Quality quality = Quality::separated_recordings;

  bool has_stem(const std::string& name) const { return stems.count(name) > 0; }
  /// True when the stem is on disk or synthesizable (instrumental from
  /// drums+bass+other).
  bool can_provide(const std::string& name) const;
};

enum class SplitPart { train, val, test };

const char* split_part_name(SplitPart part);
SplitPart split_part_from_name(const std::string& name);

/// Versioned JSON dataset description. Relative audio paths are resolved
/// against the manifest's directory at load time.
struct Manifest {
  int version = 1;
  std::vector<TrackBundle> entries;
  std::map<std::string, SplitPart> split;  // track id -> part
  std::map<std::string, double> genre_distribution;

  const TrackBundle* find(const std::string& id) const;
  std::vector<const TrackBundle*> part(SplitPart part) const;
  /// Recomputes genre_distribution from the current entries.
  void refresh_genre_distribution();
  /// Checks the artist-disjointness invariant over the split map.
  void validate() const;
};

Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Assigns whole artists to train/val/test. Realized track fractions land
/// within one artist's worth of tracks of the request; deterministic per seed.
Manifest split_by_artist(const Manifest& manifest,
                         const std::array<double, 3>& fractions, uint64_t seed);

/// Subsamples per genre (never duplicates) so the retained distribution
/// matches `target` within one track per genre, keeping as many tracks as the
/// scarcest genre allows.
Manifest rebalance_genres(const Manifest& manifest,
                          const std::map<std::string, double>& target,
                          uint64_t seed);

/// Uniform segment start avoiding the first and last 20 s. Tracks too short
/// for the exclusion fall back to the full [0, duration - segment] range.
double select_segment_offset(double duration_s, Rng& rng,
                             double segment_s = 11.88, double margin_s = 20.0);

/// Aligned (mixture, per-source target) magnitude grids of identical shape.
struct TrainingSample {
  Spectrogram mixture;
  std::map<std::string, Spectrogram> targets;
  std::string track_id;
  double offset_s = 0.0;

  void validate() const;
};

/// Loads mixture and requested stems, resamples to spec.rate, and segments
/// everything at the same offset. `instrumental` is synthesized as the
/// time-domain sum of drums+bass+other when not stored.
TrainingSample load_training_sample(const TrackBundle& bundle,
                                    const std::vector<std::string>& sources,
                                    double offset_s,
                                    const SegmentSpec& spec = SegmentSpec::standard());

/// The audio of one stem at its native rate (synthesizing instrumental when
/// needed); missing-stem error otherwise.
AudioClip load_stem_audio(const TrackBundle& bundle, const std::string& name);

}  // namespace svs

#endif  // SVS_DATASET_HPP
