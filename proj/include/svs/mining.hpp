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
#ifndef SVS_MINING_HPP
#define SVS_MINING_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svs/audio.hpp"
#include "svs/dataset.hpp"
#include "svs/dsp.hpp"

namespace svs {

struct PairMetadata {
  std::string id;
  std::string artist;
  std::string genre;
};

/// A candidate (mix, instrumental) pair loaded into memory.
struct TrackPair {
  AudioClip mix;
  AudioClip instrumental;
  PairMetadata meta;
};

struct FilterDecision {
  bool accept = false;
  std::string reason;  // "duration-mismatch" or "too-long" when rejected
};

inline constexpr double kMaxDurationGapS = 2.0;
inline constexpr double kMaxTrackS = 300.0;

/// Rejects pairs whose durations differ by more than 2 s or whose mix runs
/// longer than 5 minutes.
FilterDecision filter_pair(const TrackPair& pair);

struct AlignResult {
  TrackPair pair;       // instrumental shifted, both trimmed to common support
  long long offset = 0; // aligned_inst[t] == inst[t - offset]
  double peak = 0.0;    // normalized cross-correlation at the offset
};

inline constexpr double kAlignmentPeakThreshold = 0.1;

/// Integer-sample alignment by normalized cross-correlation of the mono
/// downmixes over lags within +-max_lag_s. A peak below 0.1 rejects the pair.
AlignResult align(const TrackPair& pair, double max_lag_s = 2.0);

struct LoudnessResult {
  TrackPair pair;
  double gain_db = 0.0;  // applied to the instrumental
};

/// Scales the instrumental so both tracks share the same full-track RMS.
LoudnessResult equalize_loudness(const TrackPair& pair);

/// Half-wave rectified magnitude difference: max(|mix| - |instrumental|, 0).
Spectrogram estimate_vocals(const Spectrogram& mix_mag, const Spectrogram& inst_mag);

/// Renders the half-wave rectified vocal estimate back to audio using the
/// mixture phase, streaming frame by frame so full songs never materialize
/// a spectrogram grid.
AudioClip render_vocal_estimate(const AudioClip& mix, const AudioClip& instrumental,
                                int window = 2048, int hop = 512);

struct CandidatePair {
  std::filesystem::path mix_path;
  std::filesystem::path instrumental_path;
  PairMetadata meta;
};

/// pairs.json: [{"id": ..., "mix": ..., "instrumental": ..., "artist": ...,
/// "genre": ...}]; relative paths resolve against the file's directory.
std::vector<CandidatePair> load_candidate_pairs(const std::filesystem::path& path);

struct RejectionRecord {
  std::string pair_id;
  std::string stage;   // filter | align | equalize | load
  std::string reason;
};

struct TripletStats {
  std::string pair_id;
  long long alignment_offset = 0;
  double gain_db = 0.0;
  double vocal_energy_ratio = 0.0;  // vocal estimate energy / mix energy
};

struct MineOptions {
  std::filesystem::path out_dir;
  int window = 2048;
  int hop = 512;
  double max_lag_s = 2.0;
  int jobs = 1;
};

struct MineResult {
  Manifest manifest;                    // quality = estimates
  std::vector<RejectionRecord> rejects;
  std::vector<TripletStats> stats;
};

/// filter -> align -> equalize -> estimate for every candidate pair; one bad
/// pair never aborts the batch. Triplet WAVs land under out_dir/<pair id>/.
MineResult mine_pipeline(const std::vector<CandidatePair>& pairs,
                         const MineOptions& options);

void write_rejection_report(const std::filesystem::path& path,
                            const std::vector<RejectionRecord>& rejects);
void write_triplet_stats(const std::filesystem::path& path,
                         const std::vector<TripletStats>& stats);

}  // namespace svs

#endif  // SVS_MINING_HPP
