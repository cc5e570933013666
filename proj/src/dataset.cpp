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
#include "svs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "svs/audio.hpp"
#include "svs/errors.hpp"

namespace svs {

using nlohmann::json;

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

const char* quality_name(TrackBundle::Quality q) {
  return q == TrackBundle::Quality::estimates ? "estimates" : "separated-recordings";
}

TrackBundle::Quality quality_from_name(const std::string& name) {
  if (name == "estimates") return TrackBundle::Quality::estimates;
  if (name == "separated-recordings") return TrackBundle::Quality::separated_recordings;
  raise(ErrorCode::io_error, "unknown quality flag '" + name + "'");
}

}  // namespace

bool TrackBundle::can_provide(const std::string& name) const {
  if (has_stem(name)) return true;
  if (name == kStemInstrumental)
    return has_stem(kStemDrums) && has_stem(kStemBass) && has_stem(kStemOther);
  return false;
}

const char* split_part_name(SplitPart part) {
  switch (part) {
    case SplitPart::train: return "train";
    case SplitPart::val: return "val";
    case SplitPart::test: return "test";
  }
  return "train";
}

SplitPart split_part_from_name(const std::string& name) {
  if (name == "train") return SplitPart::train;
  if (name == "val") return SplitPart::val;
  if (name == "test") return SplitPart::test;
  raise(ErrorCode::io_error, "unknown split part '" + name + "'");
}

const TrackBundle* Manifest::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

std::vector<const TrackBundle*> Manifest::part(SplitPart p) const {
  std::vector<const TrackBundle*> out;
  for (const auto& e : entries) {
    const auto it = split.find(e.id);
    if (it != split.end() && it->second == p) out.push_back(&e);
  }
  return out;
}

void Manifest::refresh_genre_distribution() {
  genre_distribution.clear();
  if (entries.empty()) return;
  for (const auto& e : entries) genre_distribution[e.genre] += 1.0;
  for (auto& [genre, count] : genre_distribution)
    count /= static_cast<double>(entries.size());
}

void Manifest::validate() const {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.id).second)
      raise(ErrorCode::invalid_input, "duplicate track id '" + e.id + "'");
    if (e.stems.empty())
      raise(ErrorCode::invalid_input, "track '" + e.id + "' has no stems");
  }
  // artist-disjointness across split parts
  std::map<std::string, SplitPart> artist_part;
  for (const auto& e : entries) {
    const auto it = split.find(e.id);
    if (it == split.end()) continue;
    const auto [existing, inserted] = artist_part.emplace(e.artist, it->second);
    if (!inserted && existing->second != it->second)
      raise(ErrorCode::invalid_input,
            "artist '" + e.artist + "' appears in two split parts");
  }
}

Manifest load_manifest(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::io_error, "cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorCode::io_error, "manifest parse error: " + std::string(e.what()));
  }

  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };

  Manifest m;
  m.version = doc.value("version", 1);
  for (const auto& je : doc.value("entries", json::array())) {
    TrackBundle b;
    b.id = je.at("id").get<std::string>();
    b.artist = je.at("artist").get<std::string>();
    b.genre = to_lower(je.value("genre", "unknown"));
    b.duration_s = je.value("duration_s", 0.0);
    b.mixture = resolve(je.at("mixture").get<std::string>());
    for (const auto& [stem, p] : je.at("stems").items())
      b.stems[stem] = resolve(p.get<std::string>());
    b.quality = quality_from_name(je.value("quality", "separated-recordings"));
    m.entries.push_back(std::move(b));
  }
  const json split_obj = doc.value("split", json::object());
  for (const auto& [id, part] : split_obj.items())
    m.split[id] = split_part_from_name(part.get<std::string>());
  const json dist_obj = doc.value("genre_distribution", json::object());
  for (const auto& [genre, frac] : dist_obj.items())
    m.genre_distribution[to_lower(genre)] = frac.get<double>();

  if (check_files) {
    for (const auto& e : m.entries) {
      if (!std::filesystem::exists(e.mixture))
        raise(ErrorCode::io_error, "missing mixture file " + e.mixture.string());
      for (const auto& [stem, p] : e.stems)
        if (!std::filesystem::exists(p))
          raise(ErrorCode::io_error, "missing " + stem + " file " + p.string());
    }
  }
  m.validate();
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");
  auto relativize = [&](const std::filesystem::path& p) -> std::string {
    std::error_code ec;
    const auto rel = std::filesystem::relative(p, base, ec);
    if (!ec && !rel.empty() && rel.native()[0] != '.') return rel.generic_string();
    return p.generic_string();
  };

  json doc;
  doc["version"] = manifest.version;
  doc["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    json je;
    je["id"] = e.id;
    je["artist"] = e.artist;
    je["genre"] = e.genre;
    je["duration_s"] = e.duration_s;
    je["mixture"] = relativize(e.mixture);
    json stems;
    for (const auto& [stem, p] : e.stems) stems[stem] = relativize(p);
    je["stems"] = stems;
    je["quality"] = quality_name(e.quality);
    doc["entries"].push_back(je);
  }
  json split;
  for (const auto& [id, part] : manifest.split) split[id] = split_part_name(part);
  doc["split"] = split;
  json dist;
  for (const auto& [genre, frac] : manifest.genre_distribution) dist[genre] = frac;
  doc["genre_distribution"] = dist;

  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::io_error, "cannot write manifest " + path.string());
  out << doc.dump(2) << "\n";
}

Manifest split_by_artist(const Manifest& manifest,
                         const std::array<double, 3>& fractions, uint64_t seed) {
  double total = 0.0;
  for (const double f : fractions) {
    if (f < 0.0) raise(ErrorCode::invalid_input, "split fractions must be nonnegative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9)
    raise(ErrorCode::invalid_input, "split fractions must sum to 1");

  // group tracks by artist, deterministic base order
  std::map<std::string, std::vector<const TrackBundle*>> by_artist;
  for (const auto& e : manifest.entries) by_artist[e.artist].push_back(&e);

  std::vector<SplitPart> parts;
  std::vector<double> part_fraction;
  const std::array<SplitPart, 3> all_parts = {SplitPart::train, SplitPart::val,
                                              SplitPart::test};
  for (int i = 0; i < 3; ++i) {
    if (fractions[static_cast<size_t>(i)] > 0.0) {
      parts.push_back(all_parts[static_cast<size_t>(i)]);
      part_fraction.push_back(fractions[static_cast<size_t>(i)]);
    }
  }
  if (by_artist.size() < parts.size())
    raise(ErrorCode::infeasible_split,
          std::to_string(by_artist.size()) + " artists cannot fill " +
              std::to_string(parts.size()) + " split parts");

  std::vector<std::string> artists;
  artists.reserve(by_artist.size());
  for (const auto& [artist, tracks] : by_artist) artists.push_back(artist);
  Rng rng = Rng(seed).fork("split-by-artist");
  rng.shuffle(artists);

  const auto total_tracks = static_cast<double>(manifest.entries.size());
  Manifest out = manifest;
  out.split.clear();

  size_t next_artist = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    const bool last_part = p + 1 == parts.size();
    const double target = part_fraction[p] * total_tracks;
    double assigned = 0.0;
    size_t taken = 0;
    while (next_artist < artists.size()) {
      const size_t artists_left = artists.size() - next_artist;
      const size_t parts_after = parts.size() - p - 1;
      if (!last_part && taken > 0 && artists_left <= parts_after) break;
      const auto& tracks = by_artist[artists[next_artist]];
      const auto n = static_cast<double>(tracks.size());
      // closest-approach fill: stop once adding would overshoot further
      // than the current deficit
      if (!last_part && taken > 0 &&
          std::abs(assigned + n - target) > std::abs(assigned - target))
        break;
      for (const TrackBundle* t : tracks) out.split[t->id] = parts[p];
      assigned += n;
      ++taken;
      ++next_artist;
    }
  }

  out.validate();
  return out;
}

Manifest rebalance_genres(const Manifest& manifest,
                          const std::map<std::string, double>& target,
                          uint64_t seed) {
  double total = 0.0;
  for (const auto& [genre, frac] : target) {
    if (frac < 0.0) raise(ErrorCode::invalid_input, "target fractions must be nonnegative");
    total += frac;
  }
  if (std::abs(total - 1.0) > 1e-9)
    raise(ErrorCode::invalid_input, "target fractions must sum to 1");

  std::map<std::string, std::vector<const TrackBundle*>> by_genre;
  for (const auto& e : manifest.entries) by_genre[e.genre].push_back(&e);
  for (const auto& [genre, frac] : target)
    if (by_genre.find(to_lower(genre)) == by_genre.end())
      raise(ErrorCode::missing_genre, "target genre '" + genre + "' not in manifest");

  // retained total is limited by the scarcest genre relative to its target;
  // the epsilon keeps exact ratios like 90/0.9 from flooring one short
  double retained = static_cast<double>(manifest.entries.size());
  for (const auto& [genre, frac] : target) {
    if (frac <= 0.0) continue;
    const auto n = static_cast<double>(by_genre[to_lower(genre)].size());
    retained = std::min(retained, std::floor(n / frac * (1.0 + 1e-12) + 1e-9));
  }
  const auto total_retained = static_cast<size_t>(retained);

  // largest-remainder apportionment of total_retained across genres
  std::map<std::string, size_t> keep;
  std::vector<std::pair<double, std::string>> remainders;
  size_t assigned = 0;
  for (const auto& [genre, frac] : target) {
    const std::string g = to_lower(genre);
    const double exact = frac * retained;
    const auto base = static_cast<size_t>(std::floor(exact + 1e-9));
    keep[g] = std::min(base, by_genre[g].size());
    assigned += keep[g];
    remainders.emplace_back(-(exact - static_cast<double>(base)), g);
  }
  std::sort(remainders.begin(), remainders.end());
  for (const auto& [neg_rem, g] : remainders) {
    if (assigned >= total_retained) break;
    if (keep[g] < by_genre[g].size()) {
      ++keep[g];
      ++assigned;
    }
  }

  // per-genre subsample, deterministic given seed
  Rng rng = Rng(seed).fork("rebalance-genres");
  std::set<std::string> kept_ids;
  for (auto& [genre, tracks] : by_genre) {
    const auto it = keep.find(genre);
    const size_t k = it == keep.end() ? 0 : it->second;
    if (k >= tracks.size()) {
      for (const TrackBundle* t : tracks) kept_ids.insert(t->id);
      continue;
    }
    std::vector<const TrackBundle*> pool = tracks;
    rng.shuffle(pool);
    for (size_t i = 0; i < k; ++i) kept_ids.insert(pool[i]->id);
  }

  Manifest out;
  out.version = manifest.version;
  for (const auto& e : manifest.entries)
    if (kept_ids.count(e.id)) out.entries.push_back(e);
  for (const auto& [id, part] : manifest.split)
    if (kept_ids.count(id)) out.split[id] = part;
  out.refresh_genre_distribution();
  out.validate();
  return out;
}

double select_segment_offset(double duration_s, Rng& rng, double segment_s,
                             double margin_s) {
  if (duration_s < segment_s)
    raise(ErrorCode::invalid_input, "track shorter than one segment");
  const double lo = margin_s;
  const double hi = duration_s - margin_s - segment_s;
  if (hi < lo) {
    // short-track fallback: drop the intro/outro exclusion
    return rng.uniform(0.0, duration_s - segment_s);
  }
  if (hi == lo) return lo;
  return rng.uniform(lo, hi);
}

void TrainingSample::validate() const {
  if (mixture.kind() != Spectrogram::Kind::magnitude)
    raise(ErrorCode::kind_mismatch, "training sample mixture must be magnitude");
  for (const auto& [source, grid] : targets) {
    if (grid.kind() != Spectrogram::Kind::magnitude)
      raise(ErrorCode::kind_mismatch, "target '" + source + "' must be magnitude");
    if (!grid.same_shape(mixture))
      raise(ErrorCode::shape_mismatch, "target '" + source + "' shape differs");
  }
}

AudioClip load_stem_audio(const TrackBundle& bundle, const std::string& name) {
  const auto it = bundle.stems.find(name);
  if (it != bundle.stems.end()) return read_wav(it->second);
  if (name == kStemInstrumental && bundle.has_stem(kStemDrums) &&
      bundle.has_stem(kStemBass) && bundle.has_stem(kStemOther)) {
    // time-domain sum of the non-vocal stems
    std::vector<AudioClip> parts = {read_wav(bundle.stems.at(kStemDrums)),
                                    read_wav(bundle.stems.at(kStemBass)),
                                    read_wav(bundle.stems.at(kStemOther))};
    size_t min_len = parts[0].length();
    for (const auto& p : parts) min_len = std::min(min_len, p.length());
    for (auto& p : parts)
      for (auto& ch : p.samples) ch.resize(min_len);
    return mix_clips(parts);
  }
  raise(ErrorCode::missing_stem,
        "track '" + bundle.id + "' has no stem '" + name + "'");
}

TrainingSample load_training_sample(const TrackBundle& bundle,
                                    const std::vector<std::string>& sources,
                                    double offset_s, const SegmentSpec& spec) {
  for (const auto& s : sources)
    if (!bundle.can_provide(s))
      raise(ErrorCode::missing_stem,
            "track '" + bundle.id + "' cannot provide stem '" + s + "'");

  AudioClip mixture = read_wav(bundle.mixture);
  if (mixture.sample_rate != spec.rate) mixture = resample(mixture, spec.rate);

  std::map<std::string, AudioClip> stems;
  size_t common_len = mixture.length();
  for (const auto& s : sources) {
    AudioClip clip = load_stem_audio(bundle, s);
    if (clip.sample_rate != spec.rate) clip = resample(clip, spec.rate);
    common_len = std::min(common_len, clip.length());
    stems.emplace(s, std::move(clip));
  }
  for (auto& ch : mixture.samples) ch.resize(common_len);
  for (auto& [name, clip] : stems)
    for (auto& ch : clip.samples) ch.resize(common_len);

  TrainingSample sample;
  sample.track_id = bundle.id;
  sample.offset_s = offset_s;
  sample.mixture = segment_to_standard(mixture, spec, offset_s);
  for (const auto& [name, clip] : stems)
    sample.targets.emplace(name, segment_to_standard(clip, spec, offset_s));
  sample.validate();
  return sample;
}

}  // namespace svs
