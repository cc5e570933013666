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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "helpers.hpp"
#include "svs/dataset.hpp"
#include "svs/errors.hpp"

using namespace svs;

namespace {

Manifest synthetic_manifest(int artists, int tracks_per_artist,
                            const std::map<std::string, int>& genre_counts = {}) {
  Manifest m;
  if (!genre_counts.empty()) {
    // one artist per track, exact genre counts
    int id = 0;
    for (const auto& [g, count] : genre_counts)
      for (int i = 0; i < count; ++i) {
        TrackBundle b;
        b.id = "track" + std::to_string(id);
        b.artist = "artist" + std::to_string(id);
        b.genre = g;
        b.duration_s = 200.0;
        b.mixture = "mix.wav";
        b.stems["vocals"] = "v.wav";
        m.entries.push_back(std::move(b));
        ++id;
      }
    return m;
  }
  for (int a = 0; a < artists; ++a)
    for (int t = 0; t < tracks_per_artist; ++t) {
      TrackBundle b;
      const int idx = a * tracks_per_artist + t;
      b.id = "track" + std::to_string(idx);
      b.artist = "artist" + std::to_string(a);
      b.genre = "pop";
      b.duration_s = 200.0;
      b.mixture = "mix.wav";
      b.stems["vocals"] = "v.wav";
      m.entries.push_back(std::move(b));
    }
  return m;
}

std::map<SplitPart, std::set<std::string>> artists_per_part(const Manifest& m) {
  std::map<SplitPart, std::set<std::string>> out;
  for (const auto& e : m.entries) {
    const auto it = m.split.find(e.id);
    if (it != m.split.end()) out[it->second].insert(e.artist);
  }
  return out;
}

}  // namespace

TEST_CASE("split_by_artist keeps artists disjoint and fractions close") {
  const auto m = synthetic_manifest(10, 10);
  const auto out = split_by_artist(m, {0.8, 0.1, 0.1}, 7);
  const auto parts = artists_per_part(out);
  CHECK(parts.at(SplitPart::train).size() == 8);
  CHECK(parts.at(SplitPart::val).size() == 1);
  CHECK(parts.at(SplitPart::test).size() == 1);
  // exhaustive disjointness check
  for (const auto& a : parts.at(SplitPart::train)) {
    CHECK(parts.at(SplitPart::val).count(a) == 0);
    CHECK(parts.at(SplitPart::test).count(a) == 0);
  }
  for (const auto& a : parts.at(SplitPart::val))
    CHECK(parts.at(SplitPart::test).count(a) == 0);
  // every track assigned
  CHECK(out.split.size() == m.entries.size());
}

TEST_CASE("split_by_artist is deterministic in the seed") {
  const auto m = synthetic_manifest(13, 3);
  const auto a = split_by_artist(m, {0.6, 0.2, 0.2}, 123);
  const auto b = split_by_artist(m, {0.6, 0.2, 0.2}, 123);
  CHECK(a.split == b.split);
  const auto c = split_by_artist(m, {0.6, 0.2, 0.2}, 124);
  CHECK(a.split != c.split);  // overwhelmingly likely with 13 artists
}

TEST_CASE("split_by_artist with uneven artist sizes stays within one artist") {
  Manifest m = synthetic_manifest(6, 1);
  // give artist0 many tracks
  for (int t = 0; t < 20; ++t) {
    TrackBundle b = m.entries[0];
    b.id = "extra" + std::to_string(t);
    m.entries.push_back(b);
  }
  for (uint64_t seed = 0; seed < 8; ++seed) {
    const auto out = split_by_artist(m, {0.5, 0.25, 0.25}, seed);
    const auto parts = artists_per_part(out);
    CHECK(parts.size() == 3);  // all parts populated
    for (const auto& [part, artists] : parts) CHECK(!artists.empty());
  }
}

TEST_CASE("single-artist manifest all goes to train") {
  const auto m = synthetic_manifest(1, 5);
  const auto out = split_by_artist(m, {1.0, 0.0, 0.0}, 3);
  CHECK(out.split.size() == 5);
  for (const auto& [id, part] : out.split) CHECK(part == SplitPart::train);
}

TEST_CASE("split_by_artist rejects more parts than artists") {
  const auto m = synthetic_manifest(2, 4);
  CHECK_THROWS_AS(split_by_artist(m, {0.4, 0.3, 0.3}, 1), Error);
  try {
    split_by_artist(m, {0.4, 0.3, 0.3}, 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::infeasible_split);
  }
}

TEST_CASE("rebalance_genres matches the limiting-genre arithmetic") {
  const auto m = synthetic_manifest(0, 0, {{"a", 90}, {"b", 10}});
  const auto out = rebalance_genres(m, {{"a", 0.5}, {"b", 0.5}}, 11);
  std::map<std::string, int> counts;
  for (const auto& e : out.entries) counts[e.genre]++;
  CHECK(counts["a"] == 10);
  CHECK(counts["b"] == 10);
  CHECK(out.entries.size() == 20);
}

TEST_CASE("rebalance_genres with the current distribution is the identity") {
  const auto m = synthetic_manifest(0, 0, {{"a", 90}, {"b", 10}});
  const auto out = rebalance_genres(m, {{"a", 0.9}, {"b", 0.1}}, 5);
  REQUIRE(out.entries.size() == m.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i)
    CHECK(out.entries[i].id == m.entries[i].id);
}

TEST_CASE("rebalance_genres rejects absent target genres") {
  const auto m = synthetic_manifest(0, 0, {{"a", 10}});
  CHECK_THROWS_AS(rebalance_genres(m, {{"a", 0.5}, {"c", 0.5}}, 1), Error);
  try {
    rebalance_genres(m, {{"a", 0.5}, {"c", 0.5}}, 1);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_genre);
  }
}

TEST_CASE("rebalance_genres distribution error is below one track") {
  const auto m = synthetic_manifest(0, 0, {{"a", 57}, {"b", 29}, {"c", 14}});
  const std::map<std::string, double> target = {{"a", 0.4}, {"b", 0.35}, {"c", 0.25}};
  const auto out = rebalance_genres(m, target, 9);
  std::map<std::string, double> realized;
  for (const auto& e : out.entries) realized[e.genre] += 1.0;
  const auto n = static_cast<double>(out.entries.size());
  for (const auto& [g, frac] : target)
    CHECK(std::abs(realized[g] / n - frac) <= 1.0 / n + 1e-12);
}

TEST_CASE("select_segment_offset avoids intro and outro") {
  Rng rng(21);
  for (int i = 0; i < 2000; ++i) {
    const double off = select_segment_offset(200.0, rng);
    CHECK(off >= 20.0);
    CHECK(off <= 200.0 - 20.0 - 11.88);
  }
}

TEST_CASE("select_segment_offset degenerate and fallback cases") {
  Rng rng(22);
  CHECK(select_segment_offset(51.88, rng) == 20.0);
  for (int i = 0; i < 500; ++i) {
    const double off = select_segment_offset(30.0, rng);
    CHECK(off >= 0.0);
    CHECK(off <= 30.0 - 11.88);
  }
}

TEST_CASE("manifest JSON round trip with relative paths") {
  const auto dir = test::scratch_dir("manifest");
  const auto audio = test::noise_clip(2, 2000, 22050, 31);
  write_wav(dir / "mix.wav", audio);
  write_wav(dir / "vocals.wav", audio);
  write_wav(dir / "inst.wav", audio);

  Manifest m;
  TrackBundle b;
  b.id = "song1";
  b.artist = "Someone";
  b.genre = "Pop";  // must normalize to lowercase through save/load
  b.duration_s = 2000.0 / 22050.0;
  b.mixture = dir / "mix.wav";
  b.stems["vocals"] = dir / "vocals.wav";
  b.stems["instrumental"] = dir / "inst.wav";
  m.entries.push_back(b);
  m.split["song1"] = SplitPart::train;
  m.refresh_genre_distribution();
  save_manifest(m, dir / "manifest.json");

  const auto loaded = load_manifest(dir / "manifest.json");
  REQUIRE(loaded.entries.size() == 1);
  CHECK(loaded.entries[0].id == "song1");
  CHECK(loaded.entries[0].genre == "pop");
  CHECK(loaded.entries[0].mixture == dir / "mix.wav");
  CHECK(loaded.split.at("song1") == SplitPart::train);

  // referenced files must exist
  std::filesystem::remove(dir / "vocals.wav");
  CHECK_THROWS_AS(load_manifest(dir / "manifest.json"), Error);
}

TEST_CASE("manifest validation rejects artist straddling parts") {
  Manifest m = synthetic_manifest(1, 2);
  m.split["track0"] = SplitPart::train;
  m.split["track1"] = SplitPart::test;
  CHECK_THROWS_AS(m.validate(), Error);
}

TEST_CASE("load_training_sample segments mixture and targets together") {
  const auto dir = test::scratch_dir("sample");
  const auto spec = SegmentSpec::desk(32, 64);
  const size_t len = spec.segment_samples() + 500;
  const auto vocals = test::sine_clip(2, len, 22050, 5000.0, 0.3);
  const auto inst = test::noise_clip(2, len, 22050, 41, 0.3);
  auto mixture = mix_clips({vocals, inst});
  write_wav(dir / "mix.wav", mixture);
  write_wav(dir / "vocals.wav", vocals);
  write_wav(dir / "inst.wav", inst);

  TrackBundle b;
  b.id = "t";
  b.artist = "a";
  b.genre = "pop";
  b.duration_s = mixture.duration_s();
  b.mixture = dir / "mix.wav";
  b.stems["vocals"] = dir / "vocals.wav";
  b.stems["instrumental"] = dir / "inst.wav";

  const auto sample = load_training_sample(b, {"vocals", "instrumental"}, 0.005, spec);
  CHECK(sample.targets.size() == 2);
  CHECK(sample.mixture.channels() == 2);
  CHECK(sample.mixture.frames() == 32);
  CHECK(sample.mixture.bins() == 64);
  for (const auto& [name, grid] : sample.targets)
    CHECK(grid.same_shape(sample.mixture));
}

TEST_CASE("load_training_sample synthesizes instrumental from 4 stems") {
  const auto dir = test::scratch_dir("sample4");
  const auto spec = SegmentSpec::desk(32, 64);
  const size_t len = spec.segment_samples() + 100;
  const auto drums = test::noise_clip(1, len, 22050, 51, 0.2);
  const auto bass = test::sine_clip(1, len, 22050, 110.0, 0.2);
  const auto other = test::noise_clip(1, len, 22050, 52, 0.2);
  const auto vocals = test::sine_clip(1, len, 22050, 3000.0, 0.2);
  const auto mixture = mix_clips({drums, bass, other, vocals});
  write_wav(dir / "mix.wav", mixture);
  write_wav(dir / "drums.wav", drums);
  write_wav(dir / "bass.wav", bass);
  write_wav(dir / "other.wav", other);
  write_wav(dir / "vocals.wav", vocals);

  TrackBundle b;
  b.id = "t4";
  b.artist = "a";
  b.genre = "rock";
  b.mixture = dir / "mix.wav";
  b.stems["drums"] = dir / "drums.wav";
  b.stems["bass"] = dir / "bass.wav";
  b.stems["other"] = dir / "other.wav";
  b.stems["vocals"] = dir / "vocals.wav";

  const auto four = load_training_sample(b, {"vocals", "drums", "bass", "other"}, 0.0, spec);
  CHECK(four.targets.size() == 4);

  const auto two = load_training_sample(b, {"vocals", "instrumental"}, 0.0, spec);
  CHECK(two.targets.count("instrumental") == 1);

  // synthesized instrumental equals the time-domain sum segmented directly
  const auto sum = mix_clips({drums, bass, other});
  const auto expected = segment_to_standard(sum, spec, 0.0);
  const auto& got = two.targets.at("instrumental");
  for (size_t i = 0; i < expected.magnitude_values().size(); i += 17)
    CHECK(got.magnitude_values()[i] ==
          doctest::Approx(expected.magnitude_values()[i]).epsilon(1e-4));
}

TEST_CASE("load_training_sample rejects missing stems") {
  const auto dir = test::scratch_dir("samplemiss");
  const auto spec = SegmentSpec::desk(32, 64);
  const auto clip = test::noise_clip(1, spec.segment_samples() + 10, 22050, 61);
  write_wav(dir / "mix.wav", clip);
  write_wav(dir / "vocals.wav", clip);

  TrackBundle b;
  b.id = "miss";
  b.artist = "a";
  b.mixture = dir / "mix.wav";
  b.stems["vocals"] = dir / "vocals.wav";
  CHECK_THROWS_AS(load_training_sample(b, {"drums"}, 0.0, spec), Error);
  try {
    load_training_sample(b, {"drums"}, 0.0, spec);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::missing_stem);
  }
}
