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
#include "svs/mining.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "svs/errors.hpp"
#include "svs/fft.hpp"

namespace svs {

using nlohmann::json;

FilterDecision filter_pair(const TrackPair& pair) {
  const double dm = pair.mix.duration_s();
  const double di = pair.instrumental.duration_s();
  if (std::abs(dm - di) > kMaxDurationGapS) return {false, "duration-mismatch"};
  if (dm > kMaxTrackS) return {false, "too-long"};
  return {true, ""};
}

namespace {

/// Accumulates cc(o) = sum_t mix[t] * inst[t - o] for |o| <= max_lag using
/// blocked FFT correlation, O(n log b) time and O(b) memory.
std::vector<double> blocked_cross_correlation(const std::vector<double>& mix,
                                              const std::vector<double>& inst,
                                              long long max_lag) {
  const long long lags = 2 * max_lag + 1;
  std::vector<double> cc(static_cast<size_t>(lags), 0.0);

  const long long block = std::max<long long>(4 * max_lag, 1 << 15);
  const size_t fft_n = next_power_of_two(static_cast<size_t>(block + 2 * max_lag));

  std::vector<std::complex<double>> fa(fft_n), fb(fft_n);
  const auto mix_len = static_cast<long long>(mix.size());
  const auto inst_len = static_cast<long long>(inst.size());

  for (long long start = 0; start < mix_len; start += block) {
    const long long b_len = std::min(block, mix_len - start);
    std::fill(fa.begin(), fa.end(), std::complex<double>(0, 0));
    std::fill(fb.begin(), fb.end(), std::complex<double>(0, 0));
    for (long long u = 0; u < b_len; ++u) fa[static_cast<size_t>(u)] = mix[static_cast<size_t>(start + u)];
    // inst slab covering [start - max_lag, start + b_len + max_lag)
    for (long long w = 0; w < b_len + 2 * max_lag; ++w) {
      const long long t = start - max_lag + w;
      if (t >= 0 && t < inst_len) fb[static_cast<size_t>(w)] = inst[static_cast<size_t>(t)];
    }
    fft(fa, false);
    fft(fb, false);
    // correlation c(d) = sum_u a[u] * b[u + d] = IFFT(conj(A) * B)
    for (size_t i = 0; i < fft_n; ++i) fa[i] = std::conj(fa[i]) * fb[i];
    fft(fa, true);
    // cc(o) uses d = max_lag - o
    for (long long o = -max_lag; o <= max_lag; ++o) {
      const long long d = max_lag - o;
      cc[static_cast<size_t>(o + max_lag)] += fa[static_cast<size_t>(d)].real();
    }
  }
  return cc;
}

double signal_energy(const std::vector<double>& x) {
  double acc = 0.0;
  for (const double v : x) acc += v * v;
  return acc;
}

}  // namespace

AlignResult align(const TrackPair& pair, double max_lag_s) {
  pair.mix.validate();
  pair.instrumental.validate();
  if (pair.mix.sample_rate != pair.instrumental.sample_rate)
    raise(ErrorCode::invalid_input, "pair tracks must share a sample rate");
  const auto max_lag =
      static_cast<long long>(std::llround(max_lag_s * pair.mix.sample_rate));
  if (static_cast<long long>(pair.mix.length()) < 2 * max_lag ||
      static_cast<long long>(pair.instrumental.length()) < 2 * max_lag)
    raise(ErrorCode::invalid_input, "clips too short for the alignment window");

  const auto mix_mono = downmix_mono(pair.mix);
  const auto inst_mono = downmix_mono(pair.instrumental);
  const auto cc = blocked_cross_correlation(mix_mono.samples[0], inst_mono.samples[0],
                                            max_lag);

  const double norm = std::sqrt(signal_energy(mix_mono.samples[0]) *
                                signal_energy(inst_mono.samples[0]));
  long long best = -max_lag;
  double best_value = -1e300;
  for (long long o = -max_lag; o <= max_lag; ++o) {
    const double v = cc[static_cast<size_t>(o + max_lag)];
    if (v > best_value) {
      best_value = v;
      best = o;
    }
  }
  const double peak = norm > 0.0 ? best_value / norm : 0.0;
  if (peak < kAlignmentPeakThreshold)
    raise(ErrorCode::alignment_failed,
          "correlation peak " + std::to_string(peak) + " below threshold");

  // aligned_inst[t] = inst[t - best]; trim both to the overlap
  const auto mix_len = static_cast<long long>(pair.mix.length());
  const auto inst_len = static_cast<long long>(pair.instrumental.length());
  const long long t0 = std::max<long long>(0, best);
  const long long t1 = std::min(mix_len, best + inst_len);
  if (t1 <= t0) raise(ErrorCode::alignment_failed, "no overlap after alignment");
  const auto common = static_cast<size_t>(t1 - t0);

  AlignResult result;
  result.offset = best;
  result.peak = peak;
  result.pair.meta = pair.meta;
  result.pair.mix = AudioClip::zeros(pair.mix.channels(), common, pair.mix.sample_rate);
  result.pair.instrumental =
      AudioClip::zeros(pair.instrumental.channels(), common, pair.mix.sample_rate);
  for (int ch = 0; ch < pair.mix.channels(); ++ch)
    std::copy_n(pair.mix.samples[static_cast<size_t>(ch)].begin() + t0, common,
                result.pair.mix.samples[static_cast<size_t>(ch)].begin());
  for (int ch = 0; ch < pair.instrumental.channels(); ++ch)
    std::copy_n(pair.instrumental.samples[static_cast<size_t>(ch)].begin() + (t0 - best),
                common, result.pair.instrumental.samples[static_cast<size_t>(ch)].begin());
  return result;
}

LoudnessResult equalize_loudness(const TrackPair& pair) {
  const double rms_mix = rms(pair.mix);
  const double rms_inst = rms(pair.instrumental);
  if (rms_mix <= 0.0 || rms_inst <= 0.0)
    raise(ErrorCode::silent_track, "cannot equalize a silent track");
  const double gain = rms_mix / rms_inst;
  LoudnessResult result;
  result.gain_db = 20.0 * std::log10(gain);
  result.pair = pair;
  for (auto& ch : result.pair.instrumental.samples)
    for (auto& s : ch) s *= gain;
  return result;
}

Spectrogram estimate_vocals(const Spectrogram& mix_mag, const Spectrogram& inst_mag) {
  if (mix_mag.kind() != Spectrogram::Kind::magnitude ||
      inst_mag.kind() != Spectrogram::Kind::magnitude)
    raise(ErrorCode::kind_mismatch, "vocal estimation needs magnitude grids");
  if (!mix_mag.same_shape(inst_mag))
    raise(ErrorCode::shape_mismatch, "mix and instrumental grids differ in shape");
  Spectrogram out = mix_mag;
  const auto& inst = inst_mag.magnitude_values();
  auto& v = out.magnitude_values();
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::max(v[i] - inst[i], 0.0);
  return out;
}

AudioClip render_vocal_estimate(const AudioClip& mix, const AudioClip& instrumental,
                                int window, int hop) {
  mix.validate();
  instrumental.validate();
  if (mix.sample_rate != instrumental.sample_rate ||
      mix.channels() != instrumental.channels() || mix.length() != instrumental.length())
    raise(ErrorCode::shape_mismatch, "tracks must be aligned before rendering");
  if (!is_power_of_two(static_cast<size_t>(window)) || hop <= 0 || hop > window)
    raise(ErrorCode::invalid_input, "bad window/hop");

  const size_t len = mix.length();
  const int half = window / 2;
  const auto frames = static_cast<long long>(1 + len / static_cast<size_t>(hop));
  const size_t padded_len = static_cast<size_t>(frames - 1) * hop + window;

  std::vector<double> win(static_cast<size_t>(window));
  for (int n = 0; n < window; ++n)
    win[static_cast<size_t>(n)] =
        0.5 * (1.0 - std::cos(2.0 * M_PI * n / window));

  auto reflect = [](const std::vector<double>& x, long long i) -> double {
    const auto n = static_cast<long long>(x.size());
    if (n == 1) return x[0];
    const long long period = 2 * (n - 1);
    long long j = i % period;
    if (j < 0) j += period;
    if (j >= n) j = period - j;
    return x[static_cast<size_t>(j)];
  };

  AudioClip out = AudioClip::zeros(mix.channels(), len, mix.sample_rate);
  std::vector<double> frame_m(static_cast<size_t>(window)),
      frame_i(static_cast<size_t>(window));
  std::vector<double> acc(padded_len), wsum(padded_len);
  std::vector<std::complex<double>> vbins(static_cast<size_t>(window / 2 + 1));

  for (int ch = 0; ch < mix.channels(); ++ch) {
    std::fill(acc.begin(), acc.end(), 0.0);
    std::fill(wsum.begin(), wsum.end(), 0.0);
    const auto& xm = mix.samples[static_cast<size_t>(ch)];
    const auto& xi = instrumental.samples[static_cast<size_t>(ch)];
    for (long long m = 0; m < frames; ++m) {
      const long long start = m * hop - half;
      for (int n = 0; n < window; ++n) {
        frame_m[static_cast<size_t>(n)] = reflect(xm, start + n) * win[static_cast<size_t>(n)];
        frame_i[static_cast<size_t>(n)] = reflect(xi, start + n) * win[static_cast<size_t>(n)];
      }
      const auto bm = rfft(frame_m);
      const auto bi = rfft(frame_i);
      for (size_t b = 0; b < vbins.size(); ++b) {
        const double mmag = std::abs(bm[b]);
        const double vmag = std::max(mmag - std::abs(bi[b]), 0.0);
        // mixture phase
        vbins[b] = mmag > 0.0 ? bm[b] * (vmag / mmag) : std::complex<double>(0, 0);
      }
      const auto chunk = irfft(vbins, static_cast<size_t>(window));
      const size_t base = static_cast<size_t>(m) * hop;
      for (int n = 0; n < window; ++n) {
        acc[base + n] += win[static_cast<size_t>(n)] * chunk[static_cast<size_t>(n)];
        wsum[base + n] += win[static_cast<size_t>(n)] * win[static_cast<size_t>(n)];
      }
    }
    for (size_t t = 0; t < len; ++t) {
      const size_t p = t + static_cast<size_t>(half);
      if (p < padded_len && wsum[p] > 1e-12)
        out.samples[static_cast<size_t>(ch)][t] = acc[p] / wsum[p];
    }
  }
  return out;
}

std::vector<CandidatePair> load_candidate_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::io_error, "cannot open pair manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    raise(ErrorCode::io_error, "pair manifest parse error: " + std::string(e.what()));
  }
  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  std::vector<CandidatePair> pairs;
  const json entries = doc.is_array() ? doc : doc.value("pairs", json::array());
  for (const auto& je : entries) {
    CandidatePair p;
    p.meta.id = je.at("id").get<std::string>();
    p.mix_path = resolve(je.at("mix").get<std::string>());
    p.instrumental_path = resolve(je.at("instrumental").get<std::string>());
    p.meta.artist = je.value("artist", "unknown");
    p.meta.genre = je.value("genre", "unknown");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

namespace {

struct PairOutcome {
  std::optional<TrackBundle> entry;
  std::optional<RejectionRecord> reject;
  std::optional<TripletStats> stats;
};

PairOutcome process_pair(const CandidatePair& cand, const MineOptions& options) {
  PairOutcome outcome;
  auto rejected = [&](const std::string& stage, const std::string& reason) {
    outcome.reject = RejectionRecord{cand.meta.id, stage, reason};
    return outcome;
  };

  TrackPair pair;
  pair.meta = cand.meta;
  try {
    pair.mix = read_wav(cand.mix_path);
    pair.instrumental = read_wav(cand.instrumental_path);
  } catch (const Error& e) {
    return rejected("load", e.what());
  }
  if (pair.instrumental.sample_rate != pair.mix.sample_rate)
    pair.instrumental = resample(pair.instrumental, pair.mix.sample_rate);

  const FilterDecision decision = filter_pair(pair);
  if (!decision.accept) return rejected("filter", decision.reason);

  AlignResult aligned;
  try {
    aligned = align(pair, options.max_lag_s);
  } catch (const Error& e) {
    return rejected("align", e.what());
  }

  LoudnessResult equalized;
  try {
    equalized = equalize_loudness(aligned.pair);
  } catch (const Error& e) {
    return rejected("equalize", e.what());
  }

  const AudioClip vocals = render_vocal_estimate(
      equalized.pair.mix, equalized.pair.instrumental, options.window, options.hop);

  const auto dir = options.out_dir / cand.meta.id;
  std::filesystem::create_directories(dir);
  write_wav(dir / "mixture.wav", equalized.pair.mix);
  write_wav(dir / "instrumental.wav", equalized.pair.instrumental);
  write_wav(dir / "vocals.wav", vocals);

  TrackBundle entry;
  entry.id = cand.meta.id;
  entry.artist = cand.meta.artist;
  entry.genre = cand.meta.genre;
  entry.duration_s = equalized.pair.mix.duration_s();
  entry.mixture = dir / "mixture.wav";
  entry.stems[kStemInstrumental] = dir / "instrumental.wav";
  entry.stems[kStemVocals] = dir / "vocals.wav";
  entry.quality = TrackBundle::Quality::estimates;
  outcome.entry = std::move(entry);

  double mix_energy = 0.0, vocal_energy = 0.0;
  for (int ch = 0; ch < equalized.pair.mix.channels(); ++ch)
    for (const double s : equalized.pair.mix.samples[static_cast<size_t>(ch)])
      mix_energy += s * s;
  for (int ch = 0; ch < vocals.channels(); ++ch)
    for (const double s : vocals.samples[static_cast<size_t>(ch)]) vocal_energy += s * s;
  outcome.stats = TripletStats{cand.meta.id, aligned.offset, equalized.gain_db,
                               mix_energy > 0.0 ? vocal_energy / mix_energy : 0.0};
  return outcome;
}

}  // namespace

MineResult mine_pipeline(const std::vector<CandidatePair>& pairs,
                         const MineOptions& options) {
  if (options.out_dir.empty())
    raise(ErrorCode::invalid_config, "mining needs an output directory");
  std::filesystem::create_directories(options.out_dir);

  std::vector<PairOutcome> outcomes(pairs.size());
  const int jobs = std::max(1, options.jobs);
  if (jobs == 1 || pairs.size() <= 1) {
    for (size_t i = 0; i < pairs.size(); ++i)
      outcomes[i] = process_pair(pairs[i], options);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= pairs.size()) break;
        outcomes[i] = process_pair(pairs[i], options);
      }
    };
    std::vector<std::thread> threads;
    const auto n_threads = std::min<size_t>(static_cast<size_t>(jobs), pairs.size());
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  // assemble in input order regardless of completion order
  MineResult result;
  for (auto& outcome : outcomes) {
    if (outcome.entry) result.manifest.entries.push_back(std::move(*outcome.entry));
    if (outcome.reject) result.rejects.push_back(std::move(*outcome.reject));
    if (outcome.stats) result.stats.push_back(std::move(*outcome.stats));
  }
  result.manifest.refresh_genre_distribution();
  result.manifest.validate();
  return result;
}

void write_rejection_report(const std::filesystem::path& path,
                            const std::vector<RejectionRecord>& rejects) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
  out << "pair_id,stage,reason\n";
  for (const auto& r : rejects) {
    std::string reason = r.reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    out << r.pair_id << "," << r.stage << "," << reason << "\n";
  }
}

void write_triplet_stats(const std::filesystem::path& path,
                         const std::vector<TripletStats>& stats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::io_error, "cannot write " + path.string());
  out << "pair_id,alignment_offset,gain_db,vocal_energy_ratio\n";
  char line[160];
  for (const auto& s : stats) {
    std::snprintf(line, sizeof(line), "%s,%lld,%.6f,%.9f\n", s.pair_id.c_str(),
                  s.alignment_offset, s.gain_db, s.vocal_energy_ratio);
    out << line;
  }
}

}  // namespace svs
