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
#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "svs/augment.hpp"
#include "svs/dataset.hpp"
#include "svs/errors.hpp"
#include "svs/evaluation.hpp"
#include "svs/mining.hpp"
#include "svs/model.hpp"
#include "svs/png.hpp"
#include "svs/report.hpp"
#include "svs/separation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svs;

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_run_meta(const fs::path& dir, const std::string& command,
                    uint64_t seed, const json& options) {
  json meta;
  meta["command"] = command;
  meta["version"] = kVersion;
  meta["seed"] = seed;
  meta["options"] = options;
  fs::create_directories(dir);
  std::ofstream out(dir / "run_meta.json", std::ios::trunc);
  out << meta.dump(2) << "\n";
}

SegmentSpec segment_spec_for(int frames, int bins) {
  if (frames == 512 && bins == 1024) return SegmentSpec::standard();
  return SegmentSpec::desk(frames, bins);
}

/// One-random-segment-per-song epoch passes over the train split, with
/// optional augmentation. Stateful; build a fresh one per trained source.
SampleStream manifest_stream(const Manifest& manifest,
                             const std::vector<std::string>& sources,
                             const SegmentSpec& seg,
                             const std::vector<AugmentKind>& augment_kinds,
                             double augment_prob) {
  auto tracks = std::make_shared<std::vector<TrackBundle>>();
  for (const auto* t : manifest.part(SplitPart::train)) tracks->push_back(*t);
  if (tracks->empty())
    raise(ErrorCode::invalid_input, "manifest has no train split entries");
  auto order = std::make_shared<std::vector<size_t>>();
  auto cursor = std::make_shared<size_t>(0);

  return [tracks, order, cursor, sources, seg, augment_kinds,
          augment_prob](Rng& rng) -> TrainingSample {
    if (*cursor % tracks->size() == 0) {
      order->resize(tracks->size());
      for (size_t i = 0; i < order->size(); ++i) (*order)[i] = i;
      Rng shuffle_rng = rng.fork("epoch-order");
      shuffle_rng.shuffle(*order);
    }
    const TrackBundle& track = (*tracks)[(*order)[*cursor % tracks->size()]];
    ++*cursor;

    Rng offset_rng = rng.fork("offset");
    double duration = track.duration_s;
    if (duration <= 0.0) {
      const AudioClip probe = read_wav(track.mixture);
      duration = probe.duration_s();
    }
    const double offset =
        select_segment_offset(duration, offset_rng, seg.duration_s);
    TrainingSample sample = load_training_sample(track, sources, offset, seg);

    if (!augment_kinds.empty()) {
      Rng aug_rng = rng.fork("augment");
      if (aug_rng.bernoulli(augment_prob)) {
        const auto kind =
            augment_kinds[static_cast<size_t>(aug_rng.uniform_int(augment_kinds.size()))];
        const auto spec = draw_spec(kind, sources, aug_rng);
        sample = apply(sample, spec);
      }
    }
    return sample;
  };
}

std::vector<TrainingSample> fixed_validation_samples(
    const Manifest& manifest, const std::vector<std::string>& sources,
    const SegmentSpec& seg, uint64_t seed) {
  std::vector<TrainingSample> samples;
  for (const auto* track : manifest.part(SplitPart::val)) {
    Rng rng = Rng(seed).fork("val-offset/" + track->id);
    double duration = track->duration_s;
    if (duration <= 0.0) duration = read_wav(track->mixture).duration_s();
    const double offset = select_segment_offset(duration, rng, seg.duration_s);
    samples.push_back(load_training_sample(*track, sources, offset, seg));
  }
  if (samples.empty())
    raise(ErrorCode::invalid_input, "manifest has no val split entries");
  return samples;
}

// ---------------------------------------------------------------------------
// subcommand bodies

int cmd_mine(const fs::path& pairs_path, const fs::path& out_dir, int window,
             int hop, double max_lag, int jobs, uint64_t seed) {
  MineOptions options;
  options.out_dir = out_dir / "triplets";
  options.window = window;
  options.hop = hop;
  options.max_lag_s = max_lag;
  options.jobs = jobs;

  const auto pairs = load_candidate_pairs(pairs_path);
  const auto result = mine_pipeline(pairs, options);
  save_manifest(result.manifest, out_dir / "manifest.json");
  write_rejection_report(out_dir / "rejections.csv", result.rejects);
  write_triplet_stats(out_dir / "stats.csv", result.stats);
  write_run_meta(out_dir, "mine", seed,
                 {{"pairs", pairs_path.string()},
                  {"window", window},
                  {"hop", hop},
                  {"max_lag_s", max_lag},
                  {"jobs", jobs}});
  std::cout << "mined " << result.manifest.entries.size() << " triplets, rejected "
            << result.rejects.size() << " pairs\n";
  return 0;
}

int cmd_dataset_split(const fs::path& manifest_path, const fs::path& out_path,
                      double train, double val, double test, uint64_t seed) {
  const auto manifest = load_manifest(manifest_path);
  auto out = split_by_artist(manifest, {train, val, test}, seed);
  out.refresh_genre_distribution();
  save_manifest(out, out_path);
  write_run_meta(out_path.parent_path().empty() ? "." : out_path.parent_path(),
                 "dataset-split", seed,
                 {{"manifest", manifest_path.string()},
                  {"train", train},
                  {"val", val},
                  {"test", test},
                  {"out", out_path.string()}});
  std::cout << "split " << out.entries.size() << " tracks\n";
  return 0;
}

int cmd_dataset_rebalance(const fs::path& manifest_path, const fs::path& out_path,
                          const std::string& target_csv, uint64_t seed) {
  std::map<std::string, double> target;
  for (const auto& item : split_list(target_csv)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::invalid_config, "target must be genre=fraction[,...]");
    target[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  const auto manifest = load_manifest(manifest_path);
  const auto out = rebalance_genres(manifest, target, seed);
  save_manifest(out, out_path);
  write_run_meta(out_path.parent_path().empty() ? "." : out_path.parent_path(),
                 "dataset-rebalance", seed,
                 {{"manifest", manifest_path.string()},
                  {"target", target_csv},
                  {"out", out_path.string()}});
  std::cout << "kept " << out.entries.size() << " of " << manifest.entries.size()
            << " tracks\n";
  return 0;
}

int cmd_augment_preview(const fs::path& manifest_path, const std::string& track_id,
                        double offset, const std::string& kind_name,
                        const std::string& sources_csv, int frames, int bins,
                        const fs::path& out_dir, uint64_t seed) {
  const auto manifest = load_manifest(manifest_path);
  const auto* track = manifest.find(track_id);
  if (!track) raise(ErrorCode::invalid_input, "track '" + track_id + "' not in manifest");

  const auto seg = segment_spec_for(frames, bins);
  const auto sources = split_list(sources_csv);
  const auto sample = load_training_sample(*track, sources, offset, seg);

  Rng rng = Rng(seed).fork("augment-preview");
  const auto kind = augment_kind_from_name(kind_name);
  const auto spec = draw_spec(kind, sources, rng);
  const auto augmented = apply(sample, spec);

  fs::create_directories(out_dir);
  std::ofstream(out_dir / "spec.json") << spec.to_json_string() << "\n";
  write_spectrogram_png(out_dir / "before.png", sample.mixture);
  write_spectrogram_png(out_dir / "after.png", augmented.mixture);

  // zero-phase inversion: the magnitude grid is taken as a real, positive
  // complex spectrogram (top bin re-added as zeros inside istft)
  auto render = [&](const Spectrogram& mag, const fs::path& path) {
    auto cplx = Spectrogram::complex_zeros(mag.channels(), mag.frames(), mag.bins(),
                                           mag.window(), mag.hop(), mag.sample_rate());
    for (size_t i = 0; i < mag.magnitude_values().size(); ++i)
      cplx.complex_values()[i] = {mag.magnitude_values()[i], 0.0};
    write_wav(path, istft(cplx, seg.segment_samples()));
  };
  render(sample.mixture, out_dir / "before.wav");
  render(augmented.mixture, out_dir / "after.wav");

  write_run_meta(out_dir, "augment-preview", seed,
                 {{"manifest", manifest_path.string()},
                  {"track", track_id},
                  {"offset", offset},
                  {"kind", kind_name},
                  {"sources", sources_csv},
                  {"frames", frames},
                  {"bins", bins}});
  std::cout << "wrote preview to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& manifest_path, const fs::path& out_dir,
              const std::string& sources_csv, int depth, int base_channels,
              int frames, int bins, int epochs, int steps_per_epoch, double lr,
              int patience, const std::string& augment_csv, double augment_prob,
              int batch_size, uint64_t seed) {
  const auto manifest = load_manifest(manifest_path);
  const auto sources = split_list(sources_csv);
  const auto seg = segment_spec_for(frames, bins);

  UNetConfig net_config;
  net_config.depth = depth;
  net_config.base_channels = base_channels;
  net_config.frames = frames;
  net_config.bins = bins;
  net_config.validate();

  TrainConfig train_config;
  train_config.learning_rate = lr;
  train_config.epochs = epochs;
  train_config.steps_per_epoch = steps_per_epoch;
  train_config.patience = patience;
  train_config.seed = seed;
  train_config.batch_size = batch_size;
  train_config.checkpoint_dir = out_dir / "checkpoints";
  train_config.validate();

  std::vector<AugmentKind> kinds;
  for (const auto& name : split_list(augment_csv)) {
    const auto kind = augment_kind_from_name(name);
    if (kind != AugmentKind::none) kinds.push_back(kind);
  }

  const auto validation = fixed_validation_samples(manifest, sources, seg, seed);
  const auto factory = [&]() {
    return manifest_stream(manifest, sources, seg, kinds, augment_prob);
  };

  std::map<std::string, TrainHistory> history;
  train_sources(sources, net_config, factory, validation, train_config, &history);

  json history_doc;
  for (const auto& [source, h] : history) {
    json entry;
    entry["train_loss"] = h.train_loss;
    entry["val_loss"] = h.val_loss;
    entry["best_epoch"] = h.best_epoch;
    entry["epochs_run"] = h.epochs_run;
    entry["total_steps"] = h.total_steps;
    history_doc[source] = entry;
  }
  std::ofstream(out_dir / "train_history.json") << history_doc.dump(2) << "\n";

  write_run_meta(out_dir, "train", seed,
                 {{"manifest", manifest_path.string()},
                  {"sources", sources_csv},
                  {"depth", depth},
                  {"base_channels", base_channels},
                  {"frames", frames},
                  {"bins", bins},
                  {"epochs", epochs},
                  {"steps_per_epoch", steps_per_epoch},
                  {"learning_rate", lr},
                  {"patience", patience},
                  {"augment", augment_csv},
                  {"augment_prob", augment_prob},
                  {"batch_size", batch_size}});
  for (const auto& [source, h] : history)
    std::cout << source << ": val loss " << h.val_loss.front() << " -> "
              << h.val_loss.back() << " (best epoch " << h.best_epoch << ")\n";
  return 0;
}

int cmd_separate(const fs::path& input, const fs::path& models_dir,
                 const std::string& mode_name, const fs::path& out_dir,
                 uint64_t seed) {
  const auto mode = stem_mode_from_name(mode_name);
  std::map<std::string, UNet> models;
  SegmentSpec seg = SegmentSpec::standard();
  bool seg_set = false;
  for (const auto& source : stem_mode_sources(mode)) {
    const auto path = models_dir / source / "best.ckpt";
    if (!fs::exists(path))
      raise(ErrorCode::invalid_input, "no checkpoint at " + path.string());
    UNet net = load_checkpoint(path);
    if (!seg_set) {
      seg = segment_spec_for(net.config().frames, net.config().bins);
      seg_set = true;
    }
    models.emplace(source, std::move(net));
  }

  const AudioClip clip = read_wav(input);
  const auto outputs = separate_song(clip, models, mode, seg);

  const fs::path dir = out_dir.empty() ? input.parent_path() : out_dir;
  if (!dir.empty()) fs::create_directories(dir);
  const std::string stem = input.stem().string();
  for (const auto& [source, audio] : outputs) {
    const auto path = dir / (stem + "." + source + ".wav");
    write_wav(path, audio, WavFormat::float32);
    std::cout << "wrote " << path.string() << "\n";
  }
  if (!out_dir.empty())
    write_run_meta(out_dir, "separate", seed,
                   {{"input", input.string()},
                    {"models", models_dir.string()},
                    {"mode", mode_name}});
  return 0;
}

int cmd_evaluate(const fs::path& manifest_path, const fs::path& estimates_dir,
                 const std::string& method, const fs::path& out_csv,
                 const std::string& sources_csv, double frame_s, int filter_len,
                 int jobs, uint64_t seed) {
  const auto manifest = load_manifest(manifest_path);
  const auto sources = split_list(sources_csv);

  // test split if present, otherwise every entry
  std::vector<const TrackBundle*> tracks = manifest.part(SplitPart::test);
  if (tracks.empty())
    for (const auto& e : manifest.entries) tracks.push_back(&e);

  // mismatched song sets are fatal and must name the missing ids
  std::vector<std::string> missing;
  for (const auto* track : tracks)
    for (const auto& source : sources) {
      const auto path = estimates_dir / (track->id + "." + source + ".wav");
      if (!fs::exists(path)) missing.push_back(track->id + "." + source + ".wav");
    }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
    raise(ErrorCode::invalid_input, "missing estimates: " + names);
  }

  std::vector<std::vector<MetricRecord>> per_track(tracks.size());
  std::vector<std::string> track_errors(tracks.size());
  auto evaluate_track = [&](size_t i) {
    const TrackBundle* track = tracks[i];
    try {
      std::map<std::string, AudioClip> references, estimates;
      size_t min_len = SIZE_MAX;
      int rate = 0;
      for (const auto& source : sources) {
        AudioClip ref = load_stem_audio(*track, source);
        AudioClip est = read_wav(estimates_dir / (track->id + "." + source + ".wav"));
        if (rate == 0) rate = ref.sample_rate;
        if (ref.sample_rate != rate) ref = resample(ref, rate);
        if (est.sample_rate != rate) est = resample(est, rate);
        min_len = std::min({min_len, ref.length(), est.length()});
        references.emplace(source, std::move(ref));
        estimates.emplace(source, std::move(est));
      }
      for (auto& [name, clip] : references)
        for (auto& ch : clip.samples) ch.resize(min_len);
      for (auto& [name, clip] : estimates)
        for (auto& ch : clip.samples) ch.resize(min_len);
      per_track[i] =
          evaluate_song(track->id, estimates, references, frame_s, filter_len);
    } catch (const std::exception& e) {
      track_errors[i] = e.what();
    }
  };

  if (jobs <= 1) {
    for (size_t i = 0; i < tracks.size(); ++i) evaluate_track(i);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= tracks.size()) break;
        evaluate_track(i);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (size_t i = 0; i < tracks.size(); ++i)
    if (!track_errors[i].empty())
      raise(ErrorCode::invalid_input,
            "song '" + tracks[i]->id + "': " + track_errors[i]);

  std::map<std::string, std::vector<MetricRecord>> results;
  for (const auto& records : per_track)
    for (const auto& rec : records) results[method].push_back(rec);
  write_results_csv(out_csv, results);
  const auto meta_dir = out_csv.parent_path().empty() ? "." : out_csv.parent_path();
  write_run_meta(meta_dir, "evaluate", seed,
                 {{"manifest", manifest_path.string()},
                  {"estimates_dir", estimates_dir.string()},
                  {"method", method},
                  {"out", out_csv.string()},
                  {"frame_s", frame_s},
                  {"filter_len", filter_len}});
  std::cout << "evaluated " << tracks.size() << " songs for method '" << method
            << "'\n";
  return 0;
}

int write_report_files(const fs::path& out_dir,
                       const std::map<std::string, std::vector<MetricRecord>>& merged,
                       const std::string& baseline, double alpha) {
  const auto report = significance_table(merged, baseline, alpha);
  std::ofstream(out_dir / "report.md") << render_markdown(report);
  write_pairwise_matrices(out_dir, report);
  return 0;
}

int cmd_compare(const std::vector<std::string>& result_csvs,
                const std::string& baseline, double alpha, const fs::path& out_dir,
                uint64_t seed) {
  std::vector<std::map<std::string, std::vector<MetricRecord>>> parts;
  for (const auto& path : result_csvs) parts.push_back(read_results_csv(path));
  const auto merged = merge_results(parts);
  fs::create_directories(out_dir);
  write_results_csv(out_dir / "merged.csv", merged);
  write_report_files(out_dir, merged, baseline, alpha);
  json options;
  options["results"] = result_csvs;
  options["baseline"] = baseline;
  options["alpha"] = alpha;
  write_run_meta(out_dir, "compare", seed, options);
  std::cout << "compared " << merged.size() << " methods (baseline '" << baseline
            << "')\n";
  return 0;
}

int cmd_report(const fs::path& dir) {
  std::ifstream meta_in(dir / "run_meta.json");
  if (!meta_in) raise(ErrorCode::invalid_input, "no run_meta.json in " + dir.string());
  json meta;
  meta_in >> meta;
  const std::string baseline = meta.at("options").at("baseline").get<std::string>();
  const double alpha = meta.at("options").at("alpha").get<double>();
  const auto merged = read_results_csv(dir / "merged.csv");
  write_report_files(dir, merged, baseline, alpha);
  std::cout << "regenerated report in " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"svsep: singing-voice separation experimentation toolkit"};
  app.set_config("--config", "", "Read options from a TOML/INI file");
  app.require_subcommand(1);

  uint64_t seed = 0;
  app.add_option("--seed", seed, "Global random seed")->capture_default_str();

  // mine
  auto* mine = app.add_subcommand("mine", "Build a dataset from (mix, instrumental) pairs");
  fs::path mine_pairs, mine_out;
  int mine_window = 2048, mine_hop = 512, mine_jobs = 1;
  double mine_max_lag = 2.0;
  mine->add_option("--pairs", mine_pairs, "Candidate pair manifest (JSON)")->required();
  mine->add_option("--out", mine_out, "Output directory")->required();
  mine->add_option("--window", mine_window, "STFT window")->capture_default_str();
  mine->add_option("--hop", mine_hop, "STFT hop")->capture_default_str();
  mine->add_option("--max-lag", mine_max_lag, "Alignment search window (s)")
      ->capture_default_str();
  mine->add_option("--jobs", mine_jobs, "Parallel workers")->capture_default_str();

  // dataset-split
  auto* dsplit = app.add_subcommand("dataset-split", "Artist-disjoint train/val/test split");
  fs::path dsplit_manifest, dsplit_out;
  double dsplit_train = 0.8, dsplit_val = 0.1, dsplit_test = 0.1;
  dsplit->add_option("--manifest", dsplit_manifest, "Input manifest")->required();
  dsplit->add_option("--out", dsplit_out, "Output manifest path")->required();
  dsplit->add_option("--train", dsplit_train, "Train fraction")->capture_default_str();
  dsplit->add_option("--val", dsplit_val, "Validation fraction")->capture_default_str();
  dsplit->add_option("--test", dsplit_test, "Test fraction")->capture_default_str();

  // dataset-rebalance
  auto* drebal = app.add_subcommand("dataset-rebalance", "Subsample genres to a target mix");
  fs::path drebal_manifest, drebal_out;
  std::string drebal_target;
  drebal->add_option("--manifest", drebal_manifest, "Input manifest")->required();
  drebal->add_option("--out", drebal_out, "Output manifest path")->required();
  drebal->add_option("--target", drebal_target, "genre=fraction[,genre=fraction...]")
      ->required();

  // augment-preview
  auto* preview = app.add_subcommand("augment-preview", "Render one transform before/after");
  fs::path preview_manifest, preview_out;
  std::string preview_track, preview_kind = "stretch";
  std::string preview_sources = "vocals,instrumental";
  double preview_offset = 20.0;
  int preview_frames = 512, preview_bins = 1024;
  preview->add_option("--manifest", preview_manifest, "Manifest")->required();
  preview->add_option("--track", preview_track, "Track id")->required();
  preview->add_option("--out", preview_out, "Output directory")->required();
  preview->add_option("--kind", preview_kind, "Transform kind")->capture_default_str();
  preview->add_option("--offset", preview_offset, "Segment offset (s)")
      ->capture_default_str();
  preview->add_option("--sources", preview_sources, "Targets to load")
      ->capture_default_str();
  preview->add_option("--frames", preview_frames, "Segment frames")->capture_default_str();
  preview->add_option("--bins", preview_bins, "Segment bins")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train one U-Net per source");
  fs::path train_manifest, train_out;
  std::string train_sources_csv = "vocals,instrumental", train_augment;
  int train_depth = 3, train_base = 8, train_frames = 128, train_bins = 256;
  int train_epochs = 10, train_steps = 800, train_patience = 2, train_batch = 1;
  double train_lr = 1e-4, train_augment_prob = 1.0;
  train->add_option("--manifest", train_manifest, "Dataset manifest with a split")
      ->required();
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--sources", train_sources_csv, "Sources to model")
      ->capture_default_str();
  train->add_option("--depth", train_depth, "Encoder/decoder layers")
      ->capture_default_str();
  train->add_option("--base-channels", train_base, "First-layer channels")
      ->capture_default_str();
  train->add_option("--frames", train_frames, "Segment frames")->capture_default_str();
  train->add_option("--bins", train_bins, "Segment bins")->capture_default_str();
  train->add_option("--epochs", train_epochs, "Max epochs")->capture_default_str();
  train->add_option("--steps-per-epoch", train_steps, "Gradient steps per epoch")
      ->capture_default_str();
  train->add_option("--lr", train_lr, "ADAM learning rate")->capture_default_str();
  train->add_option("--patience", train_patience, "Early-stopping patience (epochs)")
      ->capture_default_str();
  train->add_option("--augment", train_augment,
                    "Comma list of transforms drawn per sample (empty = none)");
  train->add_option("--augment-prob", train_augment_prob,
                    "Probability a sample is augmented")
      ->capture_default_str();
  train->add_option("--batch-size", train_batch, "Batch size (must be 1)")
      ->capture_default_str();

  // separate
  auto* separate = app.add_subcommand("separate", "Split a song into sources");
  fs::path sep_input, sep_models, sep_out;
  std::string sep_mode = "two_stem";
  separate->add_option("--input", sep_input, "Input WAV")->required();
  separate->add_option("--models", sep_models, "Training output directory with checkpoints")
      ->required();
  separate->add_option("--mode", sep_mode, "two_stem or four_stem")->capture_default_str();
  separate->add_option("--out", sep_out, "Output directory (default: next to input)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "BSS-eval metrics per song");
  fs::path eval_manifest, eval_estimates, eval_out;
  std::string eval_method = "method", eval_sources = "vocals,instrumental";
  double eval_frame = 1.0;
  int eval_filter = 16, eval_jobs = 1;
  evaluate->add_option("--manifest", eval_manifest, "Reference manifest")->required();
  evaluate->add_option("--estimates-dir", eval_estimates,
                       "Directory of <track>.<source>.wav estimates")
      ->required();
  evaluate->add_option("--out", eval_out, "Results CSV path")->required();
  evaluate->add_option("--method", eval_method, "Method label")->capture_default_str();
  evaluate->add_option("--sources", eval_sources, "Sources to score")
      ->capture_default_str();
  evaluate->add_option("--frame", eval_frame, "Frame length (s)")->capture_default_str();
  evaluate->add_option("--filter-len", eval_filter, "Projection filter taps")
      ->capture_default_str();
  evaluate->add_option("--jobs", eval_jobs, "Parallel workers")->capture_default_str();

  // compare
  auto* compare = app.add_subcommand("compare", "Significance report across methods");
  std::vector<std::string> cmp_results;
  std::string cmp_baseline;
  double cmp_alpha = 0.001;
  fs::path cmp_out;
  compare->add_option("--results", cmp_results, "Result CSVs")->required()->expected(-1);
  compare->add_option("--baseline", cmp_baseline, "Baseline method label")->required();
  compare->add_option("--alpha", cmp_alpha, "Significance threshold")
      ->capture_default_str();
  compare->add_option("--out", cmp_out, "Output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "Regenerate tables from a compare directory");
  fs::path report_dir;
  report->add_option("--dir", report_dir, "Compare output directory")->required();

  // parent options like --seed may appear after the subcommand name
  for (auto* sub : app.get_subcommands(/*filter=*/[](CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2, --help/--version exit 0
  }

  const std::string stage = app.get_subcommands().empty()
                                ? "svsep"
                                : app.get_subcommands().front()->get_name();
  try {
    if (mine->parsed())
      return cmd_mine(mine_pairs, mine_out, mine_window, mine_hop, mine_max_lag,
                      mine_jobs, seed);
    if (dsplit->parsed())
      return cmd_dataset_split(dsplit_manifest, dsplit_out, dsplit_train, dsplit_val,
                               dsplit_test, seed);
    if (drebal->parsed())
      return cmd_dataset_rebalance(drebal_manifest, drebal_out, drebal_target, seed);
    if (preview->parsed())
      return cmd_augment_preview(preview_manifest, preview_track, preview_offset,
                                 preview_kind, preview_sources, preview_frames,
                                 preview_bins, preview_out, seed);
    if (train->parsed())
      return cmd_train(train_manifest, train_out, train_sources_csv, train_depth,
                       train_base, train_frames, train_bins, train_epochs, train_steps,
                       train_lr, train_patience, train_augment, train_augment_prob,
                       train_batch, seed);
    if (separate->parsed())
      return cmd_separate(sep_input, sep_models, sep_mode, sep_out, seed);
    if (evaluate->parsed())
      return cmd_evaluate(eval_manifest, eval_estimates, eval_method, eval_out,
                          eval_sources, eval_frame, eval_filter, eval_jobs, seed);
    if (compare->parsed())
      return cmd_compare(cmp_results, cmp_baseline, cmp_alpha, cmp_out, seed);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const Error& e) {
    std::cerr << "error (" << stage << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error (" << stage << "): " << e.what() << "\n";
    return 1;
  }
  return 2;
}
