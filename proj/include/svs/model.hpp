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
#ifndef SVS_MODEL_HPP
#define SVS_MODEL_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "svs/dataset.hpp"
#include "svs/rng.hpp"
#include "svs/tensor.hpp"

namespace svs {

/// Stereo U-Net masker: strided 5x5 convolutions down, strided 5x5
/// deconvolutions with skip concatenations up, 1x1 sigmoid head. Channel
/// ladder base, 2*base, 4*base, ...
struct UNetConfig {
  int depth = 5;
  int base_channels = 16;
  int kernel = 5;
  int stride = 2;
  double dropout = 0.5;      // first 3 decoder layers, training only
  int dropout_layers = 3;
  int in_channels = 2;
  int frames = 512;
  int bins = 1024;
  double leaky_slope = 0.2;
  double norm_epsilon = 1e-5;
  double norm_momentum = 0.1;

  void validate() const;  // frames and bins divisible by 2^depth, depth >= 1
  /// CPU-friendly default: depth 3, 8 base channels, 128x256 grids.
  static UNetConfig desk_scale();

  std::string to_json_string() const;
  static UNetConfig from_json_string(const std::string& text);
};

/// The masker network with its flat parameter and normalization-statistics
/// vectors. Parameter order is fixed (encoder conv W,b,gamma,beta per layer,
/// then decoder deconv W,b per layer, then head W,b) for checkpointing and
/// finite-difference checks.
class UNet {
 public:
  explicit UNet(const UNetConfig& config);

  const UNetConfig& config() const { return config_; }
  size_t param_count() const { return params_.size(); }
  size_t stats_count() const { return stats_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& stats() { return stats_; }
  const std::vector<double>& stats() const { return stats_; }

  /// Glorot-uniform weights, unit gamma, zero beta/bias, zero running mean,
  /// unit running variance.
  void init_params(Rng& rng);

  struct ForwardResult {
    Tensor3 mask;      // in [0, 1]
    Tensor3 estimate;  // mask * mixture elementwise
  };

  /// Inference pass: running statistics, no dropout. Reentrant.
  ForwardResult forward(const Tensor3& mixture) const;

  /// Training loss (batch statistics, dropout from `dropout_seed`). Does not
  /// modify any state.
  double training_loss(const Tensor3& mixture, const Tensor3& target,
                       uint64_t dropout_seed) const;

  /// Training loss plus gradient of the masked L1 loss with respect to every
  /// parameter. Updates running statistics when `update_running_stats`.
  double loss_and_gradient(const Tensor3& mixture, const Tensor3& target,
                           uint64_t dropout_seed, std::vector<double>& grad,
                           bool update_running_stats = true);

  double eval_loss(const Tensor3& mixture, const Tensor3& target) const;

 private:
  struct Workspace;
  void run_forward(const Tensor3& mixture, bool training, uint64_t dropout_seed,
                   Workspace* ws, Tensor3* mask_out, Tensor3* estimate_out,
                   bool update_running_stats);

  UNetConfig config_;
  std::vector<double> params_;
  std::vector<double> stats_;

  // flat-vector offsets per layer
  struct LayerOffsets {
    size_t conv_w = 0, conv_b = 0, gamma = 0, beta = 0;
    size_t run_mean = 0, run_var = 0;
    int in_ch = 0, out_ch = 0;
  };
  std::vector<LayerOffsets> enc_;
  std::vector<LayerOffsets> dec_;
  LayerOffsets head_;
};

/// Mean absolute elementwise difference.
double l1_masked_loss(const Tensor3& estimate, const Tensor3& target);
double l1_masked_loss(const Spectrogram& estimate, const Spectrogram& target);

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
};

/// One standard ADAM update with bias correction.
void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, double lr, double beta1, double beta2, double eps);

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 1;  // the pipeline trains with batch size 1
  int epochs = 10;
  int steps_per_epoch = 800;
  int patience = 2;  // early stopping, in epochs without improvement
  uint64_t seed = 0;
  std::filesystem::path checkpoint_dir;  // empty disables checkpoint files

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;  // one mean per epoch
  std::vector<double> val_loss;    // index 0 = before any update
  long total_steps = 0;
  int best_epoch = 0;  // 1-based; 0 means the untrained model was best
  int epochs_run = 0;
};

/// Produces the next training sample; receives a per-draw RNG substream.
using SampleStream = std::function<TrainingSample(Rng&)>;
/// Builds a fresh stream; called once per trained source so that stateful
/// streams (epoch-pass shuffles) restart identically for every net.
using SampleStreamFactory = std::function<SampleStream()>;

/// Trains one network to predict `source` from the mixture. Early stopping
/// on validation loss; the best-epoch parameters are restored on return.
TrainHistory train_model(UNet& net, const std::string& source,
                         const SampleStream& stream,
                         const std::vector<TrainingSample>& validation,
                         const TrainConfig& config);

/// One independent U-Net per requested source, identical stream and seeds
/// forked per source.
std::map<std::string, UNet> train_sources(const std::vector<std::string>& sources,
                                          const UNetConfig& net_config,
                                          const SampleStreamFactory& make_stream,
                                          const std::vector<TrainingSample>& validation,
                                          const TrainConfig& config,
                                          std::map<std::string, TrainHistory>* history = nullptr);

/// Checkpoint container: JSON header + little-endian float32 parameter and
/// statistics blocks (layout documented in the README).
struct CheckpointMeta {
  std::string source;
  int epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
};

void save_checkpoint(const std::filesystem::path& path, const UNet& net,
                     const CheckpointMeta& meta);
UNet load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace svs

#endif  // SVS_MODEL_HPP
