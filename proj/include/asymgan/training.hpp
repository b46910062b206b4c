#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymgan/datamodel.hpp"
#include "asymgan/discriminators.hpp"
#include "asymgan/features.hpp"
#include "asymgan/generators.hpp"
#include "asymgan/losses.hpp"

namespace asymgan {

struct TrainConfig {
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 1;
  int epochs = 200;
  int buffer_capacity = 50;
  LossWeights loss_weights;
  bool dual_discriminator = false;
  std::uint64_t seed = 0;
  /// Optional linear decay to zero from `decay_start_epoch` to the last epoch.
  bool linear_decay = false;
  int decay_start_epoch = 100;
  int checkpoint_every = 10;
  /// Stop after this many steps (0: run all epochs).
  std::int64_t max_steps = 0;
  /// Supervised task: train the y -> x' -> y_hat cycle alongside x -> y' -> x_hat.
  bool both_cycles = true;
  SsimConfig ssim;

  static TrainConfig unsupervised_defaults();
  static TrainConfig supervised_defaults();

  void validate() const;

  /// Flat document keyed by field name; loss weights appear as `unsup_lambda_*` and `sup_lambda_*`.
  nlohmann::json to_json() const;
  /// Overrides fields present in `doc` on top of `base`; unknown keys are ignored.
  static TrainConfig from_json(const nlohmann::json& doc, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& doc) { return from_json(doc, TrainConfig{}); }
};

/// Bounded history of generated images for discriminator updates.
class ReplayBuffer {
 public:
  ReplayBuffer(int capacity, std::uint64_t seed);

  /// Processes the batch image by image: while filling, stores and returns the fresh image;
  /// once full, returns the fresh image with probability 0.5, otherwise swaps it for a uniformly
  /// chosen stored image and returns that one.
  torch::Tensor query(const torch::Tensor& fresh);

  std::size_t size() const noexcept { return storage_.size(); }
  int capacity() const noexcept { return capacity_; }

 private:
  int capacity_;
  std::vector<torch::Tensor> storage_;
  std::mt19937_64 rng_;
};

struct StepReport {
  std::int64_t step = 0;
  int epoch = 0;
  double wall_time = 0.0;  // seconds spent in the step
  std::map<std::string, double> values;

  double at(const std::string& key) const { return values.at(key); }
  nlohmann::json to_json() const;
};

enum class SubUpdate { Discriminator, Translate, Reconstruct };
/// Called after each sub-update's optimizer step (gradients are still in place).
using SubUpdateObserver = std::function<void(SubUpdate)>;

struct UnpairedBatch {
  torch::Tensor images;   // (batch, c, h, w)
  torch::Tensor domains;  // (batch) long
};

struct PairedBatch {
  torch::Tensor x, l_x, y, l_y;
};

struct UnsupervisedModels {
  GeneratorPair generators;
  Discriminator discriminator{nullptr};
  std::unique_ptr<torch::optim::Adam> d_opt;
  std::unique_ptr<torch::optim::Adam> gt_opt;
  std::unique_ptr<torch::optim::Adam> gr_opt;  // null when the reconstruction generator owns nothing
  ReplayBuffer buffer{0, 0};
  int num_domains = 2;
  std::int64_t step = 0;
};

struct SupervisedModels {
  GeneratorPair generators;
  Discriminator discriminator{nullptr};
  std::unique_ptr<torch::optim::Adam> d_opt;
  std::unique_ptr<torch::optim::Adam> gt_opt;
  std::unique_ptr<torch::optim::Adam> gr_opt;
  ReplayBuffer buffer{0, 0};
  std::shared_ptr<const FeatureExtractor> extractor;
  std::int64_t step = 0;
};

/// Seeds torch from cfg.seed, builds the pair, the multidomain discriminator and the optimizers.
UnsupervisedModels make_unsupervised_models(const GeneratorPairSpec& pair_spec, const DiscriminatorSpec& d_spec,
                                            const TrainConfig& cfg, int image_channels, int image_size);

SupervisedModels make_supervised_models(const GeneratorPairSpec& pair_spec, const DiscriminatorSpec& d_spec,
                                        const TrainConfig& cfg, int image_channels, int image_size,
                                        std::shared_ptr<const FeatureExtractor> extractor);

/// Target domain per sample, uniform over the domains other than the source.
torch::Tensor sample_targets(const torch::Tensor& source, int num_domains, std::mt19937_64& rng);

/// One iteration: discriminator, then translation generator, then reconstruction generator.
/// Throws TrainingError naming the first non-finite loss component.
StepReport train_step_unsup(UnsupervisedModels& models, const UnpairedBatch& batch, const torch::Tensor& target,
                            const TrainConfig& cfg, const SubUpdateObserver& observer = {});

StepReport train_step_sup(SupervisedModels& models, const PairedBatch& batch, const TrainConfig& cfg,
                          const SubUpdateObserver& observer = {});

struct TrainCallbacks {
  std::function<void(const StepReport&)> on_step;
  std::function<void(const std::filesystem::path&)> on_checkpoint;
};

/// Runs epochs x batches over the manifest's training samples, appends one JSON line per step to
/// `out_dir/log.jsonl`, checkpoints every cfg.checkpoint_every epochs and at the end.
/// Returns the final checkpoint path.
std::filesystem::path train_loop(const DatasetManifest& manifest, const GeneratorPairSpec& pair_spec,
                                 const DiscriminatorSpec& d_spec, const TrainConfig& cfg,
                                 const std::filesystem::path& out_dir, const TrainCallbacks& callbacks = {});

/// Loads every training image of an unpaired manifest into one tensor.
UnpairedBatch load_unpaired(const DatasetManifest& manifest);

}  // namespace asymgan
