#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace asymgan {

/// Pure, deterministic feature map used by the perceptual loss (per-layer activations with
/// declared weights) and by the Frechet distance (pooled (batch, d) embeddings).
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  virtual std::vector<torch::Tensor> layer_features(const torch::Tensor& x) const = 0;
  virtual std::vector<double> layer_weights() const = 0;
  /// (batch, feature_dim()) embedding.
  virtual torch::Tensor embed(const torch::Tensor& x) const = 0;
  virtual int64_t feature_dim() const = 0;
  virtual int64_t input_channels() const = 0;
  /// Smallest accepted spatial side.
  virtual int64_t min_input_size() const { return 1; }
  virtual std::string identity() const = 0;

  /// Throws ShapeError when `x` cannot be fed to this extractor.
  void check_input(const torch::Tensor& x) const;
};

/// phi(x) = x with a single unit-weight layer; embed flattens.
class IdentityExtractor final : public FeatureExtractor {
 public:
  explicit IdentityExtractor(int64_t channels = 3) : channels_(channels) {}

  std::vector<torch::Tensor> layer_features(const torch::Tensor& x) const override { return {x}; }
  std::vector<double> layer_weights() const override { return {1.0}; }
  torch::Tensor embed(const torch::Tensor& x) const override { return x.flatten(1); }
  int64_t feature_dim() const override { return -1; }
  int64_t input_channels() const override { return channels_; }
  std::string identity() const override { return "identity"; }

 private:
  int64_t channels_;
};

/// Fixed-seed random convolution stack: three 3x3 conv + tanh layers (widths 16, 32, 64; strides 1, 2, 2),
/// equal layer weights. The embedding concatenates the spatial means of all three layers.
class RandomConvExtractor final : public FeatureExtractor {
 public:
  explicit RandomConvExtractor(std::uint64_t seed = 0, int64_t channels = 3);

  std::vector<torch::Tensor> layer_features(const torch::Tensor& x) const override;
  std::vector<double> layer_weights() const override;
  torch::Tensor embed(const torch::Tensor& x) const override;
  int64_t feature_dim() const override;
  int64_t input_channels() const override { return channels_; }
  int64_t min_input_size() const override { return 4; }
  std::string identity() const override;

  const std::vector<torch::Tensor>& weights() const noexcept { return weights_; }
  const std::vector<torch::Tensor>& biases() const noexcept { return biases_; }
  static constexpr std::array<int64_t, 3> kStrides{1, 2, 2};

 private:
  std::uint64_t seed_;
  int64_t channels_;
  std::vector<torch::Tensor> weights_;
  std::vector<torch::Tensor> biases_;
};

}  // namespace asymgan
