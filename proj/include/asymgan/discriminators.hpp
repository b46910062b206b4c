#pragma once

#include <torch/torch.h>

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace asymgan {

struct MultidomainKind {
  int num_domains = 2;
  int image_channels = 3;
  friend bool operator==(const MultidomainKind&, const MultidomainKind&) = default;
};

/// Conditional discriminator over (source image, target skeleton, candidate image) triplets.
struct TripletKind {
  int image_channels = 3;
  int skeleton_channels = 3;
  friend bool operator==(const TripletKind&, const TripletKind&) = default;
};

struct DiscriminatorSpec {
  std::variant<MultidomainKind, TripletKind> kind = MultidomainKind{};
  int base_width = 64;
  int n_layers = 3;  // stride-2 layers; 3 gives the 70x70 receptive field
  bool dual = false;

  void validate() const;
  int input_channels() const;

  nlohmann::json to_json() const;
  static DiscriminatorSpec from_json(const nlohmann::json& doc);

  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

struct DiscriminatorOutput {
  torch::Tensor src_map;                     // (batch, 1, h', w'), raw least-squares scores
  std::optional<torch::Tensor> class_logits;  // (batch, m), multidomain kind only
};

struct ConvGeometry {
  int kernel;
  int stride;
};

/// Receptive field of one output unit of a conv stack: r <- (r - 1) * stride + kernel, applied
/// from the last layer back to the first.
int receptive_field(std::span<const ConvGeometry> layers);
int receptive_field(const DiscriminatorSpec& spec);

/// Layer geometry of the PatchGAN trunk plus source head for `spec`.
std::vector<ConvGeometry> patch_layers(const DiscriminatorSpec& spec);

/// Source-map side length for a square input of `image_size`.
int64_t src_map_size(const DiscriminatorSpec& spec, int64_t image_size);

/// One PatchGAN: 4x4 convs (stride 2 x n_layers, then stride 1), leaky ReLU 0.2, a 4x4 source head.
/// The triplet kind has instance norm after every layer but the first. The multidomain kind has no
/// normalization and adds a classifier head whose kernel spans the whole final feature map.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(const DiscriminatorSpec& spec, int64_t image_size);
  DiscriminatorOutput forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Conv2d src_head_{nullptr};
  torch::nn::Conv2d cls_head_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

/// One PatchGAN, or two when `spec.dual` (the second sees 2x average-pooled inputs).
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(const DiscriminatorSpec& spec, int64_t image_size);

  /// One output per scale. Throws ShapeError when `x` does not match the configured channels/size.
  std::vector<DiscriminatorOutput> forward_multidomain(const torch::Tensor& x);
  /// Concatenates (x, l, y) channel-wise. Throws ShapeError on dim mismatch.
  std::vector<DiscriminatorOutput> forward_triplet(const torch::Tensor& x, const torch::Tensor& l,
                                                   const torch::Tensor& y);
  /// Scores an already concatenated triplet (used with the replay buffer).
  std::vector<DiscriminatorOutput> forward_stacked(const torch::Tensor& xly);

  const DiscriminatorSpec& spec() const noexcept { return spec_; }
  int64_t image_size() const noexcept { return image_size_; }
  std::size_t scales() const noexcept { return scales_.size(); }

 private:
  std::vector<DiscriminatorOutput> run(const torch::Tensor& input);

  DiscriminatorSpec spec_;
  int64_t image_size_;
  std::vector<PatchDiscriminator> scales_;
};
TORCH_MODULE(Discriminator);

/// Throws SpecError when the spec is invalid or `image_size` cannot pass through the trunk.
Discriminator build_discriminator(const DiscriminatorSpec& spec, int64_t image_size);

}  // namespace asymgan
