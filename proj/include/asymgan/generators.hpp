#pragma once

#include <torch/torch.h>

#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymgan/datamodel.hpp"

namespace asymgan {

/// Generator architecture tiers.
///
/// TierI    seven 3x3/1x1 conv+ReLU stages of width 6, 1x1 projection to RGB (about 2.9K parameters).
/// TierII   7x7 stem, two stride-2 4x4 downsamplings (64 -> 128 -> 256), mirrored transposed-conv decoder.
/// TierIII  TierII plus six residual blocks at the 256-channel bottleneck.
/// ResNet9  reflect-padded 7x7 stem, two 3x3 stride-2 downsamplings, nine residual blocks at 4 * base_width.
struct ArchTier {
  enum class Kind { TierI, TierII, TierIII, ResNet9 };

  Kind kind = Kind::TierIII;
  int base_width = 0;  // ResNet9 only

  static ArchTier tier_i() { return {Kind::TierI, 0}; }
  static ArchTier tier_ii() { return {Kind::TierII, 0}; }
  static ArchTier tier_iii() { return {Kind::TierIII, 0}; }
  static ArchTier resnet9(int base_width) { return {Kind::ResNet9, base_width}; }

  /// "TIER_I", "TIER_II", "TIER_III" or "RESNET9(<width>)".
  std::string to_string() const;
  static ArchTier parse(std::string_view text);

  /// Total spatial downsampling of the encoder.
  int downsampling_factor() const { return kind == Kind::TierI ? 1 : 4; }

  friend bool operator==(const ArchTier&, const ArchTier&) = default;
};

enum class SharingMode { Full, PartialEncoder, None };

std::string to_string(SharingMode mode);
SharingMode parse_sharing_mode(std::string_view text);

struct LabelGuidanceSpec {
  int num_domains = 2;
  int embed_dim = 64;
  friend bool operator==(const LabelGuidanceSpec&, const LabelGuidanceSpec&) = default;
};

struct SkeletonGuidanceSpec {
  int channels = 3;
  friend bool operator==(const SkeletonGuidanceSpec&, const SkeletonGuidanceSpec&) = default;
};

using GuidanceSpec = std::variant<LabelGuidanceSpec, SkeletonGuidanceSpec>;

struct GeneratorPairSpec {
  ArchTier translate_arch = ArchTier::tier_iii();
  ArchTier reconstruct_arch = ArchTier::tier_i();
  SharingMode sharing = SharingMode::None;
  GuidanceSpec guidance = LabelGuidanceSpec{};

  /// Throws SpecError on inconsistent combinations (see build_pair).
  void validate(int image_channels = 3) const;

  nlohmann::json to_json() const;
  static GeneratorPairSpec from_json(const nlohmann::json& doc);

  friend bool operator==(const GeneratorPairSpec&, const GeneratorPairSpec&) = default;
};

/// Conv + instance-norm residual block. `affine` selects learnable norm scales (StarGAN style)
/// versus bias-carrying convolutions with reflect padding (Johnson style).
class ResidualBlockImpl : public torch::nn::Module {
 public:
  ResidualBlockImpl(int64_t channels, bool johnson_style);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ResidualBlock);

class GeneratorImpl : public torch::nn::Module {
 public:
  /// `shared_encoder`, when given, is registered instead of building a fresh encoder.
  GeneratorImpl(const ArchTier& arch, const GuidanceSpec& guidance, int64_t image_channels,
                torch::nn::Sequential shared_encoder = nullptr);

  /// Maps an image batch plus guidance to an image batch of the same shape, values in [-1, 1].
  torch::Tensor forward(const torch::Tensor& x, const Guidance& guidance);

  /// Learned 64-d label embedding broadcast to (batch, embed_dim, h, w). Throws ValidationError
  /// when a row of `one_hot` is not a one-hot vector.
  torch::Tensor embed_label(const torch::Tensor& one_hot, int64_t h, int64_t w);

  torch::nn::Sequential encoder() const { return encoder_; }
  const ArchTier& arch() const noexcept { return arch_; }
  const GuidanceSpec& guidance_spec() const noexcept { return guidance_; }

 private:
  ArchTier arch_;
  GuidanceSpec guidance_;
  int64_t image_channels_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Linear embedding_{nullptr};
  torch::nn::Sequential fusion_{nullptr};
  torch::nn::Sequential body_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
};
TORCH_MODULE(Generator);

/// The asymmetric pair. Under SharingMode::Full both handles refer to one module; under
/// PartialEncoder the reconstruction generator registers the translation generator's encoder.
struct GeneratorPair {
  GeneratorPairSpec spec;
  Generator translate{nullptr};
  Generator reconstruct{nullptr};

  /// Parameters updated by the translation step (includes every shared parameter).
  std::vector<torch::Tensor> translate_parameters() const;
  /// Parameters owned by the reconstruction step only; empty under full sharing.
  std::vector<torch::Tensor> reconstruct_parameters() const;
};

/// Builds both generators. Throws SpecError for inconsistent specs and ShapeError when
/// `image_size` is not divisible by either architecture's downsampling factor.
GeneratorPair build_pair(const GeneratorPairSpec& spec, int image_channels, int image_size);

/// Scalar parameter count; a tensor reachable through several modules is counted once.
int64_t count_parameters(const torch::nn::Module& module);
int64_t count_parameters(const GeneratorPair& pair);
int64_t count_parameters(const std::vector<torch::Tensor>& params);

/// Zero-mean Gaussian (std 0.02, or sqrt(2 / fan_in) when `fan_in_scaled`) for conv/linear weights,
/// N(1, 0.02) for norm scales, zero biases.
void init_weights(torch::nn::Module& module, bool fan_in_scaled = false);

}  // namespace asymgan
