#include "asymgan/generators.hpp"

#include <charconv>
#include <cmath>
#include <unordered_set>

#include "asymgan/errors.hpp"

namespace nn = torch::nn;

namespace asymgan {

std::string ArchTier::to_string() const {
  switch (kind) {
    case Kind::TierI: return "TIER_I";
    case Kind::TierII: return "TIER_II";
    case Kind::TierIII: return "TIER_III";
    case Kind::ResNet9: return "RESNET9(" + std::to_string(base_width) + ")";
  }
  return "?";
}

ArchTier ArchTier::parse(std::string_view text) {
  if (text == "TIER_I") return tier_i();
  if (text == "TIER_II") return tier_ii();
  if (text == "TIER_III") return tier_iii();
  if (text.starts_with("RESNET9(") && text.ends_with(")")) {
    const auto digits = text.substr(8, text.size() - 9);
    int width = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), width);
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && width >= 1) return resnet9(width);
  }
  throw SpecError("unknown architecture tier '" + std::string(text) + "'");
}

std::string to_string(SharingMode mode) {
  switch (mode) {
    case SharingMode::Full: return "FULL";
    case SharingMode::PartialEncoder: return "PARTIAL_ENCODER";
    case SharingMode::None: return "NONE";
  }
  return "?";
}

SharingMode parse_sharing_mode(std::string_view text) {
  if (text == "FULL") return SharingMode::Full;
  if (text == "PARTIAL_ENCODER") return SharingMode::PartialEncoder;
  if (text == "NONE") return SharingMode::None;
  throw SpecError("unknown sharing mode '" + std::string(text) + "'");
}

namespace {

constexpr int64_t kTierIWidth = 6;
constexpr int64_t kStarWidth = 64;

int64_t input_channels(const GuidanceSpec& guidance, int64_t image_channels) {
  if (const auto* s = std::get_if<SkeletonGuidanceSpec>(&guidance)) return image_channels + s->channels;
  return image_channels;
}

// Two generators can share an encoder only when their encoders are built identically.
std::string encoder_signature(const ArchTier& arch, int64_t in_channels) {
  switch (arch.kind) {
    case ArchTier::Kind::TierI: return "tier_i/" + std::to_string(in_channels);
    case ArchTier::Kind::TierII:
    case ArchTier::Kind::TierIII: return "stargan/" + std::to_string(in_channels);
    case ArchTier::Kind::ResNet9:
      return "resnet/" + std::to_string(arch.base_width) + "/" + std::to_string(in_channels);
  }
  return {};
}

nn::Conv2d conv(int64_t in, int64_t out, int64_t k, int64_t stride, int64_t pad, bool bias) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad).bias(bias));
}

nn::InstanceNorm2d inorm(int64_t channels, bool affine) {
  return nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(affine).track_running_stats(false));
}

int64_t encoder_out_channels(const ArchTier& arch) {
  switch (arch.kind) {
    case ArchTier::Kind::TierI: return kTierIWidth;
    case ArchTier::Kind::TierII:
    case ArchTier::Kind::TierIII: return kStarWidth * 4;
    case ArchTier::Kind::ResNet9: return arch.base_width * 4;
  }
  return 0;
}

nn::Sequential make_encoder(const ArchTier& arch, int64_t in) {
  nn::Sequential seq;
  switch (arch.kind) {
    case ArchTier::Kind::TierI:
      seq->push_back(conv(in, kTierIWidth, 3, 1, 1, true));
      seq->push_back(nn::ReLU());
      break;
    case ArchTier::Kind::TierII:
    case ArchTier::Kind::TierIII: {
      seq->push_back(conv(in, kStarWidth, 7, 1, 3, false));
      seq->push_back(inorm(kStarWidth, true));
      seq->push_back(nn::ReLU());
      int64_t width = kStarWidth;
      for (int i = 0; i < 2; ++i) {
        seq->push_back(conv(width, width * 2, 4, 2, 1, false));
        seq->push_back(inorm(width * 2, true));
        seq->push_back(nn::ReLU());
        width *= 2;
      }
      break;
    }
    case ArchTier::Kind::ResNet9: {
      const int64_t w = arch.base_width;
      seq->push_back(nn::ReflectionPad2d(3));
      seq->push_back(conv(in, w, 7, 1, 0, true));
      seq->push_back(inorm(w, false));
      seq->push_back(nn::ReLU());
      int64_t width = w;
      for (int i = 0; i < 2; ++i) {
        seq->push_back(conv(width, width * 2, 3, 2, 1, true));
        seq->push_back(inorm(width * 2, false));
        seq->push_back(nn::ReLU());
        width *= 2;
      }
      break;
    }
  }
  return seq;
}

nn::Sequential make_fusion(const ArchTier& arch, int64_t embed_dim) {
  const int64_t c = encoder_out_channels(arch);
  // No normalization here: a spatially constant label term would be subtracted right back out.
  nn::Sequential seq;
  seq->push_back(conv(c + embed_dim, c, 1, 1, 0, arch.kind != ArchTier::Kind::TierII &&
                                                     arch.kind != ArchTier::Kind::TierIII));
  seq->push_back(nn::ReLU());
  return seq;
}

nn::Sequential make_body(const ArchTier& arch, bool label_guided) {
  nn::Sequential seq;
  switch (arch.kind) {
    case ArchTier::Kind::TierI: {
      // Seven conv+ReLU stages in total; the label fusion counts as one of them.
      const int stages = label_guided ? 5 : 6;
      for (int i = 0; i < stages; ++i) {
        seq->push_back(conv(kTierIWidth, kTierIWidth, 3, 1, 1, true));
        seq->push_back(nn::ReLU());
      }
      break;
    }
    case ArchTier::Kind::TierII:
      break;
    case ArchTier::Kind::TierIII:
      for (int i = 0; i < 6; ++i) seq->push_back(ResidualBlock(kStarWidth * 4, false));
      break;
    case ArchTier::Kind::ResNet9:
      for (int i = 0; i < 9; ++i) seq->push_back(ResidualBlock(arch.base_width * 4, true));
      break;
  }
  return seq;
}

nn::Sequential make_decoder(const ArchTier& arch, int64_t out_channels) {
  nn::Sequential seq;
  switch (arch.kind) {
    case ArchTier::Kind::TierI:
      seq->push_back(conv(kTierIWidth, out_channels, 1, 1, 0, true));
      break;
    case ArchTier::Kind::TierII:
    case ArchTier::Kind::TierIII: {
      int64_t width = kStarWidth * 4;
      for (int i = 0; i < 2; ++i) {
        seq->push_back(
            nn::ConvTranspose2d(nn::ConvTranspose2dOptions(width, width / 2, 4).stride(2).padding(1).bias(false)));
        seq->push_back(inorm(width / 2, true));
        seq->push_back(nn::ReLU());
        width /= 2;
      }
      seq->push_back(conv(width, out_channels, 7, 1, 3, false));
      break;
    }
    case ArchTier::Kind::ResNet9: {
      int64_t width = arch.base_width * 4;
      for (int i = 0; i < 2; ++i) {
        seq->push_back(nn::ConvTranspose2d(
            nn::ConvTranspose2dOptions(width, width / 2, 3).stride(2).padding(1).output_padding(1).bias(true)));
        seq->push_back(inorm(width / 2, false));
        seq->push_back(nn::ReLU());
        width /= 2;
      }
      seq->push_back(nn::ReflectionPad2d(3));
      seq->push_back(conv(width, out_channels, 7, 1, 0, true));
      break;
    }
  }
  seq->push_back(nn::Tanh());
  return seq;
}

}  // namespace

void GeneratorPairSpec::validate(int image_channels) const {
  if (translate_arch.kind == ArchTier::Kind::ResNet9 && translate_arch.base_width < 1) {
    throw SpecError("RESNET9 base width must be >= 1");
  }
  if (reconstruct_arch.kind == ArchTier::Kind::ResNet9 && reconstruct_arch.base_width < 1) {
    throw SpecError("RESNET9 base width must be >= 1");
  }
  if (const auto* l = std::get_if<LabelGuidanceSpec>(&guidance)) {
    if (l->num_domains < 2) throw SpecError("label guidance needs at least 2 domains");
    if (l->embed_dim < 1) throw SpecError("label embedding dimension must be positive");
  } else if (std::get<SkeletonGuidanceSpec>(guidance).channels < 1) {
    throw SpecError("skeleton guidance needs at least one channel");
  }
  if (sharing == SharingMode::Full && !(translate_arch == reconstruct_arch)) {
    throw SpecError("full sharing requires identical architectures, got " + translate_arch.to_string() + " and " +
                    reconstruct_arch.to_string());
  }
  if (sharing == SharingMode::PartialEncoder) {
    const auto in = input_channels(guidance, image_channels);
    if (encoder_signature(translate_arch, in) != encoder_signature(reconstruct_arch, in)) {
      throw SpecError("encoder sharing requires identical encoders, got " + translate_arch.to_string() + " and " +
                      reconstruct_arch.to_string());
    }
  }
}

nlohmann::json GeneratorPairSpec::to_json() const {
  nlohmann::json g;
  if (const auto* l = std::get_if<LabelGuidanceSpec>(&guidance)) {
    g = {{"kind", "domain_label"}, {"num_domains", l->num_domains}, {"embed_dim", l->embed_dim}};
  } else {
    g = {{"kind", "skeleton"}, {"channels", std::get<SkeletonGuidanceSpec>(guidance).channels}};
  }
  return {{"translate_arch", translate_arch.to_string()},
          {"reconstruct_arch", reconstruct_arch.to_string()},
          {"sharing", asymgan::to_string(sharing)},
          {"guidance", std::move(g)}};
}

GeneratorPairSpec GeneratorPairSpec::from_json(const nlohmann::json& doc) {
  try {
    GeneratorPairSpec spec;
    spec.translate_arch = ArchTier::parse(doc.at("translate_arch").get<std::string>());
    spec.reconstruct_arch = ArchTier::parse(doc.at("reconstruct_arch").get<std::string>());
    spec.sharing = parse_sharing_mode(doc.value("sharing", std::string("NONE")));
    const auto& g = doc.at("guidance");
    const auto kind = g.at("kind").get<std::string>();
    if (kind == "domain_label") {
      spec.guidance = LabelGuidanceSpec{g.at("num_domains").get<int>(), g.value("embed_dim", 64)};
    } else if (kind == "skeleton") {
      spec.guidance = SkeletonGuidanceSpec{g.value("channels", 3)};
    } else {
      throw SpecError("unknown guidance kind '" + kind + "'");
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed generator pair spec: ") + e.what());
  }
}

ResidualBlockImpl::ResidualBlockImpl(int64_t channels, bool johnson_style) {
  nn::Sequential seq;
  for (int i = 0; i < 2; ++i) {
    if (johnson_style) {
      seq->push_back(nn::ReflectionPad2d(1));
      seq->push_back(conv(channels, channels, 3, 1, 0, true));
      seq->push_back(inorm(channels, false));
    } else {
      seq->push_back(conv(channels, channels, 3, 1, 1, false));
      seq->push_back(inorm(channels, true));
    }
    if (i == 0) seq->push_back(nn::ReLU());
  }
  body_ = register_module("body", seq);
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body_->forward(x); }

GeneratorImpl::GeneratorImpl(const ArchTier& arch, const GuidanceSpec& guidance, int64_t image_channels,
                             nn::Sequential shared_encoder)
    : arch_(arch), guidance_(guidance), image_channels_(image_channels) {
  const auto in = input_channels(guidance, image_channels);
  encoder_ = register_module("encoder", shared_encoder ? shared_encoder : make_encoder(arch, in));
  const auto* label = std::get_if<LabelGuidanceSpec>(&guidance);
  if (label) {
    embedding_ = register_module("embedding", nn::Linear(label->num_domains, label->embed_dim));
    fusion_ = register_module("fusion", make_fusion(arch, label->embed_dim));
  }
  body_ = register_module("body", make_body(arch, label != nullptr));
  decoder_ = register_module("decoder", make_decoder(arch, image_channels));
  // Without normalization layers a 0.02 scale shrinks the signal at every layer.
  const bool fan_in_scaled = arch.kind == ArchTier::Kind::TierI;
  if (!shared_encoder) {
    init_weights(*encoder_, fan_in_scaled);
  }
  if (label) {
    // Embedding table at unit scale, comparable to the normalized features it is fused with.
    torch::NoGradGuard no_grad;
    embedding_->weight.normal_(0.0, 1.0);
    embedding_->bias.zero_();
    init_weights(*fusion_, fan_in_scaled);
  }
  init_weights(*body_, fan_in_scaled);
  init_weights(*decoder_, fan_in_scaled);
}

torch::Tensor GeneratorImpl::embed_label(const torch::Tensor& one_hot, int64_t h, int64_t w) {
  const auto* label = std::get_if<LabelGuidanceSpec>(&guidance_);
  if (!label) throw ValidationError("generator is not label-guided");
  if (one_hot.dim() != 2 || one_hot.size(1) != label->num_domains) {
    throw ValidationError("label batch must have shape (batch, " + std::to_string(label->num_domains) + ")");
  }
  {
    torch::NoGradGuard no_grad;
    const auto binary = ((one_hot == 0) | (one_hot == 1)).all().item<bool>();
    const auto single = (one_hot.sum(1) == 1).all().item<bool>();
    if (!binary || !single) throw ValidationError("label rows must be one-hot vectors");
  }
  auto e = embedding_->forward(one_hot.to(embedding_->weight.dtype()));
  return e.view({e.size(0), e.size(1), 1, 1}).expand({e.size(0), e.size(1), h, w});
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x, const Guidance& guidance) {
  if (x.dim() != 4 || x.size(1) != image_channels_) {
    throw ShapeError("generator expects (batch, " + std::to_string(image_channels_) + ", h, w) input");
  }
  const auto factor = arch_.downsampling_factor();
  if (x.size(2) % factor != 0 || x.size(3) % factor != 0) {
    throw ShapeError("spatial size must be divisible by " + std::to_string(factor) + " for " + arch_.to_string());
  }
  if (std::holds_alternative<LabelGuidanceSpec>(guidance_)) {
    const auto* g = std::get_if<LabelGuidance>(&guidance);
    if (!g) throw ValidationError("label-guided generator received skeleton guidance");
    if (g->one_hot.size(0) != x.size(0)) throw ValidationError("label batch size differs from image batch size");
    auto features = encoder_->forward(x);
    auto labels = embed_label(g->one_hot, features.size(2), features.size(3)).to(features.dtype());
    auto fused = fusion_->forward(torch::cat({features, labels}, 1));
    return decoder_->forward(body_->is_empty() ? fused : body_->forward(fused));
  }
  const auto* g = std::get_if<SkeletonGuidance>(&guidance);
  if (!g) throw ValidationError("skeleton-guided generator received label guidance");
  const auto& maps = g->maps;
  const auto expected = std::get<SkeletonGuidanceSpec>(guidance_).channels;
  if (maps.dim() != 4 || maps.size(1) != expected) {
    throw ValidationError("skeleton guidance must have " + std::to_string(expected) + " channels");
  }
  if (maps.size(0) != x.size(0) || maps.size(2) != x.size(2) || maps.size(3) != x.size(3)) {
    throw ShapeError("skeleton guidance dims differ from the input image");
  }
  auto features = encoder_->forward(torch::cat({x, maps.to(x.dtype())}, 1));
  return decoder_->forward(body_->is_empty() ? features : body_->forward(features));
}

namespace {

std::vector<torch::Tensor> unique_parameters(const std::vector<torch::Tensor>& params) {
  std::unordered_set<const void*> seen;
  std::vector<torch::Tensor> out;
  for (const auto& p : params) {
    if (seen.insert(p.unsafeGetTensorImpl()).second) out.push_back(p);
  }
  return out;
}

}  // namespace

std::vector<torch::Tensor> GeneratorPair::translate_parameters() const {
  return unique_parameters(translate->parameters());
}

std::vector<torch::Tensor> GeneratorPair::reconstruct_parameters() const {
  std::unordered_set<const void*> owned_by_translate;
  for (const auto& p : translate->parameters()) owned_by_translate.insert(p.unsafeGetTensorImpl());
  std::vector<torch::Tensor> out;
  for (const auto& p : unique_parameters(reconstruct->parameters())) {
    if (!owned_by_translate.contains(p.unsafeGetTensorImpl())) out.push_back(p);
  }
  return out;
}

GeneratorPair build_pair(const GeneratorPairSpec& spec, int image_channels, int image_size) {
  spec.validate(image_channels);
  for (const auto& arch : {spec.translate_arch, spec.reconstruct_arch}) {
    if (image_size < 1 || image_size % arch.downsampling_factor() != 0) {
      throw ShapeError("image size " + std::to_string(image_size) + " is not divisible by " +
                       std::to_string(arch.downsampling_factor()) + " (" + arch.to_string() + ")");
    }
  }
  GeneratorPair pair;
  pair.spec = spec;
  pair.translate = Generator(spec.translate_arch, spec.guidance, image_channels);
  switch (spec.sharing) {
    case SharingMode::Full:
      pair.reconstruct = pair.translate;
      break;
    case SharingMode::PartialEncoder:
      pair.reconstruct = Generator(spec.reconstruct_arch, spec.guidance, image_channels, pair.translate->encoder());
      break;
    case SharingMode::None:
      pair.reconstruct = Generator(spec.reconstruct_arch, spec.guidance, image_channels);
      break;
  }
  return pair;
}

int64_t count_parameters(const std::vector<torch::Tensor>& params) {
  int64_t total = 0;
  for (const auto& p : unique_parameters(params)) total += p.numel();
  return total;
}

int64_t count_parameters(const torch::nn::Module& module) { return count_parameters(module.parameters()); }

int64_t count_parameters(const GeneratorPair& pair) {
  auto params = pair.translate->parameters();
  const auto more = pair.reconstruct->parameters();
  params.insert(params.end(), more.begin(), more.end());
  return count_parameters(params);
}

void init_weights(torch::nn::Module& module, bool fan_in_scaled) {
  torch::NoGradGuard no_grad;
  auto draw = [fan_in_scaled](torch::Tensor& w, int64_t fan_in) {
    w.normal_(0.0, fan_in_scaled ? std::sqrt(2.0 / static_cast<double>(fan_in)) : 0.02);
  };
  module.apply([&draw](torch::nn::Module& m) {
    if (auto* c = m.as<nn::Conv2d>()) {
      draw(c->weight, c->weight[0].numel());
      if (c->bias.defined()) c->bias.zero_();
    } else if (auto* t = m.as<nn::ConvTranspose2d>()) {
      draw(t->weight, t->weight.size(0) * t->weight[0][0].numel());
      if (t->bias.defined()) t->bias.zero_();
    } else if (auto* l = m.as<nn::Linear>()) {
      draw(l->weight, l->weight.size(1));
      if (l->bias.defined()) l->bias.zero_();
    } else if (auto* n = m.as<nn::InstanceNorm2d>()) {
      if (n->weight.defined()) n->weight.normal_(1.0, 0.02);
      if (n->bias.defined()) n->bias.zero_();
    }
  });
}

}  // namespace asymgan
