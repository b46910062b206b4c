#include "asymgan/discriminators.hpp"

#include "asymgan/errors.hpp"
#include "asymgan/generators.hpp"

namespace nn = torch::nn;

namespace asymgan {

void DiscriminatorSpec::validate() const {
  if (const auto* m = std::get_if<MultidomainKind>(&kind)) {
    if (m->num_domains < 2) throw SpecError("multidomain discriminator needs at least 2 domains");
    if (m->image_channels < 1) throw SpecError("image channels must be positive");
  } else {
    const auto& t = std::get<TripletKind>(kind);
    if (t.image_channels < 1 || t.skeleton_channels < 1) throw SpecError("triplet channels must be positive");
  }
  if (base_width < 1) throw SpecError("discriminator base width must be positive");
  if (n_layers < 0 || n_layers > 8) throw SpecError("discriminator n_layers must be in [0, 8]");
}

int DiscriminatorSpec::input_channels() const {
  if (const auto* m = std::get_if<MultidomainKind>(&kind)) return m->image_channels;
  const auto& t = std::get<TripletKind>(kind);
  return 2 * t.image_channels + t.skeleton_channels;
}

nlohmann::json DiscriminatorSpec::to_json() const {
  nlohmann::json k;
  if (const auto* m = std::get_if<MultidomainKind>(&kind)) {
    k = {{"kind", "multidomain"}, {"num_domains", m->num_domains}, {"image_channels", m->image_channels}};
  } else {
    const auto& t = std::get<TripletKind>(kind);
    k = {{"kind", "triplet"}, {"image_channels", t.image_channels}, {"skeleton_channels", t.skeleton_channels}};
  }
  return {{"kind", std::move(k)}, {"base_width", base_width}, {"n_layers", n_layers}, {"dual", dual}};
}

DiscriminatorSpec DiscriminatorSpec::from_json(const nlohmann::json& doc) {
  try {
    DiscriminatorSpec spec;
    // The kind may be nested ({"kind": {"kind": ...}}) or written inline next to the other fields.
    const auto& k = doc.at("kind").is_string() ? doc : doc.at("kind");
    const auto name = k.at("kind").get<std::string>();
    if (name == "multidomain") {
      spec.kind = MultidomainKind{k.at("num_domains").get<int>(), k.value("image_channels", 3)};
    } else if (name == "triplet") {
      spec.kind = TripletKind{k.value("image_channels", 3), k.value("skeleton_channels", 3)};
    } else {
      throw SpecError("unknown discriminator kind '" + name + "'");
    }
    spec.base_width = doc.value("base_width", 64);
    spec.n_layers = doc.value("n_layers", 3);
    spec.dual = doc.value("dual", false);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed discriminator spec: ") + e.what());
  }
}

int receptive_field(std::span<const ConvGeometry> layers) {
  int r = 1;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) r = (r - 1) * it->stride + it->kernel;
  return r;
}

std::vector<ConvGeometry> patch_layers(const DiscriminatorSpec& spec) {
  std::vector<ConvGeometry> layers(static_cast<std::size_t>(spec.n_layers), ConvGeometry{4, 2});
  layers.push_back({4, 1});
  layers.push_back({4, 1});
  return layers;
}

int receptive_field(const DiscriminatorSpec& spec) { return receptive_field(patch_layers(spec)); }

namespace {

int64_t trunk_size(const DiscriminatorSpec& spec, int64_t image_size) {
  return image_size / (int64_t{1} << spec.n_layers) - 1;
}

void check_image_size(const DiscriminatorSpec& spec, int64_t image_size) {
  const int64_t stride = int64_t{1} << spec.n_layers;
  if (image_size % stride != 0 || image_size / stride < 3) {
    throw SpecError("image size " + std::to_string(image_size) + " incompatible with " +
                    std::to_string(spec.n_layers) + " stride-2 layers (needs a multiple of " + std::to_string(stride) +
                    " that is at least " + std::to_string(3 * stride) + ")");
  }
}

int64_t width_at(const DiscriminatorSpec& spec, int layer) {
  return static_cast<int64_t>(spec.base_width) * std::min<int64_t>(int64_t{1} << layer, 8);
}

}  // namespace

int64_t src_map_size(const DiscriminatorSpec& spec, int64_t image_size) { return trunk_size(spec, image_size) - 1; }

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const DiscriminatorSpec& spec, int64_t image_size) {
  nn::Sequential trunk;
  int64_t in = spec.input_channels();
  // The label-conditioned kind runs without normalization, as in multi-domain translation critics.
  const bool normed = std::holds_alternative<TripletKind>(spec.kind);
  for (int i = 0; i <= spec.n_layers; ++i) {
    const bool last = i == spec.n_layers;
    const int64_t out = width_at(spec, i);
    trunk->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(last ? 1 : 2).padding(1).bias(i == 0 || !normed)));
    if (i > 0 && normed) trunk->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
    trunk->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  trunk_ = register_module("trunk", trunk);
  src_head_ = register_module("src_head", nn::Conv2d(nn::Conv2dOptions(in, 1, 4).stride(1).padding(1)));
  if (const auto* m = std::get_if<MultidomainKind>(&spec.kind)) {
    const auto k = trunk_size(spec, image_size);
    cls_head_ = register_module("cls_head", nn::Conv2d(nn::Conv2dOptions(in, m->num_domains, k).bias(false)));
  }
  init_weights(*this);
}

DiscriminatorOutput PatchDiscriminatorImpl::forward(const torch::Tensor& x) {
  auto h = trunk_->forward(x);
  DiscriminatorOutput out{src_head_->forward(h), std::nullopt};
  if (cls_head_) out.class_logits = cls_head_->forward(h).flatten(1);
  return out;
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorSpec& spec, int64_t image_size)
    : spec_(spec), image_size_(image_size) {
  spec.validate();
  check_image_size(spec, image_size);
  if (spec.dual) check_image_size(spec, image_size / 2);
  scales_.push_back(register_module("scale0", PatchDiscriminator(spec, image_size)));
  if (spec.dual) scales_.push_back(register_module("scale1", PatchDiscriminator(spec, image_size / 2)));
}

std::vector<DiscriminatorOutput> DiscriminatorImpl::run(const torch::Tensor& input) {
  if (input.dim() != 4 || input.size(1) != spec_.input_channels() || input.size(2) != image_size_ ||
      input.size(3) != image_size_) {
    throw ShapeError("discriminator expects (batch, " + std::to_string(spec_.input_channels()) + ", " +
                     std::to_string(image_size_) + ", " + std::to_string(image_size_) + ") input");
  }
  std::vector<DiscriminatorOutput> outs;
  outs.push_back(scales_[0]->forward(input));
  if (scales_.size() > 1) {
    outs.push_back(scales_[1]->forward(torch::nn::functional::avg_pool2d(
        input, torch::nn::functional::AvgPool2dFuncOptions(2).stride(2))));
  }
  return outs;
}

std::vector<DiscriminatorOutput> DiscriminatorImpl::forward_multidomain(const torch::Tensor& x) {
  if (!std::holds_alternative<MultidomainKind>(spec_.kind)) {
    throw SpecError("forward_multidomain called on a triplet discriminator");
  }
  return run(x);
}

std::vector<DiscriminatorOutput> DiscriminatorImpl::forward_triplet(const torch::Tensor& x, const torch::Tensor& l,
                                                                    const torch::Tensor& y) {
  const auto* t = std::get_if<TripletKind>(&spec_.kind);
  if (!t) throw SpecError("forward_triplet called on a multidomain discriminator");
  for (const auto* part : {&x, &l, &y}) {
    if (part->dim() != 4 || part->size(0) != x.size(0) || part->size(2) != x.size(2) || part->size(3) != x.size(3)) {
      throw ShapeError("triplet parts must share batch and spatial dims");
    }
  }
  if (x.size(1) != t->image_channels || y.size(1) != t->image_channels || l.size(1) != t->skeleton_channels) {
    throw ShapeError("triplet channel counts do not match the discriminator spec");
  }
  return run(torch::cat({x, l, y}, 1));
}

std::vector<DiscriminatorOutput> DiscriminatorImpl::forward_stacked(const torch::Tensor& xly) { return run(xly); }

Discriminator build_discriminator(const DiscriminatorSpec& spec, int64_t image_size) {
  return Discriminator(spec, image_size);
}

}  // namespace asymgan
