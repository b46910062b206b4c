#include "asymgan/features.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "asymgan/errors.hpp"

namespace F = torch::nn::functional;

namespace asymgan {

void FeatureExtractor::check_input(const torch::Tensor& x) const {
  if (x.dim() != 4 || x.size(1) != input_channels()) {
    throw ShapeError("extractor '" + identity() + "' expects (batch, " + std::to_string(input_channels()) +
                     ", h, w) input");
  }
  if (x.size(2) < min_input_size() || x.size(3) < min_input_size()) {
    throw ShapeError("extractor '" + identity() + "' needs spatial size >= " + std::to_string(min_input_size()));
  }
}

RandomConvExtractor::RandomConvExtractor(std::uint64_t seed, int64_t channels) : seed_(seed), channels_(channels) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int64_t in = channels;
  for (int64_t out : {16, 32, 64}) {
    const double scale = std::sqrt(2.0 / static_cast<double>(in * 9));
    weights_.push_back(torch::randn({out, in, 3, 3}, gen, torch::kDouble) * scale);
    biases_.push_back(torch::randn({out}, gen, torch::kDouble) * 0.1);
    in = out;
  }
}

std::vector<torch::Tensor> RandomConvExtractor::layer_features(const torch::Tensor& x) const {
  check_input(x);
  std::vector<torch::Tensor> out;
  auto h = x;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    h = torch::tanh(F::conv2d(h, weights_[i].to(x.dtype()),
                              F::Conv2dFuncOptions().bias(biases_[i].to(x.dtype())).stride(kStrides[i]).padding(1)));
    out.push_back(h);
  }
  return out;
}

std::vector<double> RandomConvExtractor::layer_weights() const { return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; }

torch::Tensor RandomConvExtractor::embed(const torch::Tensor& x) const {
  std::vector<torch::Tensor> pooled;
  for (const auto& f : layer_features(x)) pooled.push_back(f.mean({2, 3}));
  return torch::cat(pooled, 1);
}

int64_t RandomConvExtractor::feature_dim() const { return 16 + 32 + 64; }

std::string RandomConvExtractor::identity() const { return "random_conv(seed=" + std::to_string(seed_) + ")"; }

}  // namespace asymgan
