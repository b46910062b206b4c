#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "asymgan/features.hpp"

namespace asymgan {

/// 10*log10(peak^2 / MSE). Returns +infinity when the images are identical.
double psnr(const torch::Tensor& a, const torch::Tensor& b, double peak);

struct GaussianSummary {
  torch::Tensor mean;        // (d) double
  torch::Tensor covariance;  // (d, d) double
  int64_t count = 0;

  int64_t dim() const { return mean.size(0); }
};

/// Sample mean and unbiased covariance of (n, d) features.
GaussianSummary fit_gaussian(const torch::Tensor& features);

/// |mu_p - mu_q|^2 + Tr(S_p + S_q - 2 (S_p S_q)^(1/2)), clamped at 0.
double frechet_distance(const GaussianSummary& p, const GaussianSummary& q);

/// Fits both feature sets with `extractor` and returns their Frechet distance.
double frechet_distance(const torch::Tensor& real, const torch::Tensor& generated, const FeatureExtractor& extractor);

/// exp(E_x KL(p(y|x) || p(y))) per split; returns (mean, std) over splits.
std::pair<double, double> inception_style_score(const torch::Tensor& probs, int splits = 1);

struct ClassifierConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// conv(3->16, s2) relu conv(16->32, s2) relu global-mean linear(32->m)
class DomainClassifierImpl : public torch::nn::Module {
 public:
  DomainClassifierImpl(int64_t num_domains, int64_t channels = 3);
  torch::Tensor forward(const torch::Tensor& x);
  int64_t num_domains() const noexcept { return num_domains_; }

 private:
  int64_t num_domains_;
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(DomainClassifier);

DomainClassifier train_domain_classifier(const torch::Tensor& images, const torch::Tensor& labels,
                                         int64_t num_domains, const ClassifierConfig& cfg = {});

/// Softmax posteriors, (n, m).
torch::Tensor classifier_probabilities(DomainClassifier& classifier, const torch::Tensor& images);

struct AccuracyReport {
  double top1 = 0.0;
  std::optional<double> top5;  // present when m > 5
  int64_t train_count = 0;
  int64_t test_count = 0;
};

/// Trains a DomainClassifier on real images and scores it on generated images with their intended labels.
AccuracyReport classification_accuracy(const torch::Tensor& real_images, const torch::Tensor& real_labels,
                                       const torch::Tensor& generated, const torch::Tensor& generated_labels,
                                       int64_t num_domains, const ClassifierConfig& cfg = {});

AccuracyReport score_classifier(DomainClassifier& classifier, const torch::Tensor& images, const torch::Tensor& labels);

}  // namespace asymgan
