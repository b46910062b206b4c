#include "asymgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "asymgan/errors.hpp"

namespace F = torch::nn::functional;

namespace asymgan {

double psnr(const torch::Tensor& a, const torch::Tensor& b, double peak) {
  if (!a.sizes().equals(b.sizes())) throw ShapeError("psnr inputs differ in shape");
  if (!(peak > 0.0)) throw ValidationError("psnr peak must be positive");
  const double mse = (a.to(torch::kDouble) - b.to(torch::kDouble)).pow(2).mean().item<double>();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

GaussianSummary fit_gaussian(const torch::Tensor& features) {
  if (features.dim() != 2) throw ShapeError("fit_gaussian expects (n, d) features");
  const int64_t n = features.size(0);
  if (n < 2) throw ValidationError("fit_gaussian needs at least 2 samples, got " + std::to_string(n));
  auto f = features.to(torch::kDouble);
  auto mean = f.mean(0);
  auto centered = f - mean;
  auto cov = centered.t().matmul(centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.t());
  return {mean, cov, n};
}

namespace {

// Symmetric PSD square root by eigendecomposition with eigenvalues clamped at 0.
torch::Tensor psd_sqrt(const torch::Tensor& m) {
  auto [values, vectors] = torch::linalg_eigh(0.5 * (m + m.t()));
  return vectors.matmul(torch::diag(values.clamp_min(0.0).sqrt())).matmul(vectors.t());
}

// Tr((S_p S_q)^(1/2)) through the similar matrix A S_q A with A = S_p^(1/2).
double trace_sqrt_product(const torch::Tensor& sp, const torch::Tensor& sq) {
  auto a = psd_sqrt(sp);
  auto [values, vectors] = torch::linalg_eigh(a.matmul(sq).matmul(a));
  if (!torch::isfinite(values).all().item<bool>()) throw NumericError("non-finite eigenvalues");
  return values.clamp_min(0.0).sqrt().sum().item<double>();
}

}  // namespace

double frechet_distance(const GaussianSummary& p, const GaussianSummary& q) {
  if (p.dim() != q.dim()) throw ShapeError("frechet_distance summaries differ in dimension");
  auto sp = p.covariance.to(torch::kDouble);
  auto sq = q.covariance.to(torch::kDouble);
  double tr_sqrt = 0.0;
  try {
    tr_sqrt = trace_sqrt_product(sp, sq);
  } catch (const std::exception&) {
    auto eps = 1e-6 * torch::eye(p.dim(), torch::kDouble);
    try {
      tr_sqrt = trace_sqrt_product(sp + eps, sq + eps);
    } catch (const std::exception& e) {
      throw NumericError(std::string("matrix square root failed after regularization: ") + e.what());
    }
  }
  const double shift = (p.mean.to(torch::kDouble) - q.mean.to(torch::kDouble)).pow(2).sum().item<double>();
  const double value = shift + sp.trace().item<double>() + sq.trace().item<double>() - 2.0 * tr_sqrt;
  if (!std::isfinite(value)) throw NumericError("frechet distance is not finite");
  return std::max(0.0, value);
}

double frechet_distance(const torch::Tensor& real, const torch::Tensor& generated, const FeatureExtractor& extractor) {
  torch::NoGradGuard no_grad;
  return frechet_distance(fit_gaussian(extractor.embed(real.to(torch::kDouble))),
                          fit_gaussian(extractor.embed(generated.to(torch::kDouble))));
}

std::pair<double, double> inception_style_score(const torch::Tensor& probs, int splits) {
  if (probs.dim() != 2) throw ShapeError("inception_style_score expects (n, k) probabilities");
  if (splits < 1 || splits > probs.size(0)) throw ValidationError("splits must lie in [1, n]");
  auto p = probs.to(torch::kDouble);
  if ((p < 0).any().item<bool>() || ((p.sum(1) - 1.0).abs() > 1e-4).any().item<bool>()) {
    throw ValidationError("classifier outputs are not probability rows");
  }
  const int64_t n = p.size(0);
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const int64_t begin = n * s / splits;
    const int64_t end = n * (s + 1) / splits;
    auto part = p.slice(0, begin, end);
    auto marginal = part.mean(0, true);
    // 0 * log 0 contributes nothing.
    auto kl = torch::where(part > 0, part * (part.clamp_min(1e-300).log() - marginal.clamp_min(1e-300).log()),
                           torch::zeros_like(part));
    scores.push_back(std::exp(kl.sum(1).mean().item<double>()));
  }
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  return {mean, std::sqrt(var / scores.size())};
}

DomainClassifierImpl::DomainClassifierImpl(int64_t num_domains, int64_t channels) : num_domains_(num_domains) {
  conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 16, 3).stride(2).padding(1)));
  conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(16, 32, 3).stride(2).padding(1)));
  head = register_module("head", torch::nn::Linear(32, num_domains));
}

torch::Tensor DomainClassifierImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(conv1(x));
  h = torch::relu(conv2(h));
  return head(h.mean({2, 3}));
}

DomainClassifier train_domain_classifier(const torch::Tensor& images, const torch::Tensor& labels,
                                         int64_t num_domains, const ClassifierConfig& cfg) {
  if (num_domains < 2) throw ValidationError("classification needs at least 2 domains");
  if (images.dim() != 4 || labels.dim() != 1 || images.size(0) != labels.size(0)) {
    throw ShapeError("classifier training expects (n, c, h, w) images with n labels");
  }
  torch::AutoGradMode enable_grad(true);
  torch::manual_seed(cfg.seed);
  DomainClassifier net(num_domains, images.size(1));
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(cfg.learning_rate));
  auto x = images.to(torch::kFloat);
  auto y = labels.to(torch::kLong);
  std::vector<int64_t> order(static_cast<std::size_t>(x.size(0)));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const auto e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      auto idx = torch::tensor(std::vector<int64_t>(order.begin() + static_cast<std::ptrdiff_t>(b),
                                                    order.begin() + static_cast<std::ptrdiff_t>(e)));
      opt.zero_grad();
      auto loss = F::cross_entropy(net->forward(x.index_select(0, idx)), y.index_select(0, idx));
      loss.backward();
      opt.step();
    }
  }
  net->eval();
  return net;
}

torch::Tensor classifier_probabilities(DomainClassifier& classifier, const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  return torch::softmax(classifier->forward(images.to(torch::kFloat)), 1).to(torch::kDouble);
}

AccuracyReport score_classifier(DomainClassifier& classifier, const torch::Tensor& images, const torch::Tensor& labels) {
  torch::NoGradGuard no_grad;
  auto logits = classifier->forward(images.to(torch::kFloat));
  auto y = labels.to(torch::kLong);
  AccuracyReport report;
  report.test_count = y.numel();
  report.top1 = (logits.argmax(1) == y).to(torch::kDouble).mean().item<double>();
  if (classifier->num_domains() > 5) {
    auto top = std::get<1>(logits.topk(5, 1));
    report.top5 = (top == y.unsqueeze(1)).any(1).to(torch::kDouble).mean().item<double>();
  }
  return report;
}

AccuracyReport classification_accuracy(const torch::Tensor& real_images, const torch::Tensor& real_labels,
                                       const torch::Tensor& generated, const torch::Tensor& generated_labels,
                                       int64_t num_domains, const ClassifierConfig& cfg) {
  auto net = train_domain_classifier(real_images, real_labels, num_domains, cfg);
  auto report = score_classifier(net, generated, generated_labels);
  report.train_count = real_images.size(0);
  return report;
}

}  // namespace asymgan
