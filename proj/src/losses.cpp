#include "asymgan/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asymgan/errors.hpp"

namespace F = torch::nn::functional;

namespace asymgan {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  if (!a.sizes().equals(b.sizes())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
}

void require_image(const torch::Tensor& a, const char* op) {
  if (a.dim() != 4) throw ShapeError(std::string(op) + ": expects (batch, channels, height, width)");
}

torch::Tensor per_channel_l1_sum(const torch::Tensor& a, const torch::Tensor& b, const char* op) {
  require_same_shape(a, b, op);
  require_image(a, op);
  if (a.size(1) != 3) throw ShapeError(std::string(op) + ": expects 3 colour channels");
  auto total = torch::zeros({}, a.options());
  for (int64_t c = 0; c < 3; ++c) total = total + (a.select(1, c) - b.select(1, c)).abs().mean();
  return total;
}

struct SsimMaps {
  torch::Tensor luminance;
  torch::Tensor contrast_structure;
};

SsimMaps ssim_maps(const torch::Tensor& a, const torch::Tensor& b, const SsimConfig& cfg) {
  const auto channels = a.size(1);
  const int size = static_cast<int>(std::min<int64_t>({cfg.window_size, a.size(2), a.size(3)}));
  auto window = gaussian_window(size, cfg.sigma, a.scalar_type()).expand({channels, 1, size, size}).contiguous();
  auto filter = [&](const torch::Tensor& t) { return F::conv2d(t, window, F::Conv2dFuncOptions().groups(channels)); };
  auto mu_a = filter(a);
  auto mu_b = filter(b);
  auto var_a = filter(a * a) - mu_a * mu_a;
  auto var_b = filter(b * b) - mu_b * mu_b;
  auto cov = filter(a * b) - mu_a * mu_b;
  const double c1 = cfg.c1();
  const double c2 = cfg.c2();
  return {(2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1), (2.0 * cov + c2) / (var_a + var_b + c2)};
}

}  // namespace

void SsimConfig::validate() const {
  if (window_size < 1 || sigma <= 0.0) throw ValidationError("SSIM window must be positive");
  if (c1() <= 0.0 || c2() <= 0.0 || c3() <= 0.0) throw ValidationError("SSIM constants must be positive");
  const double sum = std::accumulate(scale_weights.begin(), scale_weights.end(), 0.0);
  if (std::fabs(sum - 1.0) > 1e-6) throw ValidationError("MS-SSIM scale weights must sum to 1");
}

int SsimConfig::feasible_scales(int64_t min_side) const {
  int scales = 1;
  for (int m = static_cast<int>(scale_weights.size()); m >= 1; --m) {
    if (min_side >= static_cast<int64_t>(window_size) << (m - 1)) {
      scales = m;
      break;
    }
  }
  return scales;
}

std::vector<double> SsimConfig::weights_for(int scales) const {
  std::vector<double> w(scale_weights.begin(), scale_weights.begin() + scales);
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= sum;
  return w;
}

torch::Tensor gaussian_window(int size, double sigma, torch::ScalarType dtype) {
  auto coords = torch::arange(size, torch::kDouble) - (size - 1) / 2.0;
  auto g = torch::exp(-(coords * coords) / (2.0 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g).to(dtype);
}

torch::Tensor cycle_l1(const torch::Tensor& x_hat, const torch::Tensor& x) {
  require_same_shape(x_hat, x, "cycle_l1");
  return (x_hat - x).abs().mean();
}

torch::Tensor color_cycle(const torch::Tensor& x_hat, const torch::Tensor& x) {
  return per_channel_l1_sum(x_hat, x, "color_cycle");
}

torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimConfig& cfg) {
  require_same_shape(a, b, "ssim");
  require_image(a, "ssim");
  const auto maps = ssim_maps(a, b, cfg);
  return (maps.luminance * maps.contrast_structure).mean();
}

torch::Tensor ms_ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimConfig& cfg) {
  require_same_shape(a, b, "ms_ssim");
  require_image(a, "ms_ssim");
  const int scales = cfg.feasible_scales(std::min(a.size(2), a.size(3)));
  const auto weights = cfg.weights_for(scales);
  auto value = torch::ones({}, a.options());
  auto cur_a = a;
  auto cur_b = b;
  for (int j = 0; j < scales; ++j) {
    const auto maps = ssim_maps(cur_a, cur_b, cfg);
    if (j + 1 < scales) {
      value = value * maps.contrast_structure.mean().clamp_min(cfg.floor).pow(weights[j]);
      const auto pool = F::AvgPool2dFuncOptions(2).stride(2);
      cur_a = F::avg_pool2d(cur_a, pool);
      cur_b = F::avg_pool2d(cur_b, pool);
    } else {
      value = value * (maps.luminance * maps.contrast_structure).mean().clamp_min(cfg.floor).pow(weights[j]);
    }
  }
  return value;
}

torch::Tensor msssim_loss(const torch::Tensor& a, const torch::Tensor& b, const SsimConfig& cfg) {
  return 1.0 - ms_ssim(a, b, cfg);
}

torch::Tensor lsgan_d(const torch::Tensor& src_real, const torch::Tensor& src_fake) {
  return (src_real - 1.0).pow(2).mean() + src_fake.pow(2).mean();
}

torch::Tensor lsgan_g(const torch::Tensor& src_fake) { return (src_fake - 1.0).pow(2).mean(); }

torch::Tensor domain_cls(const torch::Tensor& logits, const torch::Tensor& target) {
  if (logits.dim() != 2 || target.dim() != 1 || target.size(0) != logits.size(0)) {
    throw ShapeError("domain_cls: expects (batch, m) logits and (batch) targets");
  }
  auto log_probs = torch::log_softmax(logits, 1);
  return -log_probs.gather(1, target.to(torch::kLong).unsqueeze(1)).mean();
}

torch::Tensor identity_unsup(const torch::Tensor& g_r_output, const torch::Tensor& x) {
  require_same_shape(g_r_output, x, "identity_unsup");
  return (g_r_output - x).abs().mean();
}

torch::Tensor identity_sup(const torch::Tensor& gt_xx, const torch::Tensor& x, const torch::Tensor& gt_yy,
                           const torch::Tensor& y) {
  require_same_shape(gt_xx, x, "identity_sup");
  require_same_shape(gt_yy, y, "identity_sup");
  return (gt_xx - x).abs().mean() + (gt_yy - y).abs().mean();
}

torch::Tensor color_paired(const torch::Tensor& y_prime, const torch::Tensor& y) {
  return per_channel_l1_sum(y_prime, y, "color_paired");
}

torch::Tensor perceptual(const torch::Tensor& y_prime, const torch::Tensor& y, const FeatureExtractor& extractor) {
  require_same_shape(y_prime, y, "perceptual");
  extractor.check_input(y_prime);
  const auto fa = extractor.layer_features(y_prime);
  const auto fb = extractor.layer_features(y);
  const auto weights = extractor.layer_weights();
  if (weights.size() != fa.size()) throw ValidationError("extractor declares a weight per layer");
  auto total = torch::zeros({}, y_prime.options());
  for (std::size_t i = 0; i < fa.size(); ++i) total = total + weights[i] * (fa[i] - fb[i]).abs().mean();
  return total;
}

torch::Tensor total_variation(const torch::Tensor& y_prime) {
  require_image(y_prime, "total_variation");
  const auto h = y_prime.size(2);
  const auto w = y_prime.size(3);
  auto dx = y_prime.narrow(3, 1, w - 1) - y_prime.narrow(3, 0, w - 1);
  auto dy = y_prime.narrow(2, 1, h - 1) - y_prime.narrow(2, 0, h - 1);
  return dx.abs().sum() + dy.abs().sum();
}

void LossWeights::validate() const {
  const auto& u = unsupervised;
  const auto& s = supervised;
  for (double v : {u.lambda_c, u.lambda_cyc, u.lambda_m, u.lambda_id, s.lambda_c, s.lambda_cyc, s.lambda_id,
                   s.lambda_vgg, s.lambda_tv}) {
    if (!(v >= 0.0)) throw ValidationError("loss weights must be non-negative");
  }
}

}  // namespace asymgan
