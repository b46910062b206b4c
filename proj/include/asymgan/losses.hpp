#pragma once

#include <torch/torch.h>

#include <array>

#include <nlohmann/json.hpp>

#include "asymgan/features.hpp"

namespace asymgan {

/// SSIM / MS-SSIM constants: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// C3 = C2 / 2 and unit exponents, so contrast and structure fold into one term.
struct SsimConfig {
  int window_size = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double value_range = 2.0;
  std::array<double, 5> scale_weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  /// Floor applied to per-scale terms before fractional powers.
  double floor = 1e-6;

  double c1() const { return (k1 * value_range) * (k1 * value_range); }
  double c2() const { return (k2 * value_range) * (k2 * value_range); }
  double c3() const { return c2() / 2.0; }

  void validate() const;

  /// Number of scales usable for an image whose shorter side is `min_side`: the largest M <= 5 with
  /// min_side >= window_size * 2^(M-1), at least 1.
  int feasible_scales(int64_t min_side) const;
  /// The first `scales` weights, renormalized to sum to one.
  std::vector<double> weights_for(int scales) const;
};

/// Normalized 2-D Gaussian of side `size`.
torch::Tensor gaussian_window(int size, double sigma, torch::ScalarType dtype = torch::kFloat);

// Every image loss takes equally shaped tensors and reduces by arithmetic mean unless stated.
// Shape mismatches throw ShapeError.

torch::Tensor cycle_l1(const torch::Tensor& x_hat, const torch::Tensor& x);
/// Sum over the red, green and blue planes of the per-plane mean absolute error.
torch::Tensor color_cycle(const torch::Tensor& x_hat, const torch::Tensor& x);
torch::Tensor ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimConfig& cfg = {});
torch::Tensor ms_ssim(const torch::Tensor& a, const torch::Tensor& b, const SsimConfig& cfg = {});
/// 1 - ms_ssim, the minimized form.
torch::Tensor msssim_loss(const torch::Tensor& a, const torch::Tensor& b, const SsimConfig& cfg = {});

/// mean((real - 1)^2) + mean(fake^2)
torch::Tensor lsgan_d(const torch::Tensor& src_real, const torch::Tensor& src_fake);
/// mean((fake - 1)^2)
torch::Tensor lsgan_g(const torch::Tensor& src_fake);

/// Mean cross-entropy of (batch, m) logits against integer targets.
torch::Tensor domain_cls(const torch::Tensor& logits, const torch::Tensor& target);

torch::Tensor identity_unsup(const torch::Tensor& g_r_output, const torch::Tensor& x);
torch::Tensor identity_sup(const torch::Tensor& gt_xx, const torch::Tensor& x, const torch::Tensor& gt_yy,
                           const torch::Tensor& y);
torch::Tensor color_paired(const torch::Tensor& y_prime, const torch::Tensor& y);
/// Sum over the extractor's layers of weight * mean |phi(y') - phi(y)|.
torch::Tensor perceptual(const torch::Tensor& y_prime, const torch::Tensor& y, const FeatureExtractor& extractor);
/// Anisotropic total variation, summed over every element.
torch::Tensor total_variation(const torch::Tensor& y_prime);

struct UnsupervisedWeights {
  double lambda_c = 1.0;
  double lambda_cyc = 10.0;
  double lambda_m = 1.0;
  double lambda_id = 0.5;
};

struct SupervisedWeights {
  double lambda_c = 800.0;
  double lambda_cyc = 0.1;
  double lambda_id = 0.01;
  double lambda_vgg = 1000.0;
  double lambda_tv = 1e-6;
};

struct LossWeights {
  UnsupervisedWeights unsupervised;
  SupervisedWeights supervised;

  /// Throws ValidationError if any coefficient is negative.
  void validate() const;
};

template <class T>
struct UnsupervisedTerms {
  T lsgan;
  T cls;
  T colorcyc;
  T msssim_loss;  // already in 1 - ms_ssim form
  T id;
};

template <class T>
struct SupervisedTerms {
  T cgan;
  T color;
  T cyc;
  T id;
  T vgg;
  T tv;
};

template <class T>
T full_unsup(const UnsupervisedTerms<T>& t, const UnsupervisedWeights& w) {
  return t.lsgan + t.cls * w.lambda_c + t.colorcyc * w.lambda_cyc + t.msssim_loss * w.lambda_m + t.id * w.lambda_id;
}

template <class T>
T full_sup(const SupervisedTerms<T>& t, const SupervisedWeights& w) {
  return t.cgan + t.color * w.lambda_c + t.cyc * w.lambda_cyc + t.id * w.lambda_id + t.vgg * w.lambda_vgg +
         t.tv * w.lambda_tv;
}

}  // namespace asymgan
