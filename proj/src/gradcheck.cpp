#include "asymgan/gradcheck.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>

#include "asymgan/features.hpp"
#include "asymgan/losses.hpp"

namespace asymgan {

double gradient_relative_error(const ScalarFunction& f, const std::vector<torch::Tensor>& inputs, double step) {
  std::vector<torch::Tensor> leaves;
  for (const auto& t : inputs) {
    auto leaf = t.detach().clone();
    if (leaf.is_floating_point()) leaf.requires_grad_(true);
    leaves.push_back(leaf);
  }
  auto out = f(leaves);
  out.backward();

  double worst = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (!leaves[i].is_floating_point()) continue;
    auto analytic = leaves[i].grad().defined() ? leaves[i].grad().detach().clone() : torch::zeros_like(leaves[i]);
    auto numeric = torch::zeros_like(leaves[i]).detach();
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> probe;
    for (const auto& l : leaves) probe.push_back(l.detach().clone());
    auto flat = probe[i].view(-1);
    auto num_flat = numeric.view(-1);
    for (int64_t k = 0; k < flat.numel(); ++k) {
      const double original = flat[k].item<double>();
      flat[k] = original + step;
      const double up = f(probe).item<double>();
      flat[k] = original - step;
      const double down = f(probe).item<double>();
      flat[k] = original;
      num_flat[k] = (up - down) / (2.0 * step);
    }
    const double diff = (analytic - numeric).norm().item<double>();
    const double scale = std::max({analytic.norm().item<double>(), numeric.norm().item<double>(), 1e-12});
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

namespace {

struct Inputs {
  at::Generator gen;

  torch::Tensor uniform(std::vector<int64_t> shape, double lo, double hi) {
    return torch::rand(shape, gen, torch::kDouble) * (hi - lo) + lo;
  }

  // b = a + d with |d| in [0.05, 0.5] elementwise, so no |a - b| kink lies within one FD step.
  torch::Tensor offset_from(const torch::Tensor& a) {
    auto magnitude = uniform(a.sizes().vec(), 0.05, 0.5);
    auto sign = torch::where(torch::rand(a.sizes(), gen, torch::kDouble) < 0.5, -1.0, 1.0);
    return a + magnitude * sign;
  }

  // Offset of `a` whose extractor features all differ from those of `a` by at least `gap`.
  torch::Tensor feature_offset_from(const torch::Tensor& a, const FeatureExtractor& extractor, double gap) {
    const auto fa = extractor.layer_features(a);
    for (;;) {
      auto b = offset_from(a);
      const auto fb = extractor.layer_features(b);
      double margin = 1e9;
      for (std::size_t i = 0; i < fa.size(); ++i) margin = std::min(margin, (fa[i] - fb[i]).abs().min().item<double>());
      if (margin >= gap) return b;
    }
  }

  // Random image whose neighbouring pixels differ by at least `gap`.
  torch::Tensor spread_image(double gap) {
    for (;;) {
      auto x = uniform({1, 3, 8, 8}, -1.0, 1.0);
      auto dx = (x.narrow(3, 1, 7) - x.narrow(3, 0, 7)).abs().min().item<double>();
      auto dy = (x.narrow(2, 1, 7) - x.narrow(2, 0, 7)).abs().min().item<double>();
      if (std::min(dx, dy) >= gap) return x;
    }
  }
};

}  // namespace

std::vector<GradcheckResult> run_loss_gradchecks(std::uint64_t seed, double tolerance) {
  Inputs in{at::make_generator<at::CPUGeneratorImpl>(seed)};
  const std::vector<int64_t> shape{1, 3, 8, 8};
  const RandomConvExtractor extractor(seed);
  SsimConfig ssim_cfg;

  std::vector<std::pair<std::string, std::pair<ScalarFunction, std::vector<torch::Tensor>>>> cases;
  auto a = in.uniform(shape, -1.0, 1.0);
  auto b = in.offset_from(a);
  cases.push_back({"cycle_l1", {[](const auto& v) { return cycle_l1(v[0], v[1]); }, {a, b}}});
  cases.push_back({"color_cycle", {[](const auto& v) { return color_cycle(v[0], v[1]); }, {a, b}}});
  auto near = (a + 0.1 * in.uniform(shape, -1.0, 1.0)).clamp(-1.0, 1.0);
  cases.push_back({"ssim", {[ssim_cfg](const auto& v) { return ssim(v[0], v[1], ssim_cfg); }, {a, near}}});
  cases.push_back({"ms_ssim", {[ssim_cfg](const auto& v) { return ms_ssim(v[0], v[1], ssim_cfg); }, {a, near}}});
  auto real = in.uniform({1, 1, 6, 6}, -1.0, 2.0);
  auto fake = in.uniform({1, 1, 6, 6}, -1.0, 2.0);
  cases.push_back({"lsgan", {[](const auto& v) { return lsgan_d(v[0], v[1]) + lsgan_g(v[1]); }, {real, fake}}});
  auto logits = in.uniform({4, 5}, -2.0, 2.0);
  auto target = torch::tensor({0, 3, 1, 4}, torch::kLong);
  cases.push_back({"domain_cls", {[](const auto& v) { return domain_cls(v[0], v[1]); }, {logits, target}}});
  cases.push_back({"identity_unsup", {[](const auto& v) { return identity_unsup(v[0], v[1]); }, {b, a}}});
  auto c = in.uniform(shape, -1.0, 1.0);
  auto d = in.offset_from(c);
  cases.push_back({"identity_sup", {[](const auto& v) { return identity_sup(v[0], v[1], v[2], v[3]); }, {b, a, d, c}}});
  cases.push_back({"color_paired", {[](const auto& v) { return color_paired(v[0], v[1]); }, {b, a}}});
  auto e = in.feature_offset_from(a, extractor, 1e-3);
  cases.push_back(
      {"perceptual", {[&extractor](const auto& v) { return perceptual(v[0], v[1], extractor); }, {e, a}}});
  auto tv_input = in.spread_image(4e-3);
  cases.push_back({"total_variation", {[](const auto& v) { return total_variation(v[0]); }, {tv_input}}});

  std::vector<GradcheckResult> results;
  for (const auto& [name, job] : cases) {
    const double err = gradient_relative_error(job.first, job.second);
    results.push_back({name, err, err < tolerance});
  }
  return results;
}

}  // namespace asymgan
