#include "asymgan/pipeline.hpp"

#include <random>

#include "asymgan/errors.hpp"
#include "asymgan/features.hpp"
#include "asymgan/losses.hpp"
#include "asymgan/metrics.hpp"

namespace asymgan {

LoadedModels load_models(const std::filesystem::path& checkpoint) {
  auto meta = read_checkpoint_meta(checkpoint);
  LoadedModels models{meta, build_pair(meta.pair, meta.image_channels, meta.image_size),
                      build_discriminator(meta.discriminator, meta.image_size)};
  load_checkpoint(checkpoint, models.pair, models.discriminator);
  models.pair.translate->eval();
  models.pair.reconstruct->eval();
  models.discriminator->eval();
  return models;
}

Raster image_grid(const std::vector<std::vector<torch::Tensor>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ValidationError("image grid needs at least one image");
  const auto& first = rows.front().front();
  const int h = static_cast<int>(first.size(2));
  const int w = static_cast<int>(first.size(3));
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  Raster grid(w * static_cast<int>(cols), h * static_cast<int>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      auto img = rows[r][c];
      if (img.size(1) == 1) img = img.expand({1, 3, h, w});
      if (img.size(2) != h || img.size(3) != w) throw ShapeError("grid images must share one size");
      const auto tile = denormalize(ImageTensor(img.detach().to(torch::kFloat).contiguous()));
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          for (int ch = 0; ch < 3; ++ch) {
            grid.at(static_cast<int>(c) * w + x, static_cast<int>(r) * h + y, ch) = tile.at(x, y, ch);
          }
        }
      }
    }
  }
  return grid;
}

torch::Tensor infer_domains(LoadedModels& models, const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  auto outs = models.discriminator->forward_multidomain(images);
  if (!outs.front().class_logits) throw SpecError("checkpoint discriminator has no classifier head");
  return outs.front().class_logits->argmax(1);
}

namespace {

nlohmann::json evaluate_unpaired(LoadedModels& models, const DatasetManifest& manifest, std::uint64_t seed) {
  const int m = manifest.num_domains();
  if (m != models.meta.domains.size() && !models.meta.domains.empty()) {
    throw ValidationError("dataset has " + std::to_string(m) + " domains, checkpoint expects " +
                          std::to_string(models.meta.domains.size()));
  }
  auto data = load_unpaired(manifest);
  std::mt19937_64 rng(seed);
  auto targets = sample_targets(data.domains, m, rng);
  torch::NoGradGuard no_grad;
  auto fake = models.pair.translate->forward(data.images, LabelGuidance{one_hot_batch(targets, m)});
  auto rec = models.pair.reconstruct->forward(fake, LabelGuidance{one_hot_batch(data.domains, m)});

  ClassifierConfig ccfg;
  ccfg.seed = seed;
  auto classifier = train_domain_classifier(data.images, data.domains, m, ccfg);
  auto accuracy = score_classifier(classifier, fake, targets);
  const int splits = std::min<int64_t>(10, std::max<int64_t>(1, fake.size(0) / 10));
  auto [is_mean, is_std] = inception_style_score(classifier_probabilities(classifier, fake), splits);
  RandomConvExtractor extractor(seed);

  nlohmann::json report;
  report["mode"] = "unpaired";
  report["sample_count"] = data.images.size(0);
  report["classification_accuracy"] = {{"top1", accuracy.top1}};
  if (accuracy.top5) report["classification_accuracy"]["top5"] = *accuracy.top5;
  report["classifier_real_accuracy"] = score_classifier(classifier, data.images, data.domains).top1;
  report["inception_style_score"] = {{"mean", is_mean}, {"std", is_std}, {"splits", splits}};
  report["frechet_distance"] = frechet_distance(data.images, fake, extractor);
  report["extractor"] = extractor.identity();
  const double rec_psnr = psnr(rec, data.images, 2.0);
  report["reconstruction"] = {{"psnr", std::isinf(rec_psnr) ? nlohmann::json("inf") : nlohmann::json(rec_psnr)},
                              {"ssim", ssim(rec, data.images).item<double>()},
                              {"l1", cycle_l1(rec, data.images).item<double>()}};
  return report;
}

nlohmann::json evaluate_paired(LoadedModels& models, const DatasetManifest& manifest, std::uint64_t seed) {
  auto samples = manifest.split("test");
  if (samples.size() < 2) samples = manifest.samples;
  if (samples.size() < 2) throw ValidationError("paired evaluation needs at least two samples");
  std::vector<torch::Tensor> x, lx, y, ly;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<std::size_t> same;
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j != i && samples[j].group == samples[i].group) same.push_back(j);
    }
    if (same.empty()) continue;
    const auto j = same[std::uniform_int_distribution<std::size_t>(0, same.size() - 1)(rng)];
    x.push_back(load_image(samples[i].image, manifest.image_size));
    lx.push_back(load_image(*samples[i].skeleton, manifest.image_size));
    y.push_back(load_image(samples[j].image, manifest.image_size));
    ly.push_back(load_image(*samples[j].skeleton, manifest.image_size));
  }
  if (x.size() < 2) throw ValidationError("paired evaluation needs two samples per group");
  auto X = torch::cat(x), LX = torch::cat(lx), Y = torch::cat(y), LY = torch::cat(ly);
  torch::NoGradGuard no_grad;
  auto fake = models.pair.translate->forward(X, SkeletonGuidance{LY});
  auto rec = models.pair.reconstruct->forward(fake, SkeletonGuidance{LX});
  RandomConvExtractor extractor(seed);
  const double p = psnr(fake, Y, 2.0);
  nlohmann::json report;
  report["mode"] = "paired";
  report["sample_count"] = X.size(0);
  report["psnr"] = std::isinf(p) ? nlohmann::json("inf") : nlohmann::json(p);
  report["ssim"] = ssim(fake, Y).item<double>();
  report["color_l1"] = color_paired(fake, Y).item<double>();
  report["frechet_distance"] = frechet_distance(Y, fake, extractor);
  report["extractor"] = extractor.identity();
  report["reconstruction"] = {{"l1", cycle_l1(rec, X).item<double>()}};
  return report;
}

}  // namespace

nlohmann::json evaluate_checkpoint(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                                   std::uint64_t seed) {
  auto models = load_models(checkpoint);
  if (manifest.image_size != models.meta.image_size) {
    throw ValidationError("dataset image size " + std::to_string(manifest.image_size) + " differs from the " +
                          std::to_string(models.meta.image_size) + " the checkpoint was trained on");
  }
  auto report = manifest.mode == DatasetMode::UnpairedMultidomain ? evaluate_unpaired(models, manifest, seed)
                                                                   : evaluate_paired(models, manifest, seed);
  report["checkpoint"] = checkpoint.string();
  report["pair"] = models.meta.pair.to_json();
  return report;
}

}  // namespace asymgan
