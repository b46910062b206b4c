#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymgan/checkpoint.hpp"
#include "asymgan/datamodel.hpp"
#include "asymgan/image_io.hpp"
#include "asymgan/training.hpp"

namespace asymgan {

struct LoadedModels {
  CheckpointMeta meta;
  GeneratorPair pair;
  Discriminator discriminator{nullptr};
};

/// Rebuilds the models described by the checkpoint metadata and restores their parameters (eval mode).
LoadedModels load_models(const std::filesystem::path& checkpoint);

/// Tiles (1, c, h, w) images: one row per inner vector, left to right. Short rows are padded black.
Raster image_grid(const std::vector<std::vector<torch::Tensor>>& rows);

/// Domain index predicted by the discriminator's classifier head, one per image.
torch::Tensor infer_domains(LoadedModels& models, const torch::Tensor& images);

/// Metrics report for a checkpoint over a dataset.
///
/// Unpaired: every image is translated to a uniformly drawn other domain and cycled back; reports
/// classification accuracy and inception-style score of a classifier trained on the real images,
/// Frechet distance between real and translated embeddings, and PSNR/SSIM/L1 of the reconstructions.
/// Paired: each test sample is translated to the skeleton of another test sample of the same group;
/// reports PSNR/SSIM against the true target and the Frechet distance.
nlohmann::json evaluate_checkpoint(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                                   std::uint64_t seed);

}  // namespace asymgan
