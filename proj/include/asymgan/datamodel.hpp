#pragma once

#include <torch/torch.h>

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymgan/image_io.hpp"

namespace asymgan {

/// Batched raster (batch, channels, height, width). Image data lives in [-1, 1];
/// `value_range` is the dynamic range L used by similarity metrics.
class ImageTensor {
 public:
  explicit ImageTensor(torch::Tensor data, double value_range = 2.0);

  const torch::Tensor& data() const noexcept { return data_; }
  double value_range() const noexcept { return value_range_; }

  int64_t batch() const { return data_.size(0); }
  int64_t channels() const { return data_.size(1); }
  int64_t height() const { return data_.size(2); }
  int64_t width() const { return data_.size(3); }

  /// Throws ValidationError unless every element is finite and within [-1 - 1e-6, 1 + 1e-6].
  void check_normalized() const;

 private:
  torch::Tensor data_;
  double value_range_;
};

class DomainLabel {
 public:
  DomainLabel(int64_t index, int64_t num_domains);

  /// Throws ValidationError unless `one_hot` holds exactly one 1 and zeros elsewhere.
  static DomainLabel from_one_hot(const torch::Tensor& one_hot);

  int64_t index() const noexcept { return index_; }
  int64_t num_domains() const noexcept { return num_domains_; }
  torch::Tensor one_hot() const;

  friend bool operator==(const DomainLabel&, const DomainLabel&) = default;

 private:
  int64_t index_;
  int64_t num_domains_;
};

/// Stacks labels into a (batch, m) float one-hot matrix.
torch::Tensor one_hot_batch(std::span<const DomainLabel> labels);
torch::Tensor one_hot_batch(const torch::Tensor& indices, int64_t num_domains);

/// Spatial conditioning map (channels, height, width) in [-1, 1].
class SkeletonMap {
 public:
  explicit SkeletonMap(torch::Tensor data);

  const torch::Tensor& data() const noexcept { return data_; }
  /// Throws ShapeError when the spatial dims differ from the paired image.
  void check_pairs_with(const ImageTensor& image) const;

 private:
  torch::Tensor data_;
};

/// Guidance handed to a generator: a batch of one-hot domain labels or a batch of skeleton maps.
struct LabelGuidance {
  torch::Tensor one_hot;  // (batch, m)
};
struct SkeletonGuidance {
  torch::Tensor maps;  // (batch, c, h, w)
};
using Guidance = std::variant<LabelGuidance, SkeletonGuidance>;

enum class DatasetMode { UnpairedMultidomain, PairedSkeleton };

std::string to_string(DatasetMode mode);
DatasetMode parse_dataset_mode(std::string_view text);

struct Sample {
  std::filesystem::path image;
  std::optional<std::filesystem::path> skeleton;
  int domain = -1;      // unpaired mode
  std::string split;    // paired mode: "train" or "test"
  std::string group;    // paired mode: samples sharing a group may be paired for training

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DatasetManifest {
  std::filesystem::path root;
  DatasetMode mode = DatasetMode::UnpairedMultidomain;
  std::vector<std::string> domains;
  std::vector<Sample> samples;
  int image_size = 0;

  int num_domains() const { return static_cast<int>(domains.size()); }
  std::vector<Sample> split(std::string_view name) const;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& doc);
};

/// Enumerates a dataset directory.
///
/// Unpaired layout: `root/<domain>/*.png`, one subdirectory per domain (sorted by name).
/// Paired layout: `root/{train,test}/images/img_<key>.png` with `root/{train,test}/skeletons/skeleton_<key>.png`;
/// identical stems in both directories are accepted too. The group of a paired sample is the key up to
/// its last underscore.
///
/// `image_size` 0 means "size of the first image".
DatasetManifest load_manifest(const std::filesystem::path& root, DatasetMode mode, int image_size = 0);

/// raw / 127.5 - 1 on every sample; result has shape (1, channels, h, w).
ImageTensor normalize(const Raster& raw);
/// Inverse of normalize for a single image (batch index `index`); clamps and rounds to the 0..255 grid.
Raster denormalize(const ImageTensor& image, int64_t index = 0);

/// Splits a 3-channel tensor into its red, green and blue planes.
std::array<ImageTensor, 3> channel_split(const ImageTensor& x);
ImageTensor channel_concat(std::span<const ImageTensor> planes);

/// Loads a PNG as a normalized (1, 3, size, size) tensor; gray files are replicated to 3 channels,
/// other sizes are bilinearly resized.
torch::Tensor load_image(const std::filesystem::path& path, int size, int channels = 3);

}  // namespace asymgan
