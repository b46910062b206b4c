#include "asymgan/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "asymgan/errors.hpp"

namespace fs = std::filesystem;

namespace asymgan {

ImageTensor::ImageTensor(torch::Tensor data, double value_range) : data_(std::move(data)), value_range_(value_range) {
  if (data_.dim() != 4) {
    throw ShapeError("ImageTensor expects (batch, channels, height, width), got rank " + std::to_string(data_.dim()));
  }
  if (value_range_ <= 0.0) {
    throw ValidationError("value_range must be positive");
  }
}

void ImageTensor::check_normalized() const {
  torch::NoGradGuard no_grad;
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw ValidationError("image tensor contains non-finite values");
  }
  if (data_.numel() == 0) return;
  const double lo = data_.min().item<double>();
  const double hi = data_.max().item<double>();
  if (lo < -1.0 - 1e-6 || hi > 1.0 + 1e-6) {
    throw ValidationError("image tensor outside [-1, 1]: [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

DomainLabel::DomainLabel(int64_t index, int64_t num_domains) : index_(index), num_domains_(num_domains) {
  if (num_domains < 1 || index < 0 || index >= num_domains) {
    throw ValidationError("domain index " + std::to_string(index) + " outside [0, " + std::to_string(num_domains) + ")");
  }
}

DomainLabel DomainLabel::from_one_hot(const torch::Tensor& one_hot) {
  if (one_hot.dim() != 1 || one_hot.numel() < 1) {
    throw ValidationError("one-hot label must be a non-empty vector");
  }
  auto v = one_hot.to(torch::kDouble).contiguous();
  const auto* p = v.data_ptr<double>();
  int64_t hot = -1;
  for (int64_t i = 0; i < v.numel(); ++i) {
    if (p[i] == 1.0) {
      if (hot >= 0) throw ValidationError("one-hot label has more than one hot entry");
      hot = i;
    } else if (p[i] != 0.0) {
      throw ValidationError("one-hot label entries must be 0 or 1");
    }
  }
  if (hot < 0) throw ValidationError("one-hot label has no hot entry");
  return DomainLabel(hot, v.numel());
}

torch::Tensor DomainLabel::one_hot() const {
  auto v = torch::zeros({num_domains_});
  v[index_] = 1.0;
  return v;
}

torch::Tensor one_hot_batch(std::span<const DomainLabel> labels) {
  if (labels.empty()) throw ValidationError("empty label batch");
  const auto m = labels.front().num_domains();
  auto out = torch::zeros({static_cast<int64_t>(labels.size()), m});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].num_domains() != m) throw ValidationError("label batch mixes domain counts");
    out[static_cast<int64_t>(i)][labels[i].index()] = 1.0;
  }
  return out;
}

torch::Tensor one_hot_batch(const torch::Tensor& indices, int64_t num_domains) {
  if (indices.dim() != 1) throw ValidationError("label indices must be a vector");
  if (indices.numel() > 0 && (indices.min().item<int64_t>() < 0 || indices.max().item<int64_t>() >= num_domains)) {
    throw ValidationError("label index outside [0, " + std::to_string(num_domains) + ")");
  }
  return torch::one_hot(indices.to(torch::kLong), num_domains).to(torch::kFloat);
}

SkeletonMap::SkeletonMap(torch::Tensor data) : data_(std::move(data)) {
  if (data_.dim() != 3) {
    throw ShapeError("SkeletonMap expects (channels, height, width), got rank " + std::to_string(data_.dim()));
  }
}

void SkeletonMap::check_pairs_with(const ImageTensor& image) const {
  if (data_.size(1) != image.height() || data_.size(2) != image.width()) {
    throw ShapeError("skeleton spatial dims do not match the paired image");
  }
}

std::string to_string(DatasetMode mode) {
  return mode == DatasetMode::UnpairedMultidomain ? "unpaired" : "paired";
}

DatasetMode parse_dataset_mode(std::string_view text) {
  if (text == "unpaired" || text == "unpaired_multidomain") return DatasetMode::UnpairedMultidomain;
  if (text == "paired" || text == "paired_skeleton") return DatasetMode::PairedSkeleton;
  throw ValidationError("unknown dataset mode '" + std::string(text) + "'");
}

std::vector<Sample> DatasetManifest::split(std::string_view name) const {
  std::vector<Sample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out), [&](const Sample& s) { return s.split == name; });
  return out;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json samples_doc = nlohmann::json::array();
  for (const auto& s : samples) {
    nlohmann::json entry{{"image", s.image.string()}};
    if (s.skeleton) entry["skeleton"] = s.skeleton->string();
    if (mode == DatasetMode::UnpairedMultidomain) {
      entry["domain"] = s.domain;
    } else {
      entry["split"] = s.split;
      entry["group"] = s.group;
    }
    samples_doc.push_back(std::move(entry));
  }
  return {{"root", root.string()},
          {"mode", to_string(mode)},
          {"domains", domains},
          {"samples", std::move(samples_doc)},
          {"image_size", image_size}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& doc) {
  DatasetManifest m;
  m.root = doc.value("root", std::string{});
  m.mode = parse_dataset_mode(doc.at("mode").get<std::string>());
  m.domains = doc.at("domains").get<std::vector<std::string>>();
  m.image_size = doc.at("image_size").get<int>();
  for (const auto& entry : doc.at("samples")) {
    Sample s;
    s.image = entry.at("image").get<std::string>();
    if (entry.contains("skeleton")) s.skeleton = fs::path(entry.at("skeleton").get<std::string>());
    s.domain = entry.value("domain", -1);
    s.split = entry.value("split", std::string{});
    s.group = entry.value("group", std::string{});
    m.samples.push_back(std::move(s));
  }
  return m;
}

namespace {

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string strip_prefix(const std::string& stem, std::string_view prefix) {
  return stem.starts_with(prefix) ? stem.substr(prefix.size()) : stem;
}

std::string group_of(const std::string& key) {
  const auto pos = key.rfind('_');
  return pos == std::string::npos ? std::string{} : key.substr(0, pos);
}

void load_paired_split(const fs::path& root, const std::string& split, DatasetManifest& manifest) {
  const auto images_dir = root / split / "images";
  const auto skeletons_dir = root / split / "skeletons";
  if (!fs::is_directory(images_dir)) return;
  if (!fs::is_directory(skeletons_dir)) {
    throw IngestionError("missing skeleton directory " + skeletons_dir.string());
  }
  for (const auto& image : sorted_pngs(images_dir)) {
    const auto stem = image.stem().string();
    const auto key = strip_prefix(stem, "img_");
    auto skeleton = skeletons_dir / ("skeleton_" + key + ".png");
    if (!fs::exists(skeleton)) skeleton = skeletons_dir / (stem + ".png");
    if (!fs::exists(skeleton)) {
      throw ValidationError("image " + image.filename().string() + " has no matching skeleton in " +
                            skeletons_dir.string());
    }
    Sample s;
    s.image = image;
    s.skeleton = skeleton;
    s.split = split;
    s.group = group_of(key);
    manifest.samples.push_back(std::move(s));
  }
}

}  // namespace

DatasetManifest load_manifest(const fs::path& root, DatasetMode mode, int image_size) {
  if (!fs::is_directory(root)) {
    throw IngestionError("dataset root '" + root.string() + "' is not a directory");
  }
  DatasetManifest manifest;
  manifest.root = root;
  manifest.mode = mode;

  if (mode == DatasetMode::UnpairedMultidomain) {
    std::vector<fs::path> domain_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) domain_dirs.push_back(entry.path());
    }
    std::sort(domain_dirs.begin(), domain_dirs.end());
    if (domain_dirs.size() < 2) {
      throw ValidationError("unpaired dataset needs at least 2 domain directories, found " +
                            std::to_string(domain_dirs.size()));
    }
    for (std::size_t d = 0; d < domain_dirs.size(); ++d) {
      manifest.domains.push_back(domain_dirs[d].filename().string());
      for (const auto& image : sorted_pngs(domain_dirs[d])) {
        Sample s;
        s.image = image;
        s.domain = static_cast<int>(d);
        manifest.samples.push_back(std::move(s));
      }
    }
  } else {
    load_paired_split(root, "train", manifest);
    load_paired_split(root, "test", manifest);
    if (manifest.samples.empty()) {
      throw IngestionError("paired dataset '" + root.string() + "' has no train/test images");
    }
  }

  if (manifest.samples.empty()) throw IngestionError("dataset '" + root.string() + "' contains no PNG files");
  if (image_size > 0) {
    manifest.image_size = image_size;
  } else {
    const auto first = read_png(manifest.samples.front().image);
    manifest.image_size = first.width;
  }
  return manifest;
}

ImageTensor normalize(const Raster& raw) {
  auto bytes = torch::from_blob(const_cast<std::uint8_t*>(raw.pixels.data()), {raw.height, raw.width, raw.channels},
                                torch::kUInt8);
  auto t = bytes.to(torch::kFloat).permute({2, 0, 1}).unsqueeze(0).contiguous();
  return ImageTensor(t / 127.5 - 1.0);
}

Raster denormalize(const ImageTensor& image, int64_t index) {
  torch::NoGradGuard no_grad;
  auto t = image.data()[index].detach().to(torch::kFloat);
  auto bytes = ((t + 1.0) * 127.5).round().clamp(0, 255).to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  Raster out(static_cast<int>(image.width()), static_cast<int>(image.height()), static_cast<int>(image.channels()));
  std::memcpy(out.pixels.data(), bytes.data_ptr<std::uint8_t>(), out.pixels.size());
  return out;
}

std::array<ImageTensor, 3> channel_split(const ImageTensor& x) {
  if (x.channels() != 3) {
    throw ShapeError("channel_split expects 3 channels, got " + std::to_string(x.channels()));
  }
  const auto& d = x.data();
  return {ImageTensor(d.narrow(1, 0, 1), x.value_range()), ImageTensor(d.narrow(1, 1, 1), x.value_range()),
          ImageTensor(d.narrow(1, 2, 1), x.value_range())};
}

ImageTensor channel_concat(std::span<const ImageTensor> planes) {
  if (planes.empty()) throw ShapeError("channel_concat needs at least one plane");
  std::vector<torch::Tensor> parts;
  for (const auto& p : planes) parts.push_back(p.data());
  return ImageTensor(torch::cat(parts, 1), planes.front().value_range());
}

torch::Tensor load_image(const fs::path& path, int size, int channels) {
  auto raster = read_png(path);
  auto t = normalize(raster).data();
  if (t.size(1) == 1 && channels == 3) t = t.expand({1, 3, t.size(2), t.size(3)}).contiguous();
  if (t.size(1) != channels) {
    throw ShapeError("image " + path.string() + " has " + std::to_string(t.size(1)) + " channels, expected " +
                     std::to_string(channels));
  }
  if (t.size(2) != size || t.size(3) != size) {
    namespace F = torch::nn::functional;
    t = F::interpolate(t, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{size, size})
                              .mode(torch::kBilinear)
                              .align_corners(false))
            .clamp(-1.0, 1.0);
  }
  return t;
}

}  // namespace asymgan
