#include "asymgan/checkpoint.hpp"

#include "asymgan/errors.hpp"

namespace asymgan {

nlohmann::json CheckpointMeta::to_json() const {
  return {{"pair", pair.to_json()},
          {"discriminator", discriminator.to_json()},
          {"image_channels", image_channels},
          {"image_size", image_size},
          {"domains", domains}};
}

CheckpointMeta CheckpointMeta::from_json(const nlohmann::json& doc) {
  CheckpointMeta meta;
  meta.pair = GeneratorPairSpec::from_json(doc.at("pair"));
  meta.discriminator = DiscriminatorSpec::from_json(doc.at("discriminator"));
  meta.image_channels = doc.value("image_channels", 3);
  meta.image_size = doc.at("image_size").get<int>();
  meta.domains = doc.value("domains", std::vector<std::string>{});
  return meta;
}

namespace {

void write_module(torch::serialize::OutputArchive& archive, const std::string& prefix, const torch::nn::Module& m) {
  for (const auto& item : m.named_parameters(true)) archive.write(prefix + item.key(), item.value());
  for (const auto& item : m.named_buffers(true)) archive.write(prefix + item.key(), item.value(), true);
}

void read_module(torch::serialize::InputArchive& archive, const std::string& prefix, torch::nn::Module& m) {
  torch::NoGradGuard no_grad;
  for (auto& item : m.named_parameters(true)) {
    torch::Tensor stored;
    if (!archive.try_read(prefix + item.key(), stored)) {
      throw IngestionError("checkpoint lacks parameter '" + prefix + item.key() + "'");
    }
    if (!stored.sizes().equals(item.value().sizes())) {
      throw SpecError("checkpoint parameter '" + prefix + item.key() + "' has a different shape");
    }
    item.value().copy_(stored);
  }
  for (auto& item : m.named_buffers(true)) {
    torch::Tensor stored;
    if (archive.try_read(prefix + item.key(), stored, true)) item.value().copy_(stored);
  }
}

torch::serialize::InputArchive open_archive(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IngestionError("checkpoint '" + path.string() + "' not found");
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IngestionError("cannot read checkpoint '" + path.string() + "': " + e.what_without_backtrace());
  }
  return archive;
}

CheckpointMeta meta_from(torch::serialize::InputArchive& archive) {
  c10::IValue value;
  if (!archive.try_read("meta", value) || !value.isString()) throw IngestionError("checkpoint lacks metadata");
  return CheckpointMeta::from_json(nlohmann::json::parse(value.toStringRef()));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, const GeneratorPair& pair,
                     const Discriminator& discriminator) {
  torch::serialize::OutputArchive archive;
  archive.write("meta", c10::IValue(meta.to_json().dump()));
  write_module(archive, "translate.", *pair.translate);
  write_module(archive, "reconstruct.", *pair.reconstruct);
  write_module(archive, "discriminator.", *discriminator);
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw IngestionError("cannot write checkpoint '" + path.string() + "': " + e.what_without_backtrace());
  }
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  auto archive = open_archive(path);
  return meta_from(archive);
}

void load_checkpoint(const std::filesystem::path& path, GeneratorPair& pair, Discriminator& discriminator) {
  auto archive = open_archive(path);
  const auto meta = meta_from(archive);
  if (!(meta.pair == pair.spec)) {
    throw SpecError("checkpoint spec " + meta.pair.to_json().dump() + " differs from " + pair.spec.to_json().dump());
  }
  if (!(meta.discriminator == discriminator->spec())) {
    throw SpecError("checkpoint discriminator spec differs from the built discriminator");
  }
  read_module(archive, "translate.", *pair.translate);
  read_module(archive, "reconstruct.", *pair.reconstruct);
  read_module(archive, "discriminator.", *discriminator);
}

}  // namespace asymgan
