#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymgan/discriminators.hpp"
#include "asymgan/generators.hpp"

namespace asymgan {

/// Everything needed to rebuild the models stored in a checkpoint.
struct CheckpointMeta {
  GeneratorPairSpec pair;
  DiscriminatorSpec discriminator;
  int image_channels = 3;
  int image_size = 0;
  std::vector<std::string> domains;  // unpaired mode: domain names by label index

  nlohmann::json to_json() const;
  static CheckpointMeta from_json(const nlohmann::json& doc);
};

/// One archive: parameters under "translate.", "reconstruct." and "discriminator." prefixes
/// plus the metadata JSON under the key "meta".
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, const GeneratorPair& pair,
                     const Discriminator& discriminator);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Restores parameters into already built models. Throws SpecError when the stored pair spec
/// differs from `pair.spec`, IngestionError when the archive cannot be read.
void load_checkpoint(const std::filesystem::path& path, GeneratorPair& pair, Discriminator& discriminator);

}  // namespace asymgan
