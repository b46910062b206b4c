// asymgan: command-line driver for data synthesis, training, translation and evaluation.

#include <torch/torch.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "asymgan/errors.hpp"
#include "asymgan/generators.hpp"
#include "asymgan/gradcheck.hpp"
#include "asymgan/pipeline.hpp"
#include "asymgan/synth.hpp"
#include "asymgan/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace asymgan;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string checkpoint;
  std::string target_domain;
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string mode;
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

// Config file values first, then flags on top.
json merged_config(const Options& o) {
  json cfg = o.config.empty() ? json::object() : read_json(o.config);
  if (!cfg.is_object()) throw ValidationError("config must be a JSON object");
  if (!o.data.empty()) cfg["data"] = o.data;
  if (!o.out.empty()) cfg["out"] = o.out;
  if (!o.checkpoint.empty()) cfg["checkpoint"] = o.checkpoint;
  if (!o.target_domain.empty()) cfg["target_domain"] = o.target_domain;
  if (!o.mode.empty()) cfg["mode"] = o.mode;
  if (o.seed) cfg["seed"] = *o.seed;
  if (o.epochs) cfg["epochs"] = *o.epochs;
  return cfg;
}

std::string require(const json& cfg, const char* key) {
  if (!cfg.contains(key)) throw ValidationError(std::string("missing '") + key + "' (flag or config key)");
  return cfg.at(key).get<std::string>();
}

DatasetMode mode_of(const json& cfg) { return parse_dataset_mode(cfg.value("mode", std::string("unpaired"))); }

int cmd_synth(const json& cfg) {
  const fs::path out = require(cfg, "out");
  const auto seed = cfg.value("seed", std::uint64_t{0});
  const json s = cfg.value("synth", json::object());
  const int size = s.value("size", 64);
  DatasetManifest manifest;
  if (mode_of(cfg) == DatasetMode::UnpairedMultidomain) {
    manifest = synth_multidomain(out, s.value("domains", 3), s.value("per_domain", 40), size, seed);
  } else {
    manifest = synth_paired(out, s.value("subjects", 5), s.value("poses", 8), size, seed, s.value("test_subjects", 1));
  }
  std::printf("wrote %zu samples (%s) to %s\n", manifest.samples.size(), to_string(manifest.mode).c_str(),
              out.string().c_str());
  return 0;
}

GeneratorPairSpec default_pair(DatasetMode mode, int domains) {
  GeneratorPairSpec spec;
  if (mode == DatasetMode::UnpairedMultidomain) {
    spec.guidance = LabelGuidanceSpec{domains};
  } else {
    spec.translate_arch = ArchTier::resnet9(64);
    spec.reconstruct_arch = ArchTier::resnet9(4);
    spec.guidance = SkeletonGuidanceSpec{};
  }
  return spec;
}

DiscriminatorSpec default_discriminator(DatasetMode mode, int domains) {
  DiscriminatorSpec spec;
  if (mode == DatasetMode::UnpairedMultidomain) {
    spec.kind = MultidomainKind{domains};
  } else {
    spec.kind = TripletKind{};
  }
  return spec;
}

int cmd_train(const json& cfg) {
  const auto mode = mode_of(cfg);
  const auto manifest = load_manifest(require(cfg, "data"), mode, cfg.value("image_size", 0));
  const fs::path out = require(cfg, "out");
  auto pair = cfg.contains("generators") ? GeneratorPairSpec::from_json(cfg["generators"])
                                         : default_pair(mode, manifest.num_domains());
  auto disc = cfg.contains("discriminator") ? DiscriminatorSpec::from_json(cfg["discriminator"])
                                            : default_discriminator(mode, manifest.num_domains());
  const auto base = mode == DatasetMode::UnpairedMultidomain ? TrainConfig::unsupervised_defaults()
                                                             : TrainConfig::supervised_defaults();
  auto train = TrainConfig::from_json(cfg.value("train", json::object()), base);
  if (cfg.contains("seed")) train.seed = cfg["seed"].get<std::uint64_t>();
  if (cfg.contains("epochs")) train.epochs = cfg["epochs"].get<int>();
  torch::set_num_threads(cfg.value("threads", 1));

  TrainCallbacks callbacks;
  callbacks.on_step = [](const StepReport& r) {
    if (r.step % 50 == 0) std::printf("step %lld epoch %d g_total %.4f\n", static_cast<long long>(r.step), r.epoch,
                                      r.values.at("g_total"));
  };
  const auto final_path = train_loop(manifest, pair, disc, train, out, callbacks);
  std::printf("final checkpoint: %s\n", final_path.string().c_str());
  return 0;
}

std::vector<fs::path> png_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_translate(const json& cfg) {
  auto models = load_models(require(cfg, "checkpoint"));
  const fs::path data = require(cfg, "data");
  const fs::path out = require(cfg, "out");
  const int size = models.meta.image_size;
  const std::size_t limit = cfg.value("limit", 4);
  fs::create_directories(out);
  torch::NoGradGuard no_grad;
  std::vector<std::vector<torch::Tensor>> rows;

  if (std::holds_alternative<LabelGuidanceSpec>(models.meta.pair.guidance)) {
    const auto& names = models.meta.domains;
    const int m = std::get<LabelGuidanceSpec>(models.meta.pair.guidance).num_domains;
    std::vector<int> targets;
    if (cfg.contains("target_domain")) {
      const auto name = cfg["target_domain"].get<std::string>();
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw ValidationError("unknown target domain '" + name + "'");
      targets.push_back(static_cast<int>(it - names.begin()));
    } else {
      for (int k = 0; k < m; ++k) targets.push_back(k);
    }
    std::vector<fs::path> inputs;
    if (fs::is_regular_file(data)) {
      inputs.push_back(data);
    } else {
      inputs = png_files(data);
      if (inputs.empty()) {
        // A dataset root: take the first images of every domain directory.
        for (const auto& name : names) {
          if (!fs::is_directory(data / name)) continue;
          auto files = png_files(data / name);
          files.resize(std::min(files.size(), limit));
          inputs.insert(inputs.end(), files.begin(), files.end());
        }
      }
    }
    if (inputs.empty()) throw IngestionError("no PNG inputs under '" + data.string() + "'");
    for (const auto& path : inputs) {
      auto x = load_image(path, size);
      const auto source = infer_domains(models, x);
      std::vector<torch::Tensor> row{x};
      torch::Tensor first;
      for (int t : targets) {
        auto y = models.pair.translate->forward(x, LabelGuidance{one_hot_batch(torch::tensor({t}), m)});
        const auto label = names.empty() ? std::to_string(t) : names[static_cast<std::size_t>(t)];
        write_png(out / (path.stem().string() + "_to_" + label + ".png"), denormalize(ImageTensor(y)));
        row.push_back(y);
        if (!first.defined()) first = y;
      }
      row.push_back(models.pair.reconstruct->forward(first, LabelGuidance{one_hot_batch(source, m)}));
      rows.push_back(std::move(row));
    }
  } else {
    auto manifest = load_manifest(data, DatasetMode::PairedSkeleton, size);
    auto samples = manifest.split("test");
    if (samples.size() < 2) samples = manifest.samples;
    if (samples.size() < 2) throw ValidationError("translate needs at least two paired samples");
    const auto count = std::min(samples.size(), limit);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& src = samples[i];
      const auto& tgt = samples[(i + 1) % samples.size()];
      auto x = load_image(src.image, size);
      auto lx = load_image(*src.skeleton, size);
      auto ly = load_image(*tgt.skeleton, size);
      auto y = models.pair.translate->forward(x, SkeletonGuidance{ly});
      auto rec = models.pair.reconstruct->forward(y, SkeletonGuidance{lx});
      write_png(out / (src.image.stem().string() + "_to_" + tgt.skeleton->stem().string() + ".png"),
                denormalize(ImageTensor(y)));
      rows.push_back({x, ly, y, rec});
    }
  }
  write_png(out / "grid.png", image_grid(rows));
  std::printf("wrote %zu rows to %s\n", rows.size(), (out / "grid.png").string().c_str());
  return 0;
}

int cmd_evaluate(const json& cfg) {
  const fs::path checkpoint = require(cfg, "checkpoint");
  const auto meta = read_checkpoint_meta(checkpoint);
  const auto mode = std::holds_alternative<LabelGuidanceSpec>(meta.pair.guidance) ? DatasetMode::UnpairedMultidomain
                                                                                  : DatasetMode::PairedSkeleton;
  const auto manifest = load_manifest(require(cfg, "data"), mode, meta.image_size);
  auto report = evaluate_checkpoint(checkpoint, manifest, cfg.value("seed", std::uint64_t{0}));
  const auto text = report.dump(2);
  if (cfg.contains("out")) {
    fs::path out = cfg["out"].get<std::string>();
    if (fs::is_directory(out)) out /= "report.json";
    std::ofstream file(out);
    if (!file) throw IngestionError("cannot write '" + out.string() + "'");
    file << text << '\n';
  }
  std::printf("%s\n", text.c_str());
  return 0;
}

void print_capacity(const std::string& label, const GeneratorPairSpec& spec, int size) {
  const auto pair = build_pair(spec, 3, size);
  const auto t = count_parameters(pair.translate_parameters());
  const auto r = count_parameters(pair.reconstruct_parameters());
  std::printf("%-4s %-12s %-12s %-16s %12lld %12lld %12lld\n", label.c_str(), spec.translate_arch.to_string().c_str(),
              spec.reconstruct_arch.to_string().c_str(), to_string(spec.sharing).c_str(), static_cast<long long>(t),
              static_cast<long long>(r), static_cast<long long>(count_parameters(pair)));
}

int cmd_inspect(const json& cfg, const std::string& spec_path) {
  std::printf("%-4s %-12s %-12s %-16s %12s %12s %12s\n", "", "G^t", "G^r", "sharing", "G^t params", "G^r params",
              "total");
  if (!spec_path.empty()) {
    const auto doc = read_json(spec_path);
    const auto pair = GeneratorPairSpec::from_json(doc.contains("generators") ? doc["generators"] : doc);
    const int size = doc.value("image_size", 64);
    print_capacity("", pair, size);
    if (doc.contains("discriminator")) {
      const auto disc = build_discriminator(DiscriminatorSpec::from_json(doc["discriminator"]), size);
      std::printf("discriminator params %lld\n", static_cast<long long>(count_parameters(*disc)));
    }
    return 0;
  }
  // Without a spec: the standard capacity comparison for 7 domains.
  const LabelGuidanceSpec label{cfg.value("domains", 7)};
  auto row = [&](const char* name, ArchTier t, ArchTier r, SharingMode s, GuidanceSpec g) {
    print_capacity(name, GeneratorPairSpec{t, r, s, g}, 64);
  };
  row("S1", ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::None, label);
  row("S2", ArchTier::tier_iii(), ArchTier::tier_ii(), SharingMode::None, label);
  row("S3", ArchTier::tier_iii(), ArchTier::tier_iii(), SharingMode::None, label);
  row("", ArchTier::tier_iii(), ArchTier::tier_ii(), SharingMode::PartialEncoder, label);
  row("", ArchTier::tier_iii(), ArchTier::tier_iii(), SharingMode::Full, label);
  row("", ArchTier::resnet9(64), ArchTier::resnet9(4), SharingMode::None, SkeletonGuidanceSpec{});
  return 0;
}

int cmd_gradcheck(const json& cfg) {
  const auto results = run_loss_gradchecks(cfg.value("seed", std::uint64_t{0}));
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-16s %.3e %s\n", r.loss.c_str(), r.relative_error, r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymmetric generator GAN toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config; flags override its keys")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "random seed");
  };
  auto* synth = app.add_subcommand("synth-data", "write a synthetic dataset");
  common(synth);
  synth->add_option("--out", o.out, "output directory");
  synth->add_option("--mode", o.mode, "unpaired or paired")->check(CLI::IsMember({"unpaired", "paired"}));

  auto* train = app.add_subcommand("train", "train a generator pair");
  common(train);
  train->add_option("--data", o.data, "dataset root")->check(CLI::ExistingDirectory);
  train->add_option("--out", o.out, "run directory");
  train->add_option("--epochs", o.epochs, "number of epochs");
  train->add_option("--mode", o.mode, "unpaired or paired")->check(CLI::IsMember({"unpaired", "paired"}));

  auto* translate = app.add_subcommand("translate", "translate images with a checkpoint");
  common(translate);
  translate->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  translate->add_option("--data", o.data, "input PNG, directory or dataset root")->check(CLI::ExistingPath);
  translate->add_option("--out", o.out, "output directory");
  translate->add_option("--target-domain", o.target_domain, "target domain name (default: all)");

  auto* evaluate = app.add_subcommand("evaluate", "compute the metrics report");
  common(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", o.data, "dataset root")->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", o.out, "report path or directory");

  auto* inspect = app.add_subcommand("inspect", "print parameter counts");
  common(inspect);
  inspect->add_option("--spec", o.spec, "generator pair spec JSON")->check(CLI::ExistingFile);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss");
  common(gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::fprintf(stderr, "%s", sub->help().c_str());
    return 2;
  }

  try {
    const auto cfg = merged_config(o);
    if (synth->parsed()) return cmd_synth(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (translate->parsed()) return cmd_translate(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (inspect->parsed()) return cmd_inspect(cfg, o.spec);
    if (gradcheck->parsed()) return cmd_gradcheck(cfg);
  } catch (const std::exception& e) {
    std::string line = e.what();
    if (const auto nl = line.find('\n'); nl != std::string::npos) line.resize(nl);
    std::fprintf(stderr, "error: %s\n", line.c_str());
    return 1;
  }
  return 2;
}
