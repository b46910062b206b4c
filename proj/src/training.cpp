#include "asymgan/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "asymgan/checkpoint.hpp"
#include "asymgan/errors.hpp"

namespace fs = std::filesystem;

namespace asymgan {

TrainConfig TrainConfig::unsupervised_defaults() { return {}; }

TrainConfig TrainConfig::supervised_defaults() {
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 20;
  cfg.decay_start_epoch = 10;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (buffer_capacity < 0) throw ValidationError("buffer_capacity must be non-negative");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be at least 1");
  loss_weights.validate();
}

nlohmann::json TrainConfig::to_json() const {
  const auto& u = loss_weights.unsupervised;
  const auto& s = loss_weights.supervised;
  return {{"learning_rate", learning_rate},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"buffer_capacity", buffer_capacity},
          {"unsup_lambda_c", u.lambda_c},
          {"unsup_lambda_cyc", u.lambda_cyc},
          {"unsup_lambda_m", u.lambda_m},
          {"unsup_lambda_id", u.lambda_id},
          {"sup_lambda_c", s.lambda_c},
          {"sup_lambda_cyc", s.lambda_cyc},
          {"sup_lambda_id", s.lambda_id},
          {"sup_lambda_vgg", s.lambda_vgg},
          {"sup_lambda_tv", s.lambda_tv},
          {"dual_discriminator", dual_discriminator},
          {"seed", seed},
          {"linear_decay", linear_decay},
          {"decay_start_epoch", decay_start_epoch},
          {"checkpoint_every", checkpoint_every},
          {"max_steps", max_steps},
          {"both_cycles", both_cycles}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc, TrainConfig base) {
  auto take = [&doc](const char* key, auto& field) {
    if (doc.contains(key)) field = doc.at(key).get<std::decay_t<decltype(field)>>();
  };
  try {
    take("learning_rate", base.learning_rate);
    take("adam_beta1", base.adam_beta1);
    take("adam_beta2", base.adam_beta2);
    take("batch_size", base.batch_size);
    take("epochs", base.epochs);
    take("buffer_capacity", base.buffer_capacity);
    take("unsup_lambda_c", base.loss_weights.unsupervised.lambda_c);
    take("unsup_lambda_cyc", base.loss_weights.unsupervised.lambda_cyc);
    take("unsup_lambda_m", base.loss_weights.unsupervised.lambda_m);
    take("unsup_lambda_id", base.loss_weights.unsupervised.lambda_id);
    take("sup_lambda_c", base.loss_weights.supervised.lambda_c);
    take("sup_lambda_cyc", base.loss_weights.supervised.lambda_cyc);
    take("sup_lambda_id", base.loss_weights.supervised.lambda_id);
    take("sup_lambda_vgg", base.loss_weights.supervised.lambda_vgg);
    take("sup_lambda_tv", base.loss_weights.supervised.lambda_tv);
    take("dual_discriminator", base.dual_discriminator);
    take("seed", base.seed);
    take("linear_decay", base.linear_decay);
    take("decay_start_epoch", base.decay_start_epoch);
    take("checkpoint_every", base.checkpoint_every);
    take("max_steps", base.max_steps);
    take("both_cycles", base.both_cycles);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed training config: ") + e.what());
  }
  return base;
}

ReplayBuffer::ReplayBuffer(int capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {
  if (capacity < 0) throw ValidationError("replay buffer capacity must be non-negative");
}

torch::Tensor ReplayBuffer::query(const torch::Tensor& fresh) {
  if (capacity_ == 0) return fresh.detach();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<torch::Tensor> out;
  for (int64_t i = 0; i < fresh.size(0); ++i) {
    auto image = fresh[i].detach().clone();
    if (storage_.size() < static_cast<std::size_t>(capacity_)) {
      storage_.push_back(image);
      out.push_back(image);
    } else if (coin(rng_) < 0.5) {
      out.push_back(image);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
      const auto slot = pick(rng_);
      out.push_back(storage_[slot]);
      storage_[slot] = image;
    }
  }
  return torch::stack(out);
}

nlohmann::json StepReport::to_json() const {
  nlohmann::json doc{{"step", step}, {"epoch", epoch}};
  for (const auto& [k, v] : values) doc[k] = v;
  return doc;
}

namespace {

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& cfg) {
  if (params.empty()) return nullptr;
  return std::make_unique<torch::optim::Adam>(
      params, torch::optim::AdamOptions(cfg.learning_rate).betas({cfg.adam_beta1, cfg.adam_beta2}));
}

void set_requires_grad(const std::vector<torch::Tensor>& params, bool flag) {
  for (auto p : params) p.requires_grad_(flag);
}

void zero_grads(const std::vector<torch::Tensor>& params) {
  for (auto p : params) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

double checked(const std::string& name, const torch::Tensor& value) {
  const double v = value.item<double>();
  if (!std::isfinite(v)) throw TrainingError(name, "non-finite loss value");
  return v;
}

torch::Tensor zero_like_scalar(const torch::Tensor& ref) { return torch::zeros({}, ref.options()); }

// Parameters a sub-update may touch: everything else is frozen while it runs.
struct Freezer {
  std::vector<torch::Tensor> all;
  explicit Freezer(std::vector<torch::Tensor> params) : all(std::move(params)) {}
  void only(const std::vector<torch::Tensor>& active) {
    set_requires_grad(all, false);
    set_requires_grad(active, true);
    zero_grads(all);
  }
  ~Freezer() { set_requires_grad(all, true); }
};

std::vector<torch::Tensor> concat(std::vector<torch::Tensor> a, const std::vector<torch::Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

UnsupervisedModels make_unsupervised_models(const GeneratorPairSpec& pair_spec, const DiscriminatorSpec& d_spec,
                                            const TrainConfig& cfg, int image_channels, int image_size) {
  cfg.validate();
  if (!std::holds_alternative<LabelGuidanceSpec>(pair_spec.guidance) ||
      !std::holds_alternative<MultidomainKind>(d_spec.kind)) {
    throw ValidationError("unsupervised training needs label guidance and a multidomain discriminator");
  }
  torch::manual_seed(cfg.seed);
  UnsupervisedModels models;
  models.generators = build_pair(pair_spec, image_channels, image_size);
  auto spec = d_spec;
  spec.dual = spec.dual || cfg.dual_discriminator;
  models.discriminator = build_discriminator(spec, image_size);
  models.d_opt = make_adam(models.discriminator->parameters(), cfg);
  models.gt_opt = make_adam(models.generators.translate_parameters(), cfg);
  models.gr_opt = make_adam(models.generators.reconstruct_parameters(), cfg);
  models.buffer = ReplayBuffer(cfg.buffer_capacity, cfg.seed + 1);
  models.num_domains = std::get<LabelGuidanceSpec>(pair_spec.guidance).num_domains;
  return models;
}

SupervisedModels make_supervised_models(const GeneratorPairSpec& pair_spec, const DiscriminatorSpec& d_spec,
                                        const TrainConfig& cfg, int image_channels, int image_size,
                                        std::shared_ptr<const FeatureExtractor> extractor) {
  cfg.validate();
  if (!std::holds_alternative<SkeletonGuidanceSpec>(pair_spec.guidance) ||
      !std::holds_alternative<TripletKind>(d_spec.kind)) {
    throw ValidationError("supervised training needs skeleton guidance and a triplet discriminator");
  }
  torch::manual_seed(cfg.seed);
  SupervisedModels models;
  models.generators = build_pair(pair_spec, image_channels, image_size);
  auto spec = d_spec;
  spec.dual = spec.dual || cfg.dual_discriminator;
  models.discriminator = build_discriminator(spec, image_size);
  models.d_opt = make_adam(models.discriminator->parameters(), cfg);
  models.gt_opt = make_adam(models.generators.translate_parameters(), cfg);
  models.gr_opt = make_adam(models.generators.reconstruct_parameters(), cfg);
  models.buffer = ReplayBuffer(cfg.buffer_capacity, cfg.seed + 1);
  models.extractor = extractor ? std::move(extractor) : std::make_shared<RandomConvExtractor>(cfg.seed);
  return models;
}

torch::Tensor sample_targets(const torch::Tensor& source, int num_domains, std::mt19937_64& rng) {
  if (num_domains < 2) throw ValidationError("target sampling needs at least 2 domains");
  auto src = source.to(torch::kLong).contiguous();
  auto out = torch::empty_like(src);
  std::uniform_int_distribution<int64_t> pick(0, num_domains - 2);
  for (int64_t i = 0; i < src.numel(); ++i) {
    int64_t t = pick(rng);
    if (t >= src[i].item<int64_t>()) ++t;
    out[i] = t;
  }
  return out;
}

StepReport train_step_unsup(UnsupervisedModels& models, const UnpairedBatch& batch, const torch::Tensor& target,
                            const TrainConfig& cfg, const SubUpdateObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  const auto& w = cfg.loss_weights.unsupervised;
  auto& gt = models.generators.translate;
  auto& gr = models.generators.reconstruct;
  auto& disc = models.discriminator;
  const auto& x = batch.images;
  const auto z_x = one_hot_batch(batch.domains, models.num_domains);
  const auto z_y = one_hot_batch(target, models.num_domains);
  if ((batch.domains.to(torch::kLong) == target.to(torch::kLong)).any().item<bool>()) {
    throw ValidationError("target domain must differ from the source domain");
  }

  const auto d_params = disc->parameters();
  const auto gt_params = models.generators.translate_parameters();
  const auto gr_params = models.generators.reconstruct_parameters();
  const bool reconstruct_owns = models.gr_opt != nullptr;
  Freezer freezer(concat(concat(d_params, gt_params), gr_params));
  StepReport report;
  report.step = models.step;

  // (1) discriminator
  {
    freezer.only(d_params);
    torch::Tensor fake;
    {
      torch::NoGradGuard no_grad;
      fake = gt->forward(x, LabelGuidance{z_y});
    }
    auto pooled = models.buffer.query(fake);
    auto real_out = disc->forward_multidomain(x);
    auto fake_out = disc->forward_multidomain(pooled);
    auto adv = zero_like_scalar(x);
    auto cls = zero_like_scalar(x);
    for (std::size_t s = 0; s < real_out.size(); ++s) {
      adv = adv + lsgan_d(real_out[s].src_map, fake_out[s].src_map);
      cls = cls + domain_cls(*real_out[s].class_logits, batch.domains);
    }
    const double scales = static_cast<double>(real_out.size());
    adv = adv / scales;
    cls = cls / scales;
    auto total = adv + w.lambda_c * cls;
    report.values["d_adv"] = checked("d_adv", adv);
    report.values["d_cls"] = checked("d_cls", cls);
    report.values["d_total"] = checked("d_total", total);
    total.backward();
    models.d_opt->step();
    if (observer) observer(SubUpdate::Discriminator);
  }

  // (2) translation generator, gradients through the full cycle
  torch::Tensor fake_detached;
  {
    freezer.only(gt_params);
    auto fake = gt->forward(x, LabelGuidance{z_y});
    auto rec = gr->forward(fake, LabelGuidance{z_x});
    auto outs = disc->forward_multidomain(fake);
    auto adv = zero_like_scalar(x);
    auto cls = zero_like_scalar(x);
    for (const auto& o : outs) {
      adv = adv + lsgan_g(o.src_map);
      cls = cls + domain_cls(*o.class_logits, target);
    }
    adv = adv / static_cast<double>(outs.size());
    cls = cls / static_cast<double>(outs.size());
    UnsupervisedTerms<torch::Tensor> terms{adv, cls, color_cycle(rec, x), msssim_loss(rec, x, cfg.ssim),
                                           zero_like_scalar(x)};
    if (!reconstruct_owns && w.lambda_id > 0.0) {
      // Fully shared generators: the identity term has no separate owner.
      terms.id = identity_unsup(gr->forward(x, LabelGuidance{z_x}), x);
    }
    auto total = full_unsup(terms, w);
    report.values["g_adv"] = checked("g_adv", adv);
    report.values["g_cls"] = checked("g_cls", cls);
    report.values["g_colorcyc"] = checked("g_colorcyc", terms.colorcyc);
    report.values["g_msssim"] = checked("g_msssim", terms.msssim_loss);
    report.values["g_total"] = checked("g_total", total);
    report.values["cycle_l1"] = checked("cycle_l1", cycle_l1(rec.detach(), x));
    total.backward();
    models.gt_opt->step();
    fake_detached = fake.detach();
    if (observer) observer(SubUpdate::Translate);
  }

  // (3) reconstruction generator on the detached translation
  if (reconstruct_owns) {
    freezer.only(gr_params);
    auto rec = gr->forward(fake_detached, LabelGuidance{z_x});
    auto colorcyc = color_cycle(rec, x);
    auto ms = msssim_loss(rec, x, cfg.ssim);
    auto id = identity_unsup(gr->forward(x, LabelGuidance{z_x}), x);
    auto total = w.lambda_cyc * colorcyc + w.lambda_m * ms + w.lambda_id * id;
    report.values["r_colorcyc"] = checked("r_colorcyc", colorcyc);
    report.values["r_msssim"] = checked("r_msssim", ms);
    report.values["r_id"] = checked("r_id", id);
    report.values["r_total"] = checked("r_total", total);
    total.backward();
    models.gr_opt->step();
    if (observer) observer(SubUpdate::Reconstruct);
  }

  ++models.step;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

StepReport train_step_sup(SupervisedModels& models, const PairedBatch& batch, const TrainConfig& cfg,
                          const SubUpdateObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  const auto& w = cfg.loss_weights.supervised;
  auto& gt = models.generators.translate;
  auto& gr = models.generators.reconstruct;
  auto& disc = models.discriminator;
  const auto& [x, l_x, y, l_y] = batch;
  for (const auto* t : {&l_x, &y, &l_y}) {
    if (!t->sizes().equals(x.sizes())) throw ShapeError("paired batch tensors must share one shape");
  }

  const auto d_params = disc->parameters();
  const auto gt_params = models.generators.translate_parameters();
  const auto gr_params = models.generators.reconstruct_parameters();
  const bool reconstruct_owns = models.gr_opt != nullptr;
  Freezer freezer(concat(concat(d_params, gt_params), gr_params));
  StepReport report;
  report.step = models.step;

  auto mean_over = [](const std::vector<DiscriminatorOutput>& outs, auto&& fn) {
    auto acc = fn(outs[0]);
    for (std::size_t s = 1; s < outs.size(); ++s) acc = acc + fn(outs[s]);
    return acc / static_cast<double>(outs.size());
  };

  // (1) discriminator on real vs generated triplets
  {
    freezer.only(d_params);
    torch::Tensor y_fake, x_fake;
    {
      torch::NoGradGuard no_grad;
      y_fake = gt->forward(x, SkeletonGuidance{l_y});
      if (cfg.both_cycles) x_fake = gt->forward(y, SkeletonGuidance{l_x});
    }
    auto fake_triplets = torch::cat({x, l_y, y_fake}, 1);
    if (cfg.both_cycles) fake_triplets = torch::cat({fake_triplets, torch::cat({y, l_x, x_fake}, 1)}, 0);
    auto pooled = models.buffer.query(fake_triplets);
    auto real_triplets = torch::cat({x, l_y, y}, 1);
    if (cfg.both_cycles) real_triplets = torch::cat({real_triplets, torch::cat({y, l_x, x}, 1)}, 0);
    auto real_out = disc->forward_stacked(real_triplets);
    auto fake_out = disc->forward_stacked(pooled);
    auto adv = zero_like_scalar(x);
    for (std::size_t s = 0; s < real_out.size(); ++s) adv = adv + lsgan_d(real_out[s].src_map, fake_out[s].src_map);
    adv = adv / static_cast<double>(real_out.size());
    report.values["d_adv"] = checked("d_adv", adv);
    report.values["d_total"] = report.values["d_adv"];
    adv.backward();
    models.d_opt->step();
    if (observer) observer(SubUpdate::Discriminator);
  }

  // (2) translation generator over both cycle directions
  torch::Tensor y_detached, x_detached;
  {
    freezer.only(gt_params);
    auto y_fake = gt->forward(x, SkeletonGuidance{l_y});
    auto x_rec = gr->forward(y_fake, SkeletonGuidance{l_x});
    auto lsg = [](const DiscriminatorOutput& o) { return lsgan_g(o.src_map); };
    SupervisedTerms<torch::Tensor> terms{mean_over(disc->forward_triplet(x, l_y, y_fake), lsg),
                                         color_paired(y_fake, y),
                                         cycle_l1(x_rec, x),
                                         zero_like_scalar(x),
                                         zero_like_scalar(x),
                                         total_variation(y_fake)};
    if (w.lambda_vgg > 0.0) terms.vgg = perceptual(y_fake, y, *models.extractor);
    if (cfg.both_cycles) {
      auto x_fake = gt->forward(y, SkeletonGuidance{l_x});
      auto y_rec = gr->forward(x_fake, SkeletonGuidance{l_y});
      terms.cgan = terms.cgan + mean_over(disc->forward_triplet(y, l_x, x_fake), lsg);
      terms.color = terms.color + color_paired(x_fake, x);
      terms.cyc = terms.cyc + cycle_l1(y_rec, y);
      terms.tv = terms.tv + total_variation(x_fake);
      if (w.lambda_vgg > 0.0) terms.vgg = terms.vgg + perceptual(x_fake, x, *models.extractor);
      x_detached = x_fake.detach();
    }
    if (w.lambda_id > 0.0) {
      terms.id = identity_sup(gt->forward(x, SkeletonGuidance{l_x}), x, gt->forward(y, SkeletonGuidance{l_y}), y);
    }
    auto total = full_sup(terms, w);
    report.values["g_cgan"] = checked("g_cgan", terms.cgan);
    report.values["g_color"] = checked("g_color", terms.color);
    report.values["g_cyc"] = checked("g_cyc", terms.cyc);
    report.values["g_id"] = checked("g_id", terms.id);
    report.values["g_vgg"] = checked("g_vgg", terms.vgg);
    report.values["g_tv"] = checked("g_tv", terms.tv);
    report.values["g_total"] = checked("g_total", total);
    total.backward();
    models.gt_opt->step();
    y_detached = y_fake.detach();
    if (observer) observer(SubUpdate::Translate);
  }

  // (3) reconstruction generator on detached translations
  if (reconstruct_owns) {
    freezer.only(gr_params);
    auto cyc = cycle_l1(gr->forward(y_detached, SkeletonGuidance{l_x}), x);
    if (cfg.both_cycles) cyc = cyc + cycle_l1(gr->forward(x_detached, SkeletonGuidance{l_y}), y);
    auto total = w.lambda_cyc * cyc;
    report.values["r_cyc"] = checked("r_cyc", cyc);
    report.values["r_total"] = checked("r_total", total);
    total.backward();
    models.gr_opt->step();
    if (observer) observer(SubUpdate::Reconstruct);
  }

  ++models.step;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

UnpairedBatch load_unpaired(const DatasetManifest& manifest) {
  if (manifest.mode != DatasetMode::UnpairedMultidomain) throw ValidationError("manifest is not unpaired");
  std::vector<torch::Tensor> images;
  std::vector<int64_t> domains;
  for (const auto& s : manifest.samples) {
    images.push_back(load_image(s.image, manifest.image_size));
    domains.push_back(s.domain);
  }
  return {torch::cat(images, 0), torch::tensor(domains, torch::kLong)};
}

namespace {

struct PairedData {
  torch::Tensor images;
  torch::Tensor skeletons;
  std::vector<std::vector<int64_t>> partners;  // candidate y indices per x
};

PairedData load_paired(const DatasetManifest& manifest) {
  const auto train = manifest.split("train");
  if (train.size() < 2) throw ValidationError("paired training needs at least two training samples");
  PairedData data;
  std::vector<torch::Tensor> images, skeletons;
  for (const auto& s : train) {
    images.push_back(load_image(s.image, manifest.image_size));
    skeletons.push_back(load_image(*s.skeleton, manifest.image_size));
  }
  data.images = torch::cat(images, 0);
  data.skeletons = torch::cat(skeletons, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    std::vector<int64_t> same_group, others;
    for (std::size_t j = 0; j < train.size(); ++j) {
      if (i == j) continue;
      (train[j].group == train[i].group ? same_group : others).push_back(static_cast<int64_t>(j));
    }
    data.partners.push_back(same_group.empty() ? others : same_group);
  }
  return data;
}

double decayed_rate(const TrainConfig& cfg, int epoch) {
  if (!cfg.linear_decay || epoch < cfg.decay_start_epoch) return cfg.learning_rate;
  const double span = std::max(1, cfg.epochs - cfg.decay_start_epoch);
  return cfg.learning_rate * std::max(0.0, 1.0 - (epoch - cfg.decay_start_epoch) / span);
}

void set_rate(torch::optim::Adam* opt, double lr) {
  if (!opt) return;
  for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

}  // namespace

fs::path train_loop(const DatasetManifest& manifest, const GeneratorPairSpec& pair_spec,
                    const DiscriminatorSpec& d_spec, const TrainConfig& cfg, const fs::path& out_dir,
                    const TrainCallbacks& callbacks) {
  cfg.validate();
  const bool unpaired = manifest.mode == DatasetMode::UnpairedMultidomain;
  if (unpaired != std::holds_alternative<LabelGuidanceSpec>(pair_spec.guidance)) {
    throw ValidationError("dataset mode " + to_string(manifest.mode) + " does not match the generator guidance");
  }
  if (unpaired && std::get<LabelGuidanceSpec>(pair_spec.guidance).num_domains != manifest.num_domains()) {
    throw ValidationError("generator spec domain count differs from the dataset's " +
                          std::to_string(manifest.num_domains()));
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw TrainingError("output", "cannot create '" + out_dir.string() + "': " + ec.message());
  std::ofstream log(out_dir / "log.jsonl");
  if (!log) throw TrainingError("log", "cannot open " + (out_dir / "log.jsonl").string());

  const int channels = 3;
  const int size = manifest.image_size;
  std::mt19937_64 rng(cfg.seed + 2);

  CheckpointMeta meta;
  meta.pair = pair_spec;
  meta.discriminator = d_spec;
  meta.discriminator.dual = d_spec.dual || cfg.dual_discriminator;
  meta.image_channels = channels;
  meta.image_size = size;
  meta.domains = manifest.domains;

  std::optional<UnsupervisedModels> unsup;
  std::optional<SupervisedModels> sup;
  UnpairedBatch unpaired_data;
  PairedData paired_data;
  int64_t count = 0;
  if (unpaired) {
    unsup.emplace(make_unsupervised_models(pair_spec, d_spec, cfg, channels, size));
    unpaired_data = load_unpaired(manifest);
    count = unpaired_data.images.size(0);
  } else {
    sup.emplace(make_supervised_models(pair_spec, d_spec, cfg, channels, size, nullptr));
    paired_data = load_paired(manifest);
    count = paired_data.images.size(0);
  }

  auto save = [&](const fs::path& path) {
    try {
      if (unsup) {
        save_checkpoint(path, meta, unsup->generators, unsup->discriminator);
      } else {
        save_checkpoint(path, meta, sup->generators, sup->discriminator);
      }
    } catch (const Error& e) {
      throw TrainingError("checkpoint", e.what());
    }
    if (callbacks.on_checkpoint) callbacks.on_checkpoint(path);
  };

  std::vector<int64_t> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);
  int64_t steps = 0;
  bool done = false;
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    const double lr = decayed_rate(cfg, epoch);
    for (auto* m : {unsup ? unsup->d_opt.get() : sup->d_opt.get(), unsup ? unsup->gt_opt.get() : sup->gt_opt.get(),
                    unsup ? unsup->gr_opt.get() : sup->gr_opt.get()}) {
      set_rate(m, lr);
    }
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size() && !done; begin += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      auto idx = torch::tensor(std::vector<int64_t>(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                                    order.begin() + static_cast<std::ptrdiff_t>(end)),
                               torch::kLong);
      StepReport report;
      if (unsup) {
        UnpairedBatch batch{unpaired_data.images.index_select(0, idx), unpaired_data.domains.index_select(0, idx)};
        auto target = sample_targets(batch.domains, unsup->num_domains, rng);
        report = train_step_unsup(*unsup, batch, target, cfg);
      } else {
        std::vector<int64_t> partner;
        for (int64_t i = 0; i < idx.numel(); ++i) {
          const auto& cands = paired_data.partners[static_cast<std::size_t>(idx[i].item<int64_t>())];
          std::uniform_int_distribution<std::size_t> pick(0, cands.size() - 1);
          partner.push_back(cands[pick(rng)]);
        }
        auto pidx = torch::tensor(partner, torch::kLong);
        PairedBatch batch{paired_data.images.index_select(0, idx), paired_data.skeletons.index_select(0, idx),
                          paired_data.images.index_select(0, pidx), paired_data.skeletons.index_select(0, pidx)};
        report = train_step_sup(*sup, batch, cfg);
      }
      report.epoch = epoch;
      log << report.to_json().dump() << '\n';
      log.flush();
      if (callbacks.on_step) callbacks.on_step(report);
      ++steps;
      if (cfg.max_steps > 0 && steps >= cfg.max_steps) done = true;
    }
    if ((epoch + 1) % cfg.checkpoint_every == 0 && !done) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.pt", epoch + 1);
      save(out_dir / name);
    }
  }
  const auto final_path = out_dir / "checkpoint_final.pt";
  save(final_path);
  return final_path;
}

}  // namespace asymgan
