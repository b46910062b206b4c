#include <gtest/gtest.h>

#include "asymgan/checkpoint.hpp"
#include "asymgan/errors.hpp"
#include "asymgan/generators.hpp"
#include "temp_dir.hpp"

using namespace asymgan;

namespace {

GeneratorPairSpec label_pair(ArchTier t, ArchTier r, SharingMode sharing, int m = 7) {
  GeneratorPairSpec s;
  s.translate_arch = t;
  s.reconstruct_arch = r;
  s.sharing = sharing;
  s.guidance = LabelGuidanceSpec{m, 64};
  return s;
}

GeneratorPairSpec skeleton_pair() {
  GeneratorPairSpec s;
  s.translate_arch = ArchTier::resnet9(64);
  s.reconstruct_arch = ArchTier::resnet9(4);
  s.sharing = SharingMode::None;
  s.guidance = SkeletonGuidanceSpec{3};
  return s;
}

bool within(double value, double target, double fraction) { return std::abs(value - target) <= fraction * target; }

}  // namespace

TEST(ParameterCount, SingleConvLayer) {
  torch::nn::Conv2d conv(torch::nn::Conv2dOptions(3, 8, 3).bias(true));
  EXPECT_EQ(count_parameters(*conv), 9 * 3 * 8 + 8);
}

TEST(ParameterCount, TierTotals) {
  auto s1 = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::None), 3, 64);
  auto s2 = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_ii(), SharingMode::None), 3, 64);
  auto s3 = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_iii(), SharingMode::None), 3, 64);
  const auto t3 = count_parameters(*s1.translate);
  const auto t1 = count_parameters(*s1.reconstruct);
  const auto t2 = count_parameters(*s2.reconstruct);
  EXPECT_TRUE(within(t1, 2.9e3, 0.15)) << t1;
  EXPECT_TRUE(within(t2, 1.3e6, 0.15)) << t2;
  EXPECT_TRUE(within(t3, 8.4e6, 0.15)) << t3;
  // Pinned regression values for seven domains.
  EXPECT_EQ(t1, 2777);
  EXPECT_EQ(t2, 1413248);
  EXPECT_EQ(t3, 8497280);
  EXPECT_EQ(count_parameters(s1), t3 + t1);
  EXPECT_EQ(count_parameters(s2), t3 + t2);
  EXPECT_EQ(count_parameters(s3), 2 * t3);
}

TEST(ParameterCount, SupervisedPair) {
  auto pair = build_pair(skeleton_pair(), 3, 64);
  const auto t = count_parameters(*pair.translate);
  const auto r = count_parameters(*pair.reconstruct);
  EXPECT_TRUE(within(t, 11.388e6, 0.05)) << t;
  EXPECT_TRUE(within(r, 0.046e6, 0.25)) << r;
  EXPECT_EQ(t, 11387587);
  EXPECT_EQ(r, 46447);
}

TEST(ParameterCount, FullSharingCountsOneGenerator) {
  auto full = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_iii(), SharingMode::Full), 3, 64);
  auto single = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::None), 3, 64);
  EXPECT_EQ(full.translate.get(), full.reconstruct.get());
  EXPECT_EQ(count_parameters(full), count_parameters(*single.translate));
  EXPECT_TRUE(full.reconstruct_parameters().empty());
}

TEST(ParameterCount, PartialSharingSubtractsEncoder) {
  for (auto r : {ArchTier::tier_ii(), ArchTier::tier_iii()}) {
    auto none = build_pair(label_pair(ArchTier::tier_iii(), r, SharingMode::None), 3, 64);
    auto partial = build_pair(label_pair(ArchTier::tier_iii(), r, SharingMode::PartialEncoder), 3, 64);
    const auto encoder = count_parameters(*partial.reconstruct->encoder());
    EXPECT_GT(encoder, 0);
    EXPECT_EQ(count_parameters(partial), count_parameters(none) - encoder);
    EXPECT_EQ(partial.translate->encoder().get(), partial.reconstruct->encoder().get());
    EXPECT_EQ(count_parameters(partial.reconstruct_parameters()),
              count_parameters(*partial.reconstruct) - encoder);
  }
}

TEST(ParameterCount, SharedTensorCountedOnce) {
  auto partial = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_iii(), SharingMode::PartialEncoder), 3, 64);
  auto all = partial.translate_parameters();
  auto own = partial.reconstruct_parameters();
  all.insert(all.end(), own.begin(), own.end());
  EXPECT_EQ(count_parameters(all), count_parameters(partial));
}

TEST(Spec, FullSharingNeedsEqualTiers) {
  EXPECT_THROW(build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::Full), 3, 64), SpecError);
  EXPECT_THROW(build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::PartialEncoder), 3, 64),
               SpecError);
}

TEST(Spec, IndivisibleSize) {
  EXPECT_THROW(build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::None), 3, 66), ShapeError);
  EXPECT_NO_THROW(build_pair(label_pair(ArchTier::tier_i(), ArchTier::tier_i(), SharingMode::None), 3, 66));
}

TEST(Spec, JsonRoundTrip) {
  for (auto spec : {label_pair(ArchTier::tier_iii(), ArchTier::tier_ii(), SharingMode::PartialEncoder, 4),
                    skeleton_pair()}) {
    EXPECT_EQ(GeneratorPairSpec::from_json(spec.to_json()), spec);
  }
  EXPECT_EQ(ArchTier::parse("RESNET9(12)"), ArchTier::resnet9(12));
  EXPECT_EQ(ArchTier::parse(ArchTier::tier_ii().to_string()), ArchTier::tier_ii());
  EXPECT_THROW(ArchTier::parse("TIER_IV"), SpecError);
}

TEST(LabelEmbedding, ShapeAndSpatiallyConstant) {
  torch::manual_seed(0);
  auto pair = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::None, 4), 3, 64);
  auto z = DomainLabel(2, 4).one_hot().unsqueeze(0);
  auto e = pair.translate->embed_label(z, 16, 16);
  ASSERT_EQ(e.sizes(), (std::vector<int64_t>{1, 64, 16, 16}));
  auto first = e.index({torch::indexing::Slice(), torch::indexing::Slice(), 0, 0}).unsqueeze(-1).unsqueeze(-1);
  EXPECT_TRUE(torch::equal(e, first.expand_as(e)));
  EXPECT_TRUE(torch::equal(e, pair.translate->embed_label(z, 16, 16)));
  EXPECT_THROW(pair.translate->embed_label(torch::zeros({1, 4}), 16, 16), ValidationError);
}

TEST(Forward, LabelShapeRangeAndSensitivity) {
  torch::manual_seed(1);
  for (auto arch : {ArchTier::tier_i(), ArchTier::tier_ii(), ArchTier::tier_iii()}) {
    auto pair = build_pair(label_pair(arch, ArchTier::tier_i(), SharingMode::None, 3), 3, 64);
    auto& g = pair.translate;
    g->eval();
    auto x = torch::rand({1, 3, 64, 64}) * 2 - 1;
    auto a = g->forward(x, LabelGuidance{one_hot_batch(torch::tensor({0}), 3)});
    auto b = g->forward(x, LabelGuidance{one_hot_batch(torch::tensor({2}), 3)});
    EXPECT_EQ(a.sizes(), x.sizes()) << arch.to_string();
    EXPECT_LE(a.abs().max().item<double>(), 1.0);
    EXPECT_GT((a - b).abs().mean().item<double>(), 0.0) << arch.to_string();
    EXPECT_TRUE(torch::equal(a, g->forward(x, LabelGuidance{one_hot_batch(torch::tensor({0}), 3)})));
  }
}

TEST(Forward, ExtremeInputsStayInRange) {
  torch::manual_seed(2);
  auto pair = build_pair(label_pair(ArchTier::tier_ii(), ArchTier::tier_i(), SharingMode::None, 3), 3, 32);
  auto x = torch::sign(torch::randn({2, 3, 32, 32}));
  auto y = pair.translate->forward(x, LabelGuidance{one_hot_batch(torch::tensor({1, 2}), 3)});
  EXPECT_LE(y.abs().max().item<double>(), 1.0);
}

TEST(Forward, ArbitraryValidSizes) {
  auto pair = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::None, 3), 3, 64);
  auto x = torch::zeros({1, 3, 32, 48});
  auto y = pair.translate->forward(x, LabelGuidance{one_hot_batch(torch::tensor({1}), 3)});
  EXPECT_EQ(y.sizes(), x.sizes());
  EXPECT_THROW(pair.translate->forward(torch::zeros({1, 3, 30, 32}), LabelGuidance{one_hot_batch(torch::tensor({1}), 3)}),
               ShapeError);
}

TEST(Forward, SkeletonGuidance) {
  torch::manual_seed(3);
  auto spec = skeleton_pair();
  spec.translate_arch = ArchTier::resnet9(8);
  auto pair = build_pair(spec, 3, 64);
  auto x = torch::rand({1, 3, 64, 64}) * 2 - 1;
  auto l = torch::rand({1, 3, 64, 64}) * 2 - 1;
  auto y = pair.translate->forward(x, SkeletonGuidance{l});
  EXPECT_EQ(y.sizes(), x.sizes());
  EXPECT_THROW(pair.translate->forward(x, LabelGuidance{one_hot_batch(torch::tensor({1}), 3)}), ValidationError);
  EXPECT_THROW(pair.translate->forward(x, SkeletonGuidance{torch::zeros({1, 3, 32, 32})}), ShapeError);
  // The first layer sees image and skeleton stacked: 6 input channels.
  auto first = pair.translate->encoder()->parameters().front();
  EXPECT_EQ(first.size(1), 6);
}

TEST(Forward, GuidanceMismatch) {
  auto pair = build_pair(label_pair(ArchTier::tier_i(), ArchTier::tier_i(), SharingMode::None, 3), 3, 32);
  EXPECT_THROW(pair.translate->forward(torch::zeros({1, 3, 32, 32}), SkeletonGuidance{torch::zeros({1, 3, 32, 32})}),
               ValidationError);
}

TEST(Forward, GradientsReachEveryParameter) {
  torch::manual_seed(4);
  for (auto arch : {ArchTier::tier_i(), ArchTier::tier_ii(), ArchTier::tier_iii()}) {
    auto pair = build_pair(label_pair(arch, ArchTier::tier_i(), SharingMode::None, 3), 3, 32);
    auto x = torch::rand({2, 3, 32, 32}) * 2 - 1;
    pair.translate->forward(x, LabelGuidance{one_hot_batch(torch::tensor({0, 1}), 3)}).mean().backward();
    for (const auto& p : pair.translate->named_parameters()) {
      ASSERT_TRUE(p.value().grad().defined()) << arch.to_string() << " " << p.key();
      EXPECT_TRUE(torch::isfinite(p.value().grad()).all().item<bool>()) << p.key();
    }
  }
}

TEST(Checkpoint, RoundTripAndSpecCheck) {
  TempDir dir;
  torch::manual_seed(5);
  auto spec = label_pair(ArchTier::tier_ii(), ArchTier::tier_i(), SharingMode::None, 3);
  auto pair = build_pair(spec, 3, 32);
  DiscriminatorSpec d_spec;
  d_spec.kind = MultidomainKind{3, 3};
  d_spec.base_width = 8;
  auto disc = build_discriminator(d_spec, 32);
  CheckpointMeta meta{spec, d_spec, 3, 32, {"a", "b", "c"}};
  save_checkpoint(dir.path() / "c.pt", meta, pair, disc);

  torch::manual_seed(6);
  auto other = build_pair(spec, 3, 32);
  auto other_disc = build_discriminator(d_spec, 32);
  load_checkpoint(dir.path() / "c.pt", other, other_disc);
  auto x = torch::rand({1, 3, 32, 32});
  auto z = LabelGuidance{one_hot_batch(torch::tensor({1}), 3)};
  pair.translate->eval();
  other.translate->eval();
  EXPECT_TRUE(torch::equal(pair.translate->forward(x, z), other.translate->forward(x, z)));
  EXPECT_EQ(read_checkpoint_meta(dir.path() / "c.pt").domains, meta.domains);

  auto wrong = build_pair(label_pair(ArchTier::tier_iii(), ArchTier::tier_i(), SharingMode::None, 3), 3, 32);
  EXPECT_THROW(load_checkpoint(dir.path() / "c.pt", wrong, other_disc), SpecError);
  EXPECT_THROW(load_checkpoint(dir.path() / "missing.pt", other, other_disc), IngestionError);
}
