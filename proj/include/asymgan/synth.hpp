#pragma once

#include <cstdint>
#include <filesystem>

#include "asymgan/datamodel.hpp"

namespace asymgan {

/// Writes `m` domains of procedurally generated shape scenes under `out_root/hue_XXX/`.
/// Every scene is drawn with hues near 0 degrees; domain k rotates all hues by k * 360 / m.
/// Output is byte-identical for identical arguments.
DatasetManifest synth_multidomain(const std::filesystem::path& out_root, int m, int n_per_domain, int size,
                                  std::uint64_t seed);

/// Writes a paired image/skeleton corpus in the paired layout. Each subject has its own palette and
/// is rendered in `poses_per_subject` random hand poses; the last `test_subjects` subjects go to `test/`.
DatasetManifest synth_paired(const std::filesystem::path& out_root, int n_subjects, int poses_per_subject, int size,
                             std::uint64_t seed, int test_subjects = 1);

/// RGB (0..1) to hue in degrees [0, 360) plus saturation and value.
struct Hsv {
  double h, s, v;
};
Hsv rgb_to_hsv(double r, double g, double b);
void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b);

}  // namespace asymgan
