#include "asymgan/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "asymgan/errors.hpp"

namespace fs = std::filesystem;

namespace asymgan {

Hsv rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  double h = 0.0;
  if (delta > 0.0) {
    if (mx == r) {
      h = 60.0 * std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      h = 60.0 * ((b - r) / delta + 2.0);
    } else {
      h = 60.0 * ((r - g) / delta + 4.0);
    }
  }
  if (h < 0.0) h += 360.0;
  return {h, mx > 0.0 ? delta / mx : 0.0, mx};
}

void hsv_to_rgb(const Hsv& hsv, double& r, double& g, double& b) {
  double h = std::fmod(hsv.h, 360.0);
  if (h < 0.0) h += 360.0;
  const double c = hsv.v * hsv.s;
  const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  const double m = hsv.v - c;
  double rp = 0, gp = 0, bp = 0;
  switch (static_cast<int>(h / 60.0)) {
    case 0: rp = c; gp = x; break;
    case 1: rp = x; gp = c; break;
    case 2: gp = c; bp = x; break;
    case 3: gp = x; bp = c; break;
    case 4: rp = x; bp = c; break;
    default: rp = c; bp = x; break;
  }
  r = rp + m;
  g = gp + m;
  b = bp + m;
}

namespace {

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IngestionError("cannot create output directory '" + dir.string() + "': " + ec.message());
  }
}

std::mt19937_64 rng_for(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void put_hsv(Raster& img, int x, int y, const Hsv& hsv) {
  double r, g, b;
  hsv_to_rgb(hsv, r, g, b);
  img.at(x, y, 0) = to_byte(r);
  img.at(x, y, 1) = to_byte(g);
  img.at(x, y, 2) = to_byte(b);
}

struct Shape {
  bool circle;
  double cx, cy, a, b;  // circle: radius a; rectangle: half extents a, b
  Hsv color;
  bool contains(double x, double y) const {
    if (circle) return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= a * a;
    return std::fabs(x - cx) <= a && std::fabs(y - cy) <= b;
  }
};

// A red-hued scene: every pixel hue within a few degrees of 0.
Raster render_scene(std::mt19937_64& rng, int size, double hue_shift) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&] { return (unit(rng) - 0.5) * 8.0; };
  const Hsv background{jitter(), 0.35 + 0.25 * unit(rng), 0.25 + 0.2 * unit(rng)};
  std::vector<Shape> shapes;
  const int count = 3 + static_cast<int>(unit(rng) * 4.0);
  for (int i = 0; i < count; ++i) {
    Shape s;
    s.circle = unit(rng) < 0.5;
    s.cx = unit(rng) * size;
    s.cy = unit(rng) * size;
    s.a = size * (0.08 + 0.17 * unit(rng));
    s.b = size * (0.08 + 0.17 * unit(rng));
    s.color = {jitter(), 0.55 + 0.45 * unit(rng), 0.5 + 0.5 * unit(rng)};
    shapes.push_back(s);
  }
  Raster img(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Hsv c = background;
      for (const auto& s : shapes) {
        if (s.contains(x + 0.5, y + 0.5)) c = s.color;
      }
      c.h += hue_shift;
      put_hsv(img, x, y, c);
    }
  }
  return img;
}

struct Point {
  double x, y;
};

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double qx = a.x + t * dx - p.x, qy = a.y + t * dy - p.y;
  return std::sqrt(qx * qx + qy * qy);
}

struct HandPose {
  Point palm;
  double palm_radius;
  std::vector<std::array<Point, 3>> fingers;  // base, knuckle, tip
};

HandPose random_pose(std::mt19937_64& rng, int size) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double deg = std::numbers::pi / 180.0;
  HandPose pose;
  pose.palm = {size * (0.45 + 0.1 * unit(rng)), size * (0.6 + 0.08 * unit(rng))};
  pose.palm_radius = size * 0.13;
  const double roll = (unit(rng) - 0.5) * 50.0;
  const std::array<double, 5> base_angles{-165.0, -120.0, -90.0, -65.0, -40.0};
  for (double base : base_angles) {
    const double flex = unit(rng);
    const double a0 = (base + roll) * deg;
    const Point root{pose.palm.x + pose.palm_radius * std::cos(a0), pose.palm.y + pose.palm_radius * std::sin(a0)};
    const double len = size * 0.14 * (1.0 - 0.5 * flex);
    const double bend = (unit(rng) - 0.5) * 30.0 * deg + flex * 50.0 * deg;
    const Point knuckle{root.x + len * std::cos(a0), root.y + len * std::sin(a0)};
    const Point tip{knuckle.x + 0.8 * len * std::cos(a0 + bend), knuckle.y + 0.8 * len * std::sin(a0 + bend)};
    pose.fingers.push_back({root, knuckle, tip});
  }
  return pose;
}

Raster render_skeleton(const HandPose& pose, int size) {
  static constexpr std::array<double, 5> finger_hues{0.0, 60.0, 120.0, 200.0, 280.0};
  Raster img(size, size, 3);
  const double width = std::max(1.0, size / 48.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Point p{x + 0.5, y + 0.5};
      for (std::size_t f = 0; f < pose.fingers.size(); ++f) {
        const auto& fj = pose.fingers[f];
        const double d = std::min({segment_distance(p, pose.palm, fj[0]), segment_distance(p, fj[0], fj[1]),
                                   segment_distance(p, fj[1], fj[2])});
        if (d <= width) put_hsv(img, x, y, {finger_hues[f], 1.0, 1.0});
      }
      const double dp = std::hypot(p.x - pose.palm.x, p.y - pose.palm.y);
      if (dp <= 1.5 * width) put_hsv(img, x, y, {0.0, 0.0, 1.0});
    }
  }
  return img;
}

struct Palette {
  Hsv background;
  Hsv skin;
};

Raster render_hand(const HandPose& pose, const Palette& palette, int size) {
  Raster img(size, size, 3);
  const double thickness = size * 0.045;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Point p{x + 0.5, y + 0.5};
      Hsv c = palette.background;
      c.v = std::clamp(c.v * (0.85 + 0.3 * y / size), 0.0, 1.0);
      double d = std::hypot(p.x - pose.palm.x, p.y - pose.palm.y) - pose.palm_radius;
      for (const auto& fj : pose.fingers) {
        d = std::min({d, segment_distance(p, fj[0], fj[1]) - thickness, segment_distance(p, fj[1], fj[2]) - thickness});
      }
      if (d <= 0.0) {
        c = palette.skin;
        c.v = std::clamp(c.v * (1.0 + 0.15 * d / thickness), 0.0, 1.0);
      }
      put_hsv(img, x, y, c);
    }
  }
  return img;
}

char* format_name(char* buf, std::size_t n, const char* fmt, int a, int b) {
  std::snprintf(buf, n, fmt, a, b);
  return buf;
}

}  // namespace

DatasetManifest synth_multidomain(const fs::path& out_root, int m, int n_per_domain, int size, std::uint64_t seed) {
  if (m < 2) throw ValidationError("synth_multidomain needs m >= 2, got " + std::to_string(m));
  if (size < 32) throw ValidationError("synth_multidomain needs size >= 32, got " + std::to_string(size));
  if (n_per_domain < 1) throw ValidationError("synth_multidomain needs at least one image per domain");
  for (int k = 0; k < m; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "hue_%03d", static_cast<int>(std::lround(k * 360.0 / m)));
    const auto dir = out_root / name;
    ensure_directory(dir);
    for (int i = 0; i < n_per_domain; ++i) {
      auto rng = rng_for(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i));
      const auto img = render_scene(rng, size, k * 360.0 / m);
      char file[32];
      write_png(dir / format_name(file, sizeof(file), "img_%04d.png", i, 0), img);
    }
  }
  return load_manifest(out_root, DatasetMode::UnpairedMultidomain, size);
}

DatasetManifest synth_paired(const fs::path& out_root, int n_subjects, int poses_per_subject, int size,
                             std::uint64_t seed, int test_subjects) {
  if (n_subjects < 1 || poses_per_subject < 2) {
    throw ValidationError("synth_paired needs at least one subject with two poses");
  }
  if (size < 32) throw ValidationError("synth_paired needs size >= 32, got " + std::to_string(size));
  test_subjects = std::clamp(test_subjects, 0, n_subjects - 1);
  for (int s = 0; s < n_subjects; ++s) {
    const std::string split = s >= n_subjects - test_subjects ? "test" : "train";
    const auto images_dir = out_root / split / "images";
    const auto skeletons_dir = out_root / split / "skeletons";
    ensure_directory(images_dir);
    ensure_directory(skeletons_dir);
    auto palette_rng = rng_for(seed, 1000003u, static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Palette palette;
    palette.background = {unit(palette_rng) * 360.0, 0.15 + 0.3 * unit(palette_rng), 0.3 + 0.5 * unit(palette_rng)};
    palette.skin = {10.0 + 30.0 * unit(palette_rng), 0.3 + 0.4 * unit(palette_rng), 0.6 + 0.4 * unit(palette_rng)};
    for (int p = 0; p < poses_per_subject; ++p) {
      auto rng = rng_for(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(p));
      const auto pose = random_pose(rng, size);
      char file[48];
      write_png(images_dir / format_name(file, sizeof(file), "img_s%03d_p%03d.png", s, p),
                render_hand(pose, palette, size));
      write_png(skeletons_dir / format_name(file, sizeof(file), "skeleton_s%03d_p%03d.png", s, p),
                render_skeleton(pose, size));
    }
  }
  return load_manifest(out_root, DatasetMode::PairedSkeleton, size);
}

}  // namespace asymgan
