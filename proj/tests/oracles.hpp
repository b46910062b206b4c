#pragma once

// Reference computations written with plain loops over std::vector so they share no code with the library.

#include <torch/torch.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace oracle {

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// (1, c, h, w) tensor -> one plane per channel.
inline std::vector<Plane> planes(const torch::Tensor& t) {
  auto d = t.to(torch::kDouble).contiguous();
  const int c = static_cast<int>(d.size(1)), h = static_cast<int>(d.size(2)), w = static_cast<int>(d.size(3));
  const double* p = d.data_ptr<double>();
  std::vector<Plane> out(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    out[ch].h = h;
    out[ch].w = w;
    out[ch].v.assign(p + static_cast<std::size_t>(ch) * h * w, p + static_cast<std::size_t>(ch + 1) * h * w);
  }
  return out;
}

inline std::vector<double> gaussian(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size) * size);
  double sum = 0;
  const double c = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r2 = (x - c) * (x - c) + (y - c) * (y - c);
      g[static_cast<std::size_t>(y) * size + x] = std::exp(-r2 / (2 * sigma * sigma));
      sum += g[static_cast<std::size_t>(y) * size + x];
    }
  }
  for (auto& e : g) e /= sum;
  return g;
}

struct SsimParts {
  double lum_cs = 0;  // mean of l * cs
  double cs = 0;      // mean of cs
};

// Sliding-window SSIM over every valid window position of every channel.
inline SsimParts ssim_parts(const std::vector<Plane>& a, const std::vector<Plane>& b, double range = 2.0,
                            int window = 11, double sigma = 1.5) {
  const int k = std::min({window, a[0].h, a[0].w});
  const auto g = gaussian(k, sigma);
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  double sum_l = 0, sum_cs = 0;
  long count = 0;
  for (std::size_t ch = 0; ch < a.size(); ++ch) {
    for (int y = 0; y + k <= a[ch].h; ++y) {
      for (int x = 0; x + k <= a[ch].w; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            const double wgt = g[static_cast<std::size_t>(i) * k + j];
            const double va = a[ch].at(y + i, x + j), vb = b[ch].at(y + i, x + j);
            ma += wgt * va;
            mb += wgt * vb;
            saa += wgt * va * va;
            sbb += wgt * vb * vb;
            sab += wgt * va * vb;
          }
        }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        const double l = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        // c * s with C3 = C2 / 2 collapses to (2 cov + C2) / (var_a + var_b + C2).
        const double cs = (2 * cov + c2) / (var_a + var_b + c2);
        sum_l += l * cs;
        sum_cs += cs;
        ++count;
      }
    }
  }
  return {sum_l / count, sum_cs / count};
}

inline double ssim(const torch::Tensor& a, const torch::Tensor& b, double range = 2.0) {
  return ssim_parts(planes(a), planes(b), range).lum_cs;
}

inline Plane halve(const Plane& p) {
  Plane out;
  out.h = p.h / 2;
  out.w = p.w / 2;
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) + p.at(2 * y + 1, 2 * x) + p.at(2 * y + 1, 2 * x + 1)) / 4;
    }
  }
  return out;
}

// Explicit multi-scale loop: cs at every scale but the last, l * cs at the last.
inline double ms_ssim(const torch::Tensor& a, const torch::Tensor& b, double range = 2.0) {
  const std::array<double, 5> base{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  const int side = static_cast<int>(std::min(a.size(2), a.size(3)));
  int scales = 1;
  for (int m = 5; m >= 1; --m) {
    if (side >= 11 * (1 << (m - 1))) {
      scales = m;
      break;
    }
  }
  double wsum = 0;
  for (int j = 0; j < scales; ++j) wsum += base[j];
  auto pa = planes(a), pb = planes(b);
  double value = 1;
  for (int j = 0; j < scales; ++j) {
    const auto parts = ssim_parts(pa, pb, range);
    const double term = (j + 1 < scales) ? parts.cs : parts.lum_cs;
    value *= std::pow(std::max(term, 1e-6), base[j] / wsum);
    for (auto& p : pa) p = halve(p);
    for (auto& p : pb) p = halve(p);
  }
  return value;
}

inline double total_variation(const torch::Tensor& t) {
  double sum = 0;
  auto d = t.to(torch::kDouble).contiguous();
  for (int64_t n = 0; n < d.size(0); ++n) {
    for (const auto& p : planes(d[n].unsqueeze(0))) {
      for (int y = 0; y < p.h; ++y) {
        for (int x = 0; x < p.w; ++x) {
          if (x + 1 < p.w) sum += std::abs(p.at(y, x + 1) - p.at(y, x));
          if (y + 1 < p.h) sum += std::abs(p.at(y + 1, x) - p.at(y, x));
        }
      }
    }
  }
  return sum;
}

inline double mean_abs_diff(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = a.to(torch::kDouble).contiguous(), y = b.to(torch::kDouble).contiguous();
  const double* p = x.data_ptr<double>();
  const double* q = y.data_ptr<double>();
  double s = 0;
  for (int64_t i = 0; i < x.numel(); ++i) s += std::abs(p[i] - q[i]);
  return s / static_cast<double>(x.numel());
}

// (c, h, w) activations with zero padding outside.
struct Volume {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;
  double at(int ch, int y, int x) const {
    if (y < 0 || x < 0 || y >= h || x >= w) return 0.0;
    return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
  }
};

inline Volume volume_of(const torch::Tensor& img) {
  auto d = img.to(torch::kDouble).contiguous();
  Volume v{static_cast<int>(d.size(1)), static_cast<int>(d.size(2)), static_cast<int>(d.size(3)), {}};
  v.v.assign(d.data_ptr<double>(), d.data_ptr<double>() + d.numel());
  return v;
}

// 3x3 conv with padding 1, then tanh.
inline Volume conv3x3_tanh(const Volume& in, const torch::Tensor& weight, const torch::Tensor& bias, int stride) {
  auto wt = weight.to(torch::kDouble).contiguous();
  auto bt = bias.to(torch::kDouble).contiguous();
  const int out_c = static_cast<int>(wt.size(0));
  Volume out{out_c, (in.h - 1) / stride + 1, (in.w - 1) / stride + 1, {}};
  out.v.resize(static_cast<std::size_t>(out.c) * out.h * out.w);
  const double* wp = wt.data_ptr<double>();
  const double* bp = bt.data_ptr<double>();
  for (int o = 0; o < out_c; ++o) {
    for (int y = 0; y < out.h; ++y) {
      for (int x = 0; x < out.w; ++x) {
        double s = bp[o];
        for (int i = 0; i < in.c; ++i)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
              s += wp[((static_cast<std::size_t>(o) * in.c + i) * 3 + ky) * 3 + kx] *
                   in.at(i, y * stride + ky - 1, x * stride + kx - 1);
        out.v[(static_cast<std::size_t>(o) * out.h + y) * out.w + x] = std::tanh(s);
      }
    }
  }
  return out;
}

// Weighted sum over layers of the mean absolute feature difference, features recomputed by loops.
inline double conv_tanh_perceptual(const torch::Tensor& a, const torch::Tensor& b,
                                   const std::vector<torch::Tensor>& weights, const std::vector<torch::Tensor>& biases,
                                   const std::vector<int>& strides, const std::vector<double>& layer_weights) {
  Volume fa = volume_of(a), fb = volume_of(b);
  double total = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    fa = conv3x3_tanh(fa, weights[l], biases[l], strides[l]);
    fb = conv3x3_tanh(fb, weights[l], biases[l], strides[l]);
    double s = 0;
    for (std::size_t i = 0; i < fa.v.size(); ++i) s += std::abs(fa.v[i] - fb.v[i]);
    total += layer_weights[l] * s / static_cast<double>(fa.v.size());
  }
  return total;
}

// Hue in degrees of an RGB triple in [0, 1], by the hexcone formula.
inline double hue_degrees(double r, double g, double b) {
  const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  const double d = mx - mn;
  if (d <= 0) return 0;
  double h;
  if (mx == r) {
    h = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    h = (b - r) / d + 2;
  } else {
    h = (r - g) / d + 4;
  }
  h *= 60;
  return h < 0 ? h + 360 : h;
}

// Circular mean of per-pixel hue, weighted by chroma, of a (1, 3, h, w) tensor in [-1, 1].
inline double dominant_hue(const torch::Tensor& img) {
  auto p = planes(img);
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < p[0].v.size(); ++i) {
    const double r = (p[0].v[i] + 1) / 2, g = (p[1].v[i] + 1) / 2, b = (p[2].v[i] + 1) / 2;
    const double chroma = std::max({r, g, b}) - std::min({r, g, b});
    const double h = hue_degrees(r, g, b) * M_PI / 180;
    sx += chroma * std::cos(h);
    sy += chroma * std::sin(h);
  }
  double h = std::atan2(sy, sx) * 180 / M_PI;
  return h < 0 ? h + 360 : h;
}

inline double circular_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360 - d);
}

}  // namespace oracle
