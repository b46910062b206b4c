#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace asymgan {

/// Interleaved 8-bit raster, row-major, `channels` samples per pixel.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(int w, int h, int c) : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, 0) {}

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

/// Reads a PNG as 1-channel (gray) or 3-channel (RGB) raster; alpha is dropped.
Raster read_png(const std::filesystem::path& path);

/// Writes a gray (1) or RGB (3) raster. Throws IngestionError when the file cannot be written.
void write_png(const std::filesystem::path& path, const Raster& raster);

}  // namespace asymgan
