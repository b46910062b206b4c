#include "asymgan/image_io.hpp"

#include <png.h>

#include <cstring>

#include "asymgan/errors.hpp"

namespace asymgan {

Raster read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IngestionError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Raster raster(static_cast<int>(image.width), static_cast<int>(image.height), gray ? 1 : 3);
  if (!png_image_finish_read(&image, nullptr, raster.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IngestionError("cannot decode PNG '" + path.string() + "': " + image.message);
  }
  return raster;
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3) {
    throw ValidationError("write_png supports 1 or 3 channels, got " + std::to_string(raster.channels));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = raster.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, raster.pixels.data(), 0, nullptr)) {
    throw IngestionError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

}  // namespace asymgan
