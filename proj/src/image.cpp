#include "collage/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "collage/errors.hpp"

namespace collage {

void write_png_gray(const std::filesystem::path& file, const Grid<std::uint8_t>& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, file.string().c_str(), 0, image.data.data(), image.width, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw ImageError("cannot write " + file.string() + ": " + msg);
  }
}

Grid<std::uint8_t> read_png_luminance(const std::filesystem::path& file) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, file.string().c_str())) {
    throw ImageError("cannot read " + file.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  Grid<std::uint8_t> out(static_cast<int>(img.width), static_cast<int>(img.height), 0);
  const png_color white{255, 255, 255};
  if (!png_image_finish_read(&img, &white, out.data.data(), out.width, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw ImageError("cannot decode " + file.string() + ": " + msg);
  }
  return out;
}

Grid<std::uint8_t> threshold_dark(const Grid<std::uint8_t>& luminance) {
  Grid<std::uint8_t> out(luminance.width, luminance.height, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = luminance.data[i] < 128 ? 1 : 0;
  return out;
}

Grid<std::uint8_t> composite_to_gray(const CoverageBuffer& buffer) {
  Grid<std::uint8_t> out(buffer.width(), buffer.height(), 255);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double c = std::clamp(buffer.composite.data[i], 0.0, 1.0);
    out.data[i] = static_cast<std::uint8_t>(std::lround(255.0 * c));
  }
  return out;
}

}  // namespace collage
