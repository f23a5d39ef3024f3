#pragma once

#include <cstdint>
#include <filesystem>

#include "collage/grid.hpp"
#include "collage/render.hpp"

namespace collage {

// 8-bit grayscale PNG; throws ImageError.
void write_png_gray(const std::filesystem::path& file, const Grid<std::uint8_t>& image);

// Any PNG, reduced to 8-bit luminance with transparency composited over
// white. Throws ImageError.
Grid<std::uint8_t> read_png_luminance(const std::filesystem::path& file);

// 1 where the luminance is below 50% gray.
Grid<std::uint8_t> threshold_dark(const Grid<std::uint8_t>& luminance);

// round(255 * composite), 255 where nothing is drawn.
Grid<std::uint8_t> composite_to_gray(const CoverageBuffer& buffer);

}  // namespace collage
