#pragma once

#include <cassert>
#include <cstddef>
#include <functional>
#include <vector>

#include "collage/vecgeom.hpp"

namespace collage {

// Dense row-major image.
template <class T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  T& at(int x, int y) {
    assert(x >= 0 && x < width && y >= 0 && y < height);
    return data[static_cast<std::size_t>(y) * width + x];
  }
  const T& at(int x, int y) const {
    assert(x >= 0 && x < width && y >= 0 && y < height);
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
  bool operator==(const Grid&) const = default;
};

// Pixel lattice over the logical canvas. Pixel (x, y) covers the canvas square
// [x, x+1) / ppu by [y, y+1) / ppu; y grows downward.
struct RasterGrid {
  int width = 0;
  int height = 0;
  double pixels_per_unit = 1.0;

  static constexpr double kCanvasSize = 600.0;

  static RasterGrid square(int resolution, double canvas = kCanvasSize) {
    return {resolution, resolution, resolution / canvas};
  }
  Vec2 pixel_center(int x, int y) const {
    return {(x + 0.5) / pixels_per_unit, (y + 0.5) / pixels_per_unit};
  }
  double canvas_width() const { return width / pixels_per_unit; }
  double canvas_height() const { return height / pixels_per_unit; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  bool operator==(const RasterGrid&) const = default;
};

// Axis-aligned pixel rectangle, clipped to the grid.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  std::size_t area() const { return static_cast<std::size_t>(w) * static_cast<std::size_t>(h); }
  bool empty() const { return w <= 0 || h <= 0; }
  bool operator==(const PixelRect&) const = default;
};

// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items must
// write only to their own slots; callers reduce afterwards in index order.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace collage
