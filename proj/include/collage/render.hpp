#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "collage/grid.hpp"
#include "collage/vecgeom.hpp"

namespace collage {

struct RenderConfig {
  double kappa = 1.0;   // logistic bandwidth, pixels
  double tau = 0.5;     // per-element transparency
  int padding = 4;      // bounding-box inflation, pixels; >= ceil(3 kappa)

  // Throws ValidationError.
  void validate() const;
  bool operator==(const RenderConfig&) const = default;
};

// One element to draw: its outline flattened in local coordinates and the
// transform placing it on the canvas.
struct RenderElement {
  std::span<const Vec2> local_vertices;
  ElementTransform transform;
};

// Soft coverage of one element over its padded bounding box. `dalpha` holds
// d(alpha)/d(tx, ty, s, r) per pixel, translation in canvas units; it is empty
// when the buffer was rasterized without gradients.
struct ElementCoverage {
  PixelRect rect;
  std::vector<double> alpha;
  std::vector<std::array<double, 4>> dalpha;

  double at(int x, int y) const {
    const int lx = x - rect.x0;
    const int ly = y - rect.y0;
    if (lx < 0 || ly < 0 || lx >= rect.w || ly >= rect.h) return 0.0;
    return alpha[static_cast<std::size_t>(ly) * rect.w + lx];
  }
};

struct CoverageBuffer {
  RasterGrid grid;
  double tau = 0.5;
  std::vector<ElementCoverage> elements;
  Grid<double> transparency;  // sum_i alpha_i * tau
  Grid<double> composite;     // prod_i (1 - alpha_i); 1 = empty

  int width() const { return grid.width; }
  int height() const { return grid.height; }
  bool has_gradients() const;
};

struct ElementGradient {
  Vec2 dt{};
  double ds = 0.0;
  double dr = 0.0;

  bool operator==(const ElementGradient&) const = default;
};

using GradientSet = std::vector<ElementGradient>;

// dL/d(alpha_i(p)) = shared(p) + per_element[i](p). Per-element channels are
// either empty or laid out over the element's coverage rectangle.
struct PixelGrad {
  Grid<double> shared;
  std::vector<std::vector<double>> per_element;

  static PixelGrad zeros(const CoverageBuffer& buffer);
  void add_scaled(const PixelGrad& other, double weight);
};

// Flattens every shape at a quarter pixel of the grid and rasterizes.
CoverageBuffer rasterize(std::span<const BezierShape> shapes,
                         std::span<const ElementTransform> transforms, const RenderConfig& config,
                         const RasterGrid& grid);

CoverageBuffer rasterize(std::span<const RenderElement> elements, const RenderConfig& config,
                         const RasterGrid& grid, bool with_gradients = true, int threads = 1);

// Chain rule through the logistic coverage. Throws NonFiniteGradient.
GradientSet backward(const CoverageBuffer& buffer, const PixelGrad& pixel_grad, int threads = 1);

struct HardMask {
  PixelRect rect;
  std::vector<std::uint8_t> covered;

  bool at(int x, int y) const {
    const int lx = x - rect.x0;
    const int ly = y - rect.y0;
    if (lx < 0 || ly < 0 || lx >= rect.w || ly >= rect.h) return false;
    return covered[static_cast<std::size_t>(ly) * rect.w + lx] != 0;
  }
  std::size_t count() const;
};

// Pixel covered iff the signed distance at its center is negative.
std::vector<HardMask> rasterize_hard(std::span<const RenderElement> elements,
                                     const RasterGrid& grid, int threads = 1);
std::vector<HardMask> rasterize_hard(std::span<const BezierShape> shapes,
                                     std::span<const ElementTransform> transforms,
                                     const RasterGrid& grid);

// Builds a coverage buffer straight from hard masks (alpha in {0, 1}).
CoverageBuffer coverage_from_masks(std::span<const HardMask> masks, const RasterGrid& grid,
                                   double tau);

// Flattens `shapes` in local coordinates at a quarter pixel for each
// transform's current scale.
std::vector<Polyline> flatten_for_grid(std::span<const BezierShape> shapes,
                                       std::span<const ElementTransform> transforms,
                                       const RasterGrid& grid);

}  // namespace collage
