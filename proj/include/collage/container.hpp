#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "collage/grid.hpp"
#include "collage/vecgeom.hpp"

namespace collage {

// Squared Euclidean distance (pixels^2) from each pixel center to the nearest
// pixel where `features` is nonzero; +inf when there is none. Exact, linear
// time (lower envelope of parabolas, one pass per axis).
Grid<double> squared_distance_transform(const Grid<std::uint8_t>& features);

// Binary mask stretched over the whole canvas; resampled nearest-neighbour.
struct MaskImage {
  Grid<std::uint8_t> mask;
};

// Container geometry in canvas units: closed outlines combined even-odd, or
// a raster mask.
struct ContainerSource {
  std::variant<std::vector<Polyline>, MaskImage> geometry;

  static ContainerSource from_outlines(std::vector<Polyline> outlines) {
    return {std::move(outlines)};
  }
  static ContainerSource from_mask(Grid<std::uint8_t> mask) { return {MaskImage{std::move(mask)}}; }

  const std::vector<Polyline>* outlines() const {
    return std::get_if<std::vector<Polyline>>(&geometry);
  }
};

struct ContainerField {
  RasterGrid grid;
  Grid<std::uint8_t> interior;  // 1 inside the container
  Grid<double> penalty;         // 1 inside, 100 outside
  Grid<double> target;          // 0 inside (black), 1 outside (white)
  Grid<double> distance;        // signed distance to the boundary, pixels, negative inside
  std::size_t interior_count = 0;

  bool inside(int x, int y) const { return interior.at(x, y) != 0; }
};

inline constexpr double kInsidePenalty = 1.0;
inline constexpr double kOutsidePenalty = 100.0;

ContainerField build_container_field(const ContainerSource& source, const RasterGrid& grid);

// Even-odd fill of closed outlines (canvas units) at pixel centers.
Grid<std::uint8_t> rasterize_outlines(std::span<const Polyline> outlines, const RasterGrid& grid);

}  // namespace collage
