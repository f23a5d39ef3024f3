#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "collage/container.hpp"
#include "collage/vecgeom.hpp"

namespace collage {

struct SkeletonPoint {
  Vec2 position;        // canvas units
  double medial_width;  // distance to the container boundary, canvas units
};

struct Skeleton {
  std::vector<SkeletonPoint> points;
};

inline constexpr int kSkeletonResolution = 200;

// Two-subiteration thinning of the interior mask; every surviving pixel is
// annotated with its distance to the boundary. When more than `max_points`
// pixels survive they are split, in raster order, into `max_points` runs and
// the widest pixel of each run is kept. `max_points` = 0 keeps everything.
// Throws EmptyContainer.
Skeleton extract_skeleton(const ContainerField& field, std::size_t max_points = 0);

// Raw thinning result (1 = skeleton pixel), exposed for testing.
Grid<std::uint8_t> thin(const Grid<std::uint8_t>& mask);

// Number of 8-connected foreground components.
std::size_t count_components(const Grid<std::uint8_t>& mask);

struct Placement {
  std::vector<ElementTransform> transforms;
  // Medial width of the skeleton point given to each shape; negative for
  // shapes that fell back to random placement.
  std::vector<double> assigned_width;
  std::size_t overflow = 0;
};

// Greedy size-to-width matching. `initial` supplies the constraint modes and
// the fixed values (scale for fixed scale mode, angle for fixed rotation);
// it is either empty or one entry per shape. Shapes that find no skeleton
// point are placed by place_random and counted in `overflow`.
Placement place_elements(const Skeleton& skeleton, std::span<const BezierShape> shapes,
                         std::span<const ElementTransform> initial, const ContainerField& field,
                         std::uint64_t seed);

// Centroids drawn uniformly over interior pixels. Throws EmptyContainer.
std::vector<ElementTransform> place_random(const ContainerField& field,
                                           std::span<const BezierShape> shapes,
                                           std::span<const ElementTransform> initial,
                                           std::uint64_t seed);

}  // namespace collage
