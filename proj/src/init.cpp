#include "collage/init.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "collage/errors.hpp"

namespace collage {

namespace {

// Uniform double in [0, 1) from the top 53 bits.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Grid<int> label_components(const Grid<std::uint8_t>& mask, std::size_t* count) {
  Grid<int> labels(mask.width, mask.height, -1);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y) || labels.at(x, y) >= 0) continue;
      labels.at(x, y) = next;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
            if (!mask.at(nx, ny) || labels.at(nx, ny) >= 0) continue;
            labels.at(nx, ny) = next;
            stack.emplace_back(nx, ny);
          }
        }
      }
      ++next;
    }
  }
  if (count) *count = static_cast<std::size_t>(next);
  return labels;
}

ElementTransform start_transform(std::span<const ElementTransform> initial, std::size_t i) {
  ElementTransform xf = i < initial.size() ? initial[i] : ElementTransform{};
  if (xf.rotation_mode.kind == RotationMode::Kind::kRange) {
    xf.r = 0.5 * (xf.rotation_mode.lo + xf.rotation_mode.hi);
  }
  return xf;
}

// Places the shape's centroid at `p`.
void center_at(ElementTransform& xf, const BezierShape& shape, Vec2 p) {
  xf.t = p - rotate(shape.centroid() * xf.s, xf.r);
}

std::vector<std::size_t> interior_pixels(const ContainerField& field) {
  std::vector<std::size_t> out;
  out.reserve(field.interior_count);
  for (std::size_t i = 0; i < field.interior.size(); ++i) {
    if (field.interior.data[i]) out.push_back(i);
  }
  if (out.empty()) throw EmptyContainer("container has no interior pixels");
  return out;
}

Vec2 random_interior_point(const ContainerField& field, const std::vector<std::size_t>& pixels,
                           std::mt19937_64& rng) {
  const auto pick = std::min<std::size_t>(pixels.size() - 1,
                                          static_cast<std::size_t>(unit_uniform(rng) * pixels.size()));
  const std::size_t idx = pixels[pick];
  const int x = static_cast<int>(idx % field.grid.width);
  const int y = static_cast<int>(idx / field.grid.width);
  // Stay within the central half of the pixel so the point maps back to it.
  const double ox = 0.25 + 0.5 * unit_uniform(rng);
  const double oy = 0.25 + 0.5 * unit_uniform(rng);
  return Vec2{x + ox, y + oy} / field.grid.pixels_per_unit;
}

}  // namespace

std::size_t count_components(const Grid<std::uint8_t>& mask) {
  std::size_t n = 0;
  label_components(mask, &n);
  return n;
}

Grid<std::uint8_t> thin(const Grid<std::uint8_t>& mask) {
  const int w = mask.width;
  const int h = mask.height;
  Grid<std::uint8_t> img(w, h, 0);
  for (std::size_t i = 0; i < mask.size(); ++i) img.data[i] = mask.data[i] ? 1 : 0;
  std::size_t ncomp = 0;
  const Grid<int> labels = label_components(img, &ncomp);
  std::vector<std::size_t> alive(ncomp, 0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (img.data[i]) ++alive[labels.data[i]];
  }

  auto px = [&](int x, int y) -> int {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : img.at(x, y);
  };
  std::vector<std::pair<int, int>> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      marked.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!img.at(x, y)) continue;
          // P2..P9 clockwise from north.
          const std::array<int, 8> n = {px(x, y - 1), px(x + 1, y - 1), px(x + 1, y),
                                        px(x + 1, y + 1), px(x, y + 1), px(x - 1, y + 1),
                                        px(x - 1, y), px(x - 1, y - 1)};
          const int b = std::accumulate(n.begin(), n.end(), 0);
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int k = 0; k < 8; ++k) a += (n[k] == 0 && n[(k + 1) % 8] == 1);
          if (a != 1) continue;
          const bool cond = pass == 0 ? (n[0] * n[2] * n[4] == 0 && n[2] * n[4] * n[6] == 0)
                                      : (n[0] * n[2] * n[6] == 0 && n[0] * n[4] * n[6] == 0);
          if (cond) marked.emplace_back(x, y);
        }
      }
      // A component is never erased completely: its last pixel is kept.
      for (const auto& [x, y] : marked) {
        const int l = labels.at(x, y);
        if (alive[l] <= 1) continue;
        img.at(x, y) = 0;
        --alive[l];
        changed = true;
      }
    }
  }
  return img;
}

Skeleton extract_skeleton(const ContainerField& field, std::size_t max_points) {
  if (field.interior_count == 0) throw EmptyContainer("container has no interior pixels");
  const Grid<std::uint8_t> skel = thin(field.interior);
  const double ppu = field.grid.pixels_per_unit;

  std::vector<SkeletonPoint> all;
  for (int y = 0; y < skel.height; ++y) {
    for (int x = 0; x < skel.width; ++x) {
      if (!skel.at(x, y)) continue;
      all.push_back({field.grid.pixel_center(x, y), -field.distance.at(x, y) / ppu});
    }
  }
  if (all.empty()) throw EmptyContainer("skeleton is empty");

  Skeleton out;
  if (max_points == 0 || all.size() <= max_points) {
    out.points = std::move(all);
    return out;
  }
  out.points.reserve(max_points);
  for (std::size_t b = 0; b < max_points; ++b) {
    const std::size_t lo = b * all.size() / max_points;
    const std::size_t hi = (b + 1) * all.size() / max_points;
    std::size_t best = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      if (all[i].medial_width > all[best].medial_width) best = i;
    }
    out.points.push_back(all[best]);
  }
  return out;
}

Placement place_elements(const Skeleton& skeleton, std::span<const BezierShape> shapes,
                         std::span<const ElementTransform> initial, const ContainerField& field,
                         std::uint64_t seed) {
  if (skeleton.points.empty()) throw EmptyContainer("skeleton has no points");
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> shape_order(shapes.size());
  std::iota(shape_order.begin(), shape_order.end(), 0);
  std::stable_sort(shape_order.begin(), shape_order.end(), [&](std::size_t a, std::size_t b) {
    return shapes[a].intrinsic_size() > shapes[b].intrinsic_size();
  });
  std::vector<std::size_t> point_order(skeleton.points.size());
  std::iota(point_order.begin(), point_order.end(), 0);
  std::stable_sort(point_order.begin(), point_order.end(), [&](std::size_t a, std::size_t b) {
    return skeleton.points[a].medial_width > skeleton.points[b].medial_width;
  });

  Placement out;
  out.transforms.resize(shapes.size());
  out.assigned_width.assign(shapes.size(), -1.0);
  std::vector<bool> used(skeleton.points.size(), false);
  std::vector<Vec2> taken;
  std::vector<std::size_t> leftovers;
  double width_cap = std::numeric_limits<double>::infinity();

  for (const std::size_t i : shape_order) {
    const BezierShape& shape = shapes[i];
    ElementTransform xf = start_transform(initial, i);
    const double radius_unit = shape.bounding_radius();

    std::size_t chosen = point_order.size();
    for (double factor = 0.8;; factor *= 0.8) {
      for (const std::size_t p : point_order) {
        if (used[p]) continue;
        const SkeletonPoint& sp = skeleton.points[p];
        if (sp.medial_width > width_cap) continue;
        double s = xf.s;
        if (xf.scale_mode == ScaleMode::kFree) {
          s = std::max(kMinScale, std::min(1.0, sp.medial_width / radius_unit));
        }
        const double spacing = factor * radius_unit * s;
        const bool clear = std::all_of(taken.begin(), taken.end(), [&](Vec2 q) {
          return norm2(q - sp.position) >= spacing * spacing;
        });
        if (clear) {
          chosen = p;
          break;
        }
      }
      if (chosen != point_order.size() || factor < 1e-6) break;
    }
    if (chosen == point_order.size()) {
      leftovers.push_back(i);
      continue;
    }
    const SkeletonPoint& sp = skeleton.points[chosen];
    used[chosen] = true;
    taken.push_back(sp.position);
    width_cap = sp.medial_width;
    if (xf.scale_mode == ScaleMode::kFree) {
      xf.s = std::max(kMinScale, std::min(1.0, sp.medial_width / radius_unit));
    }
    const Vec2 jitter{unit_uniform(rng) - 0.5, unit_uniform(rng) - 0.5};
    Vec2 pos = sp.position + jitter;
    const int px = static_cast<int>(pos.x * field.grid.pixels_per_unit);
    const int py = static_cast<int>(pos.y * field.grid.pixels_per_unit);
    if (px < 0 || py < 0 || px >= field.grid.width || py >= field.grid.height || !field.inside(px, py)) {
      pos = sp.position;
    }
    center_at(xf, shape, pos);
    out.transforms[i] = xf;
    out.assigned_width[i] = sp.medial_width;
  }

  if (!leftovers.empty()) {
    out.overflow = leftovers.size();
    const std::vector<std::size_t> pixels = interior_pixels(field);
    for (const std::size_t i : leftovers) {
      ElementTransform xf = start_transform(initial, i);
      center_at(xf, shapes[i], random_interior_point(field, pixels, rng));
      out.transforms[i] = xf;
    }
  }
  return out;
}

std::vector<ElementTransform> place_random(const ContainerField& field,
                                           std::span<const BezierShape> shapes,
                                           std::span<const ElementTransform> initial,
                                           std::uint64_t seed) {
  const std::vector<std::size_t> pixels = interior_pixels(field);
  std::mt19937_64 rng(seed);
  std::vector<ElementTransform> out(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    ElementTransform xf = start_transform(initial, i);
    center_at(xf, shapes[i], random_interior_point(field, pixels, rng));
    out[i] = xf;
  }
  return out;
}

}  // namespace collage
