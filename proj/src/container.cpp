#include "collage/container.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace collage {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of sampled function f (Felzenszwalb and
// Huttenlocher). `v` and `z` are scratch buffers of size n and n + 1.
void dt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

Grid<double> squared_distance_transform(const Grid<std::uint8_t>& features) {
  const int w = features.width;
  const int h = features.height;
  Grid<double> out(w, h, kInf);
  if (w == 0 || h == 0) return out;
  for (std::size_t i = 0; i < features.size(); ++i) out.data[i] = features.data[i] ? 0.0 : kInf;

  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = out.at(x, y);
    dt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) out.at(x, y) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = &out.data[static_cast<std::size_t>(y) * w];
    std::copy(row, row + w, f.begin());
    dt_1d(f.data(), d.data(), w, v, z);
    std::copy(d.begin(), d.begin() + w, row);
  }
  return out;
}

Grid<std::uint8_t> rasterize_outlines(std::span<const Polyline> outlines, const RasterGrid& grid) {
  Grid<std::uint8_t> mask(grid.width, grid.height, 0);
  const double k = grid.pixels_per_unit;
  std::vector<std::pair<Vec2, Vec2>> edges;
  for (const auto& poly : outlines) {
    const auto& v = poly.vertices;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) edges.emplace_back(v[i] * k, v[(i + 1) % n] * k);
  }
  std::vector<double> xs;
  for (int y = 0; y < grid.height; ++y) {
    const double py = y + 0.5;
    xs.clear();
    for (const auto& [a, b] : edges) {
      if ((a.y > py) != (b.y > py)) xs.push_back(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    if (xs.empty()) continue;
    std::sort(xs.begin(), xs.end());
    std::size_t next = 0;
    for (int x = 0; x < grid.width; ++x) {
      const double px = x + 0.5;
      while (next < xs.size() && xs[next] <= px) ++next;
      if ((xs.size() - next) % 2 == 1) mask.at(x, y) = 1;
    }
  }
  return mask;
}

ContainerField build_container_field(const ContainerSource& source, const RasterGrid& grid) {
  ContainerField field;
  field.grid = grid;
  if (const auto* outlines = source.outlines()) {
    field.interior = rasterize_outlines(*outlines, grid);
  } else {
    const auto& img = std::get<MaskImage>(source.geometry).mask;
    field.interior = Grid<std::uint8_t>(grid.width, grid.height, 0);
    for (int y = 0; y < grid.height; ++y) {
      const int sy = std::min(img.height - 1, static_cast<int>((y + 0.5) * img.height / grid.height));
      for (int x = 0; x < grid.width; ++x) {
        const int sx = std::min(img.width - 1, static_cast<int>((x + 0.5) * img.width / grid.width));
        field.interior.at(x, y) = img.at(sx, sy) ? 1 : 0;
      }
    }
  }

  const int w = grid.width;
  const int h = grid.height;
  field.penalty = Grid<double>(w, h, kOutsidePenalty);
  field.target = Grid<double>(w, h, 1.0);
  field.interior_count = 0;
  for (std::size_t i = 0; i < field.interior.size(); ++i) {
    if (field.interior.data[i]) {
      field.penalty.data[i] = kInsidePenalty;
      field.target.data[i] = 0.0;
      ++field.interior_count;
    }
  }

  // Distances are taken on a grid padded by one exterior pixel so that a
  // container touching the canvas edge still has a boundary there.
  Grid<std::uint8_t> outside(w + 2, h + 2, 1);
  Grid<std::uint8_t> inside(w + 2, h + 2, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool in = field.interior.at(x, y) != 0;
      outside.at(x + 1, y + 1) = in ? 0 : 1;
      inside.at(x + 1, y + 1) = in ? 1 : 0;
    }
  }
  const Grid<double> to_outside = squared_distance_transform(outside);
  const Grid<double> to_inside = squared_distance_transform(inside);
  field.distance = Grid<double>(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (field.interior.at(x, y)) {
        field.distance.at(x, y) = -(std::sqrt(to_outside.at(x + 1, y + 1)) - 0.5);
      } else {
        const double d2 = to_inside.at(x + 1, y + 1);
        field.distance.at(x, y) = std::isfinite(d2) ? std::sqrt(d2) - 0.5 : kInf;
      }
    }
  }
  return field;
}

}  // namespace collage
