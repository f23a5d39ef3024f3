#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "collage/container.hpp"
#include "collage/grid.hpp"
#include "collage/losses.hpp"
#include "collage/render.hpp"
#include "collage/vecgeom.hpp"

namespace testing {

using collage::BezierShape;
using collage::ElementTransform;
using collage::Polyline;
using collage::Vec2;

// Closed loop whose cubic segments are straight lines through `corners`.
inline BezierShape polygon_shape(const std::vector<Vec2>& corners, std::string id = "poly") {
  const std::size_t n = corners.size();
  std::vector<Vec2> out(n), in(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 a = corners[k];
    const Vec2 b = corners[(k + 1) % n];
    out[k] = a + (b - a) / 3.0;
    in[k] = a + (b - a) * (2.0 / 3.0);
  }
  return BezierShape::from_anchors(corners, out, in, std::move(id));
}

inline BezierShape rect_shape(double x0, double y0, double x1, double y1, std::string id = "rect") {
  return polygon_shape({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, std::move(id));
}

// Square of side `side` centred on the origin.
inline BezierShape square_shape(double side, std::string id = "square") {
  const double h = side / 2;
  return rect_shape(-h, -h, h, h, std::move(id));
}

inline Polyline polygon(std::vector<Vec2> v) { return Polyline{std::move(v), true}; }

inline Polyline rect_outline(double x0, double y0, double x1, double y1) {
  return polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

inline Polyline circle_outline(Vec2 c, double r, int n) {
  Polyline p;
  for (int k = 0; k < n; ++k) {
    const double a = 2 * std::numbers::pi * k / n;
    p.vertices.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return p;
}

// Crossing-number test, written independently of the library.
inline bool brute_inside(std::span<const Vec2> v, Vec2 p) {
  bool in = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > p.y) != (v[j].y > p.y)) {
      const double x = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (p.x < x) in = !in;
    }
  }
  return in;
}

inline double brute_segment_distance(Vec2 a, Vec2 b, Vec2 p) {
  const Vec2 ab = b - a;
  const double len2 = collage::norm2(ab);
  double u = len2 > 0 ? collage::dot(p - a, ab) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return collage::norm(p - (a + ab * u));
}

inline double brute_signed_distance(std::span<const Vec2> v, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    best = std::min(best, brute_segment_distance(v[i], v[(i + 1) % v.size()], p));
  }
  return brute_inside(v, p) ? -best : best;
}

inline std::vector<Vec2> transformed(std::span<const Vec2> v, const ElementTransform& xf) {
  std::vector<Vec2> out;
  out.reserve(v.size());
  for (Vec2 p : v) out.push_back(xf.apply(p));
  return out;
}

// Random convex polygon: sorted angles on a jittered circle.
inline std::vector<Vec2> random_convex(std::mt19937_64& rng, double radius, int n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> angles(n);
  for (double& a : angles) a = 2 * std::numbers::pi * U(rng);
  std::sort(angles.begin(), angles.end());
  std::vector<Vec2> v;
  for (double a : angles) v.push_back({radius * std::cos(a), radius * std::sin(a)});
  return v;
}

// Star-shaped polygon with radii in [r_lo, r_hi], counter-clockwise.
inline std::vector<Vec2> random_star(std::mt19937_64& rng, double r_lo, double r_hi, int n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Vec2> v;
  for (int k = 0; k < n; ++k) {
    const double a = 2 * std::numbers::pi * (k + 0.3 * U(rng)) / n;
    const double r = r_lo + (r_hi - r_lo) * U(rng);
    v.push_back({r * std::cos(a), r * std::sin(a)});
  }
  return v;
}

inline collage::Grid<std::uint8_t> disc_mask(int size, Vec2 c, double r) {
  collage::Grid<std::uint8_t> m(size, size, 0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (std::hypot(x + 0.5 - c.x, y + 0.5 - c.y) < r) m.at(x, y) = 1;
    }
  }
  return m;
}

// Parameter k of a transform: 0 tx, 1 ty, 2 s, 3 r.
inline double& param(ElementTransform& xf, int k) {
  switch (k) {
    case 0: return xf.t.x;
    case 1: return xf.t.y;
    case 2: return xf.s;
    default: return xf.r;
  }
}

inline double component(const collage::ElementGradient& g, int k) {
  switch (k) {
    case 0: return g.dt.x;
    case 1: return g.dt.y;
    case 2: return g.ds;
    default: return g.dr;
  }
}

// Central difference of f with respect to parameter k of element i.
inline double central_difference(std::vector<ElementTransform> xfs, std::size_t i, int k, double h,
                                 const std::function<double(const std::vector<ElementTransform>&)>& f) {
  const double x0 = param(xfs[i], k);
  param(xfs[i], k) = x0 + h;
  const double fp = f(xfs);
  param(xfs[i], k) = x0 - h;
  const double fm = f(xfs);
  return (fp - fm) / (2 * h);
}

inline bool gradient_close(double analytic, double numeric, double rel = 1e-2, double abs = 1e-6) {
  const double err = std::abs(analytic - numeric);
  return err < abs || err < rel * std::max(std::abs(analytic), std::abs(numeric));
}

// Outlines flattened once in local coordinates so finite differences see a
// fixed polygon.
struct FrozenScene {
  std::vector<Polyline> local;

  std::vector<collage::RenderElement> elements(std::span<const ElementTransform> xfs) const {
    std::vector<collage::RenderElement> out;
    for (std::size_t i = 0; i < local.size(); ++i) out.push_back({local[i].vertices, xfs[i]});
    return out;
  }
};


enum class SubLoss { kContainment, kOverlap, kUniform, kForce };

inline const char* name(SubLoss s) {
  switch (s) {
    case SubLoss::kContainment: return "containment";
    case SubLoss::kOverlap: return "overlap";
    case SubLoss::kUniform: return "uniform";
    default: return "force";
  }
}

// Small random scene on a 64 x 64 grid spanning the canvas.
struct GradientScene {
  FrozenScene frozen;
  std::vector<ElementTransform> transforms;
  std::vector<Vec2> centroids;
  collage::RasterGrid grid;
  collage::ContainerField field;
  collage::RenderConfig render;
  collage::UniformLossConfig uniform;
  collage::ForceSpec force;

  collage::CoverageBuffer buffer(std::span<const ElementTransform> xfs, bool grads) const {
    return collage::rasterize(frozen.elements(xfs), render, grid, grads);
  }

  double value(SubLoss which, const std::vector<ElementTransform>& xfs) const {
    if (which == SubLoss::kForce) return collage::force_loss(xfs, centroids, force).loss;
    const collage::CoverageBuffer b = buffer(xfs, false);
    switch (which) {
      case SubLoss::kContainment: return collage::containment_loss(b, field).loss;
      case SubLoss::kOverlap: return collage::overlap_loss(b, render.tau).smooth_loss;
      default: return collage::uniform_loss(b, field, uniform).loss;
    }
  }

  collage::GradientSet gradient(SubLoss which) const {
    if (which == SubLoss::kForce) return collage::force_loss(transforms, centroids, force).grad;
    const collage::CoverageBuffer b = buffer(transforms, true);
    switch (which) {
      case SubLoss::kContainment: return collage::backward(b, collage::containment_loss(b, field).grad);
      case SubLoss::kOverlap: return collage::backward(b, collage::overlap_loss(b, render.tau).grad);
      default: return collage::backward(b, collage::uniform_loss(b, field, uniform).grad);
    }
  }
};

inline GradientScene random_gradient_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  GradientScene g;
  g.grid = collage::RasterGrid::square(64);
  // Geometry below is laid out in pixels and scaled to canvas units.
  const double u = 1.0 / g.grid.pixels_per_unit;
  // The padded box truncates coverage; a wide pad keeps the truncation jump
  // (sigma(-20) ~ 2e-9) far below what central differences can see.
  g.render.padding = 20;
  g.uniform.kernel_sizes = {3, 7, 11};
  g.uniform.level_weights = {1, 2, 3};
  const int n = 1 + static_cast<int>(U(rng) * 5);
  for (int i = 0; i < n; ++i) {
    const double r = u * (4 + 5 * U(rng));
    const Polyline local = polygon(random_star(rng, 0.6 * r, r, 5 + static_cast<int>(U(rng) * 5)));
    g.frozen.local.push_back(local);
    ElementTransform xf;
    xf.t = Vec2{14 + 36 * U(rng), 14 + 36 * U(rng)} * u;
    xf.s = 0.7 + 0.6 * U(rng);
    xf.r = 6.28 * U(rng);
    g.transforms.push_back(xf);
    g.centroids.push_back(Vec2{U(rng) - 0.5, U(rng) - 0.5} * u);
  }
  std::vector<Vec2> box{{8 + 8 * U(rng), 8 + 8 * U(rng)},
                        {56 - 8 * U(rng), 10 + 8 * U(rng)},
                        {54 - 8 * U(rng), 56 - 8 * U(rng)},
                        {10 + 8 * U(rng), 54 - 8 * U(rng)}};
  for (Vec2& v : box) v = v * u;
  g.field = collage::build_container_field(collage::ContainerSource::from_outlines({polygon(box)}), g.grid);
  if (U(rng) < 0.5) {
    const double a = 6.28 * U(rng);
    g.force = collage::ForceSpec::directional({std::cos(a), std::sin(a)});
  } else {
    g.force = collage::ForceSpec::point(Vec2{64 * U(rng), 64 * U(rng)} * u);
  }
  return g;
}

struct GradientCheck {
  std::size_t compared = 0;
  std::size_t failed = 0;
  double worst_rel = 0.0;
  std::string first_failure;
};

// Every component of the analytic gradient of `which` against central
// differences with step h.
inline GradientCheck check_gradient(const GradientScene& g, SubLoss which, double h = 1e-3,
                                    double rel = 1e-2, double abs = 1e-6) {
  GradientCheck out;
  const collage::GradientSet an = g.gradient(which);
  const auto f = [&](const std::vector<ElementTransform>& x) { return g.value(which, x); };
  for (std::size_t i = 0; i < g.transforms.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      const double a = component(an[i], k);
      const double n = central_difference(g.transforms, i, k, h, f);
      ++out.compared;
      const double err = std::abs(a - n);
      const double scale = std::max(std::abs(a), std::abs(n));
      if (err >= abs) out.worst_rel = std::max(out.worst_rel, scale > 0 ? err / scale : 0.0);
      if (!gradient_close(a, n, rel, abs)) {
        if (out.failed++ == 0) {
          out.first_failure = std::string(name(which)) + " element " + std::to_string(i) + " param " +
                              std::to_string(k) + ": analytic " + std::to_string(a) + " numeric " +
                              std::to_string(n);
        }
      }
    }
  }
  return out;
}

}  // namespace testing
