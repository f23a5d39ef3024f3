#include "collage/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "collage/errors.hpp"

namespace collage {

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(count, threads > 1 ? threads : 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        try {
          for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
        } catch (...) {
          const std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

namespace {

struct PixelSpaceOutline {
  std::vector<Vec2> vertices;
  Vec2 origin;  // translation in pixel units
  double orientation = 1.0;
  double lo_x = 0, lo_y = 0, hi_x = 0, hi_y = 0;
};

PixelSpaceOutline to_pixels(const RenderElement& el, const RasterGrid& grid) {
  PixelSpaceOutline out;
  const double k = grid.pixels_per_unit;
  out.vertices.reserve(el.local_vertices.size());
  out.lo_x = out.lo_y = std::numeric_limits<double>::infinity();
  out.hi_x = out.hi_y = -std::numeric_limits<double>::infinity();
  double area2 = 0.0;
  for (const Vec2& v : el.local_vertices) {
    const Vec2 p = el.transform.apply(v) * k;
    out.vertices.push_back(p);
    out.lo_x = std::min(out.lo_x, p.x);
    out.lo_y = std::min(out.lo_y, p.y);
    out.hi_x = std::max(out.hi_x, p.x);
    out.hi_y = std::max(out.hi_y, p.y);
  }
  for (std::size_t i = 0, n = out.vertices.size(); i < n; ++i) {
    area2 += cross(out.vertices[i], out.vertices[(i + 1) % n]);
  }
  out.orientation = area2 >= 0.0 ? 1.0 : -1.0;
  out.origin = el.transform.t * k;
  return out;
}

// Pixels whose centers fall within [lo - pad, hi + pad].
PixelRect covering_rect(const PixelSpaceOutline& o, double pad, const RasterGrid& grid) {
  if (o.vertices.empty() || !std::isfinite(o.lo_x) || !std::isfinite(o.hi_x)) return {};
  const double fx0 = std::ceil(o.lo_x - pad - 0.5);
  const double fy0 = std::ceil(o.lo_y - pad - 0.5);
  const double fx1 = std::floor(o.hi_x + pad - 0.5);
  const double fy1 = std::floor(o.hi_y + pad - 0.5);
  const int x0 = static_cast<int>(std::clamp(fx0, 0.0, static_cast<double>(grid.width)));
  const int y0 = static_cast<int>(std::clamp(fy0, 0.0, static_cast<double>(grid.height)));
  const int x1 = static_cast<int>(std::clamp(fx1, -1.0, static_cast<double>(grid.width - 1)));
  const int y1 = static_cast<int>(std::clamp(fy1, -1.0, static_cast<double>(grid.height - 1)));
  PixelRect r{x0, y0, std::max(0, x1 - x0 + 1), std::max(0, y1 - y0 + 1)};
  if (r.empty()) r = {0, 0, 0, 0};
  return r;
}

ElementCoverage rasterize_element(const RenderElement& el, const RenderConfig& cfg,
                                  const RasterGrid& grid, bool with_gradients) {
  ElementCoverage cov;
  if (el.local_vertices.size() < 3) return cov;
  const PixelSpaceOutline o = to_pixels(el, grid);
  cov.rect = covering_rect(o, cfg.padding, grid);
  cov.alpha.assign(cov.rect.area(), 0.0);
  if (with_gradients) cov.dalpha.assign(cov.rect.area(), {0.0, 0.0, 0.0, 0.0});

  const double inv_kappa = 1.0 / cfg.kappa;
  const double k = grid.pixels_per_unit;
  const double s = el.transform.s;
  const std::span<const Vec2> v = o.vertices;
  std::size_t idx = 0;
  for (int ly = 0; ly < cov.rect.h; ++ly) {
    const double py = cov.rect.y0 + ly + 0.5;
    for (int lx = 0; lx < cov.rect.w; ++lx, ++idx) {
      const Vec2 p{cov.rect.x0 + lx + 0.5, py};
      const BoundaryHit hit = nearest_boundary(v, p);
      const double dist = std::sqrt(hit.dist2);
      const double d = hit.inside ? -dist : dist;
      const double a = 1.0 / (1.0 + std::exp(d * inv_kappa));
      cov.alpha[idx] = a;
      if (!with_gradients) continue;
      const double slope = -a * (1.0 - a) * inv_kappa;
      if (slope == 0.0) continue;
      const Vec2 n = outward_direction(v, hit, p, o.orientation);
      const Vec2 va = v[hit.segment];
      const Vec2 vb = v[hit.segment + 1 == v.size() ? 0 : hit.segment + 1];
      const Vec2 rel = va + (vb - va) * hit.u - o.origin;
      // d(dist)/d(theta) = -n . dq/d(theta), q in pixel units.
      auto& g = cov.dalpha[idx];
      g[0] = slope * (-n.x * k);
      g[1] = slope * (-n.y * k);
      g[2] = slope * (-dot(n, rel) / s);
      g[3] = slope * (-dot(n, perp(rel)));
    }
  }
  return cov;
}

void accumulate(CoverageBuffer& buf) {
  const int w = buf.grid.width;
  buf.transparency = Grid<double>(w, buf.grid.height, 0.0);
  buf.composite = Grid<double>(w, buf.grid.height, 1.0);
  for (const auto& el : buf.elements) {
    std::size_t idx = 0;
    for (int ly = 0; ly < el.rect.h; ++ly) {
      const std::size_t row = static_cast<std::size_t>(el.rect.y0 + ly) * w + el.rect.x0;
      for (int lx = 0; lx < el.rect.w; ++lx, ++idx) {
        const double a = el.alpha[idx];
        buf.transparency.data[row + lx] += a * buf.tau;
        buf.composite.data[row + lx] *= (1.0 - a);
      }
    }
  }
}

}  // namespace

void RenderConfig::validate() const {
  if (!(kappa > 0.0)) throw ValidationError("render.kappa", "must be > 0");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("render.tau", "must lie in (0, 1)");
  if (padding < static_cast<int>(std::ceil(3.0 * kappa))) {
    throw ValidationError("render.padding", "must be >= ceil(3 * kappa)");
  }
}

bool CoverageBuffer::has_gradients() const {
  return std::all_of(elements.begin(), elements.end(), [](const ElementCoverage& e) {
    return e.dalpha.size() == e.alpha.size();
  });
}

PixelGrad PixelGrad::zeros(const CoverageBuffer& buffer) {
  PixelGrad g;
  g.shared = Grid<double>(buffer.width(), buffer.height(), 0.0);
  g.per_element.resize(buffer.elements.size());
  return g;
}

void PixelGrad::add_scaled(const PixelGrad& other, double weight) {
  if (other.shared.size() != 0) {
    if (shared.size() == 0) shared = Grid<double>(other.shared.width, other.shared.height, 0.0);
    for (std::size_t i = 0; i < shared.size(); ++i) shared.data[i] += weight * other.shared.data[i];
  }
  if (per_element.size() < other.per_element.size()) per_element.resize(other.per_element.size());
  for (std::size_t e = 0; e < other.per_element.size(); ++e) {
    const auto& src = other.per_element[e];
    if (src.empty()) continue;
    auto& dst = per_element[e];
    if (dst.empty()) dst.assign(src.size(), 0.0);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += weight * src[i];
  }
}

std::vector<Polyline> flatten_for_grid(std::span<const BezierShape> shapes,
                                       std::span<const ElementTransform> transforms,
                                       const RasterGrid& grid) {
  std::vector<Polyline> out;
  out.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.push_back(flatten(shapes[i], flatten_tolerance(grid.pixels_per_unit, transforms[i].s)));
  }
  return out;
}

CoverageBuffer rasterize(std::span<const BezierShape> shapes,
                         std::span<const ElementTransform> transforms, const RenderConfig& config,
                         const RasterGrid& grid) {
  const auto polys = flatten_for_grid(shapes, transforms, grid);
  std::vector<RenderElement> els;
  els.reserve(polys.size());
  for (std::size_t i = 0; i < polys.size(); ++i) els.push_back({polys[i].vertices, transforms[i]});
  return rasterize(els, config, grid, true, 1);
}

CoverageBuffer rasterize(std::span<const RenderElement> elements, const RenderConfig& config,
                         const RasterGrid& grid, bool with_gradients, int threads) {
  if (grid.width < 8 || grid.height < 8) {
    throw ValidationError("resolution", "must be at least 8x8");
  }
  CoverageBuffer buf;
  buf.grid = grid;
  buf.tau = config.tau;
  buf.elements.resize(elements.size());
  parallel_for(elements.size(), threads, [&](std::size_t i) {
    buf.elements[i] = rasterize_element(elements[i], config, grid, with_gradients);
  });
  accumulate(buf);
  return buf;
}

GradientSet backward(const CoverageBuffer& buffer, const PixelGrad& pixel_grad, int threads) {
  if (!buffer.has_gradients()) {
    throw Error("render", "backward: coverage buffer was rasterized without gradients");
  }
  const bool has_shared = pixel_grad.shared.size() != 0;
  if (has_shared && !pixel_grad.shared.same_shape(buffer.width(), buffer.height())) {
    throw ResolutionMismatch("backward: pixel gradient resolution differs from the buffer");
  }
  GradientSet out(buffer.elements.size());
  const int w = buffer.width();
  parallel_for(buffer.elements.size(), threads, [&](std::size_t e) {
    const auto& el = buffer.elements[e];
    const std::vector<double>* own =
        e < pixel_grad.per_element.size() && !pixel_grad.per_element[e].empty()
            ? &pixel_grad.per_element[e]
            : nullptr;
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t idx = 0;
    for (int ly = 0; ly < el.rect.h; ++ly) {
      const std::size_t row = static_cast<std::size_t>(el.rect.y0 + ly) * w + el.rect.x0;
      for (int lx = 0; lx < el.rect.w; ++lx, ++idx) {
        double g = has_shared ? pixel_grad.shared.data[row + lx] : 0.0;
        if (own) g += (*own)[idx];
        if (g == 0.0) continue;
        const auto& da = el.dalpha[idx];
        acc[0] += g * da[0];
        acc[1] += g * da[1];
        acc[2] += g * da[2];
        acc[3] += g * da[3];
      }
    }
    out[e] = {{acc[0], acc[1]}, acc[2], acc[3]};
  });
  for (std::size_t e = 0; e < out.size(); ++e) {
    const auto& g = out[e];
    if (!std::isfinite(g.dt.x) || !std::isfinite(g.dt.y) || !std::isfinite(g.ds) ||
        !std::isfinite(g.dr)) {
      throw NonFiniteGradient(fmt::format("non-finite gradient for element {}", e));
    }
  }
  return out;
}

std::size_t HardMask::count() const {
  return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), std::uint8_t{1}));
}

std::vector<HardMask> rasterize_hard(std::span<const RenderElement> elements,
                                     const RasterGrid& grid, int threads) {
  std::vector<HardMask> masks(elements.size());
  parallel_for(elements.size(), threads, [&](std::size_t i) {
    HardMask& m = masks[i];
    if (elements[i].local_vertices.size() < 3) return;
    const PixelSpaceOutline o = to_pixels(elements[i], grid);
    m.rect = covering_rect(o, 0.5, grid);
    m.covered.assign(m.rect.area(), 0);
    const auto& v = o.vertices;
    const std::size_t n = v.size();
    std::vector<double> xs;
    for (int ly = 0; ly < m.rect.h; ++ly) {
      const double py = m.rect.y0 + ly + 0.5;
      xs.clear();
      // Same crossing rule as nearest_boundary's even-odd test.
      for (std::size_t k = 0; k < n; ++k) {
        const Vec2 a = v[k];
        const Vec2 b = v[k + 1 == n ? 0 : k + 1];
        if ((a.y > py) != (b.y > py)) xs.push_back(a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y));
      }
      if (xs.empty()) continue;
      std::sort(xs.begin(), xs.end());
      std::size_t next = 0;  // crossings with x_cross <= px
      for (int lx = 0; lx < m.rect.w; ++lx) {
        const double px = m.rect.x0 + lx + 0.5;
        while (next < xs.size() && xs[next] <= px) ++next;
        // Inside iff an odd number of crossings lie strictly to the right.
        if ((xs.size() - next) % 2 == 1) {
          m.covered[static_cast<std::size_t>(ly) * m.rect.w + lx] = 1;
        }
      }
    }
  });
  return masks;
}

std::vector<HardMask> rasterize_hard(std::span<const BezierShape> shapes,
                                     std::span<const ElementTransform> transforms,
                                     const RasterGrid& grid) {
  const auto polys = flatten_for_grid(shapes, transforms, grid);
  std::vector<RenderElement> els;
  els.reserve(polys.size());
  for (std::size_t i = 0; i < polys.size(); ++i) els.push_back({polys[i].vertices, transforms[i]});
  return rasterize_hard(els, grid, 1);
}

CoverageBuffer coverage_from_masks(std::span<const HardMask> masks, const RasterGrid& grid,
                                   double tau) {
  CoverageBuffer buf;
  buf.grid = grid;
  buf.tau = tau;
  for (const auto& m : masks) {
    ElementCoverage cov;
    cov.rect = m.rect;
    cov.alpha.resize(m.covered.size());
    for (std::size_t i = 0; i < m.covered.size(); ++i) cov.alpha[i] = m.covered[i] ? 1.0 : 0.0;
    buf.elements.push_back(std::move(cov));
  }
  accumulate(buf);
  return buf;
}

}  // namespace collage
