#include "collage/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "collage/errors.hpp"

namespace collage {

void LossWeights::validate() const {
  const std::pair<const char*, double> items[] = {
      {"weights.alpha", alpha}, {"weights.beta", beta}, {"weights.gamma", gamma}, {"weights.delta", delta}};
  for (const auto& [key, v] : items) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(key, "must be a finite value >= 0");
  }
}

void UniformLossConfig::validate() const {
  if (kernel_sizes.size() != level_weights.size()) {
    throw ValidationError("uniform", "kernel_sizes and level_weights must have the same length");
  }
  for (std::size_t i = 0; i < kernel_sizes.size(); ++i) {
    if (kernel_sizes[i] <= 0 || kernel_sizes[i] % 2 == 0) {
      throw ValidationError("uniform.kernel_sizes", "kernel widths must be positive odd integers");
    }
    if (!(level_weights[i] > 0.0)) {
      throw ValidationError("uniform.level_weights", "weights must be positive");
    }
    if (i > 0 && kernel_sizes[i] <= kernel_sizes[i - 1]) {
      throw ValidationError("uniform.kernel_sizes", "must be strictly increasing");
    }
    if (i > 0 && level_weights[i] <= level_weights[i - 1]) {
      throw ValidationError("uniform.level_weights", "must be strictly increasing");
    }
  }
}

void ForceSpec::validate() const {
  if (kind == Kind::kDirectional && std::abs(norm(direction) - 1.0) > 1e-9) {
    throw ValidationError("force.direction", "must be a unit vector");
  }
}

Grid<double> box_sum(const Grid<double>& in, int kernel) {
  const int w = in.width;
  const int h = in.height;
  const int half = kernel / 2;
  Grid<double> tmp(w, h, 0.0);
  Grid<double> out(w, h, 0.0);
  std::vector<double> prefix(static_cast<std::size_t>(std::max(w, h)) + 1, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + in.at(x, y);
    for (int x = 0; x < w; ++x) {
      const int lo = std::max(0, x - half);
      const int hi = std::min(w - 1, x + half);
      tmp.at(x, y) = prefix[hi + 1] - prefix[lo];
    }
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + tmp.at(x, y);
    for (int y = 0; y < h; ++y) {
      const int lo = std::max(0, y - half);
      const int hi = std::min(h - 1, y + half);
      out.at(x, y) = prefix[hi + 1] - prefix[lo];
    }
  }
  return out;
}

LossValue containment_loss(const CoverageBuffer& buffer, const ContainerField& field) {
  const int w = buffer.width();
  const int h = buffer.height();
  if (!field.interior.same_shape(w, h)) {
    throw ResolutionMismatch(fmt::format("containment: buffer {}x{} vs container {}x{}", w, h,
                                         field.interior.width, field.interior.height));
  }
  const double inv_n = 1.0 / (static_cast<double>(w) * h);

  // Product of (1 - alpha_j) over the factors that are nonzero, and the
  // number of exact zeros, so prod_{j != i} can be recovered without
  // dividing by zero.
  Grid<double> nonzero_product(w, h, 1.0);
  Grid<int> zero_count(w, h, 0);
  for (const auto& el : buffer.elements) {
    std::size_t idx = 0;
    for (int ly = 0; ly < el.rect.h; ++ly) {
      const std::size_t row = static_cast<std::size_t>(el.rect.y0 + ly) * w + el.rect.x0;
      for (int lx = 0; lx < el.rect.w; ++lx, ++idx) {
        const double f = 1.0 - el.alpha[idx];
        if (f == 0.0) {
          ++zero_count.data[row + lx];
        } else {
          nonzero_product.data[row + lx] *= f;
        }
      }
    }
  }

  LossValue out;
  Grid<double> residual(w, h, 0.0);  // (2/N) W (c - I_C)
  double loss = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    const double c = zero_count.data[i] > 0 ? 0.0 : nonzero_product.data[i];
    const double diff = c - field.target.data[i];
    loss += field.penalty.data[i] * diff * diff;
    residual.data[i] = 2.0 * inv_n * field.penalty.data[i] * diff;
  }
  out.loss = loss * inv_n;

  out.grad.per_element.resize(buffer.elements.size());
  for (std::size_t e = 0; e < buffer.elements.size(); ++e) {
    const auto& el = buffer.elements[e];
    auto& g = out.grad.per_element[e];
    g.assign(el.alpha.size(), 0.0);
    std::size_t idx = 0;
    for (int ly = 0; ly < el.rect.h; ++ly) {
      const std::size_t row = static_cast<std::size_t>(el.rect.y0 + ly) * w + el.rect.x0;
      for (int lx = 0; lx < el.rect.w; ++lx, ++idx) {
        const std::size_t p = row + lx;
        const double f = 1.0 - el.alpha[idx];
        double others;
        if (f == 0.0) {
          others = zero_count.data[p] == 1 ? nonzero_product.data[p] : 0.0;
        } else {
          others = zero_count.data[p] == 0 ? nonzero_product.data[p] / f : 0.0;
        }
        g[idx] = -residual.data[p] * others;
      }
    }
  }
  return out;
}

OverlapValue overlap_loss(const CoverageBuffer& buffer, double tau) {
  const int w = buffer.width();
  const int h = buffer.height();
  const double inv_n = 1.0 / (static_cast<double>(w) * h);
  OverlapValue out;
  out.grad.shared = Grid<double>(w, h, 0.0);
  out.grad.per_element.resize(buffer.elements.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < buffer.transparency.size(); ++i) {
    const double excess = buffer.transparency.data[i] - tau;
    if (excess > 0.0) {
      ++out.hard_count;
      loss += excess * excess;
      // dT/dalpha_i = tau.
      out.grad.shared.data[i] = 2.0 * tau * inv_n * excess;
    }
  }
  out.smooth_loss = loss * inv_n;
  return out;
}

LossValue uniform_loss(const CoverageBuffer& buffer, const ContainerField& field,
                       const UniformLossConfig& cfg) {
  const int w = buffer.width();
  const int h = buffer.height();
  if (!field.interior.same_shape(w, h)) {
    throw ResolutionMismatch(fmt::format("uniform: buffer {}x{} vs container {}x{}", w, h,
                                         field.interior.width, field.interior.height));
  }
  for (int k : cfg.kernel_sizes) {
    if (k > std::min(w, h)) {
      throw KernelTooLarge(fmt::format("uniform: kernel {} exceeds resolution {}x{}", k, w, h));
    }
  }

  Grid<double> occupancy_raw(w, h, 0.0);
  for (const auto& el : buffer.elements) {
    std::size_t idx = 0;
    for (int ly = 0; ly < el.rect.h; ++ly) {
      const std::size_t row = static_cast<std::size_t>(el.rect.y0 + ly) * w + el.rect.x0;
      for (int lx = 0; lx < el.rect.w; ++lx, ++idx) occupancy_raw.data[row + lx] += el.alpha[idx];
    }
  }
  Grid<double> occupancy(w, h, 0.0);
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    occupancy.data[i] = std::clamp(occupancy_raw.data[i], 0.0, 1.0);
  }

  LossValue out;
  Grid<double> d_occupancy(w, h, 0.0);
  Grid<double> active(w, h, 0.0);
  for (std::size_t level = 0; level < cfg.kernel_sizes.size(); ++level) {
    const double weight = cfg.level_weights[level];
    const Grid<double> dilated = box_sum(occupancy, cfg.kernel_sizes[level]);
    bool any_active = false;
    for (std::size_t i = 0; i < dilated.size(); ++i) {
      active.data[i] = 0.0;
      if (!field.interior.data[i]) continue;
      const double raw = dilated.data[i];
      out.loss += weight * (1.0 - std::clamp(raw, 0.0, 1.0));
      if (raw > 0.0 && raw < 1.0) {
        active.data[i] = 1.0;
        any_active = true;
      }
    }
    if (!any_active) continue;
    const Grid<double> back = box_sum(active, cfg.kernel_sizes[level]);
    for (std::size_t i = 0; i < back.size(); ++i) d_occupancy.data[i] -= weight * back.data[i];
  }

  const double scale = cfg.normalize ? 1.0 / (static_cast<double>(w) * h) : 1.0;
  out.loss *= scale;
  out.grad.shared = Grid<double>(w, h, 0.0);
  out.grad.per_element.resize(buffer.elements.size());
  for (std::size_t i = 0; i < occupancy.size(); ++i) {
    const double raw = occupancy_raw.data[i];
    if (raw > 0.0 && raw < 1.0) out.grad.shared.data[i] = scale * d_occupancy.data[i];
  }
  return out;
}

ForceValue force_loss(std::span<const ElementTransform> transforms,
                      std::span<const Vec2> local_centroids, const ForceSpec& spec) {
  ForceValue out;
  out.grad.resize(transforms.size());
  // Farthest canvas corner along the direction.
  const double edge = RasterGrid::kCanvasSize * (std::max(spec.direction.x, 0.0) + std::max(spec.direction.y, 0.0));
  for (std::size_t i = 0; i < transforms.size(); ++i) {
    if (!spec.applies_to(i)) continue;
    const ElementTransform& xf = transforms[i];
    const Vec2 c0 = i < local_centroids.size() ? local_centroids[i] : Vec2{};
    const Vec2 c = xf.apply(c0);
    Vec2 dc;  // dL/dc
    if (spec.kind == ForceSpec::Kind::kDirectional) {
      out.loss += edge - dot(c, spec.direction);
      dc = -spec.direction;
    } else {
      const Vec2 diff = c - spec.source;
      out.loss += norm2(diff);
      dc = diff * 2.0;
    }
    // c = R(r) s c0 + t.
    const Vec2 rel = c - xf.t;
    out.grad[i].dt = dc;
    out.grad[i].ds = dot(dc, rel / xf.s);
    out.grad[i].dr = dot(dc, perp(rel));
  }
  return out;
}

TotalLoss total_loss(const LossInputs& in, const LossWeights& weights) {
  const CoverageBuffer& buffer = *in.buffer;
  TotalLoss out;
  PixelGrad combined = PixelGrad::zeros(buffer);

  if (weights.alpha != 0.0) {
    LossValue c = containment_loss(buffer, *in.field);
    out.parts.containment = c.loss;
    combined.add_scaled(c.grad, weights.alpha);
  }
  OverlapValue o = overlap_loss(buffer, buffer.tau);
  out.parts.overlap = o.smooth_loss;
  out.parts.overlap_pixels = o.hard_count;
  if (weights.beta != 0.0) combined.add_scaled(o.grad, weights.beta);
  if (weights.gamma != 0.0) {
    LossValue u = uniform_loss(buffer, *in.field, *in.uniform);
    out.parts.uniform = u.loss;
    combined.add_scaled(u.grad, weights.gamma);
  }

  out.grad = backward(buffer, combined, in.threads);

  if (weights.delta != 0.0 && in.force != nullptr) {
    ForceValue f = force_loss(in.transforms, in.local_centroids, *in.force);
    out.parts.force = f.loss;
    for (std::size_t i = 0; i < out.grad.size() && i < f.grad.size(); ++i) {
      out.grad[i].dt += f.grad[i].dt * weights.delta;
      out.grad[i].ds += weights.delta * f.grad[i].ds;
      out.grad[i].dr += weights.delta * f.grad[i].dr;
    }
  }
  out.parts.total = weights.alpha * out.parts.containment + weights.beta * out.parts.overlap +
                    weights.gamma * out.parts.uniform + weights.delta * out.parts.force;
  return out;
}

}  // namespace collage
