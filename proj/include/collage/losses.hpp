#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "collage/container.hpp"
#include "collage/render.hpp"

namespace collage {

struct LossWeights {
  double alpha = 3e3;   // containment
  double beta = 8e4;    // overlap
  double gamma = 5e-4;  // uniformity
  double delta = 0.0;   // force; 0 disables

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

struct UniformLossConfig {
  std::vector<int> kernel_sizes{5, 11, 17, 23, 29};
  std::vector<double> level_weights{1, 2, 3, 4, 5};
  // Divide the weighted gap count by w * h.
  bool normalize = false;

  void validate() const;
  bool operator==(const UniformLossConfig&) const = default;
};

struct ForceSpec {
  enum class Kind { kDirectional, kPoint };
  Kind kind = Kind::kDirectional;
  // Unit vector, directional kind. Elements are pulled along it: the loss is
  // the distance from each centroid to the canvas edge lying that way.
  Vec2 direction{0.0, 1.0};
  Vec2 source{};             // canvas position, point kind
  // Per-element switch; empty means every element feels the force.
  std::vector<std::uint8_t> applies;

  static ForceSpec directional(Vec2 v) { return {Kind::kDirectional, v, {}, {}}; }
  static ForceSpec point(Vec2 q) { return {Kind::kPoint, {0.0, 1.0}, q, {}}; }
  bool applies_to(std::size_t i) const { return applies.empty() || (i < applies.size() && applies[i]); }
  void validate() const;
  bool operator==(const ForceSpec&) const = default;
};

struct LossValue {
  double loss = 0.0;
  PixelGrad grad;
};

LossValue containment_loss(const CoverageBuffer& buffer, const ContainerField& field);

struct OverlapValue {
  std::size_t hard_count = 0;  // pixels with T > tau
  double smooth_loss = 0.0;    // mean squared hinge, drives the gradient
  PixelGrad grad;
};

OverlapValue overlap_loss(const CoverageBuffer& buffer, double tau);

// Clamped box dilations of the soft occupancy; counts, per level, the
// interior pixels left undilated, weighted by the level weight.
LossValue uniform_loss(const CoverageBuffer& buffer, const ContainerField& field,
                       const UniformLossConfig& cfg);

struct ForceValue {
  double loss = 0.0;
  GradientSet grad;
};

// `local_centroids[i]` is the centroid of shape i in its local frame.
ForceValue force_loss(std::span<const ElementTransform> transforms,
                      std::span<const Vec2> local_centroids, const ForceSpec& spec);

struct LossBreakdown {
  double containment = 0.0;
  double overlap = 0.0;  // smooth surrogate
  std::size_t overlap_pixels = 0;
  double uniform = 0.0;
  double force = 0.0;
  double total = 0.0;
  bool operator==(const LossBreakdown&) const = default;
};

struct TotalLoss {
  LossBreakdown parts;
  GradientSet grad;
};

struct LossInputs {
  const CoverageBuffer* buffer = nullptr;
  const ContainerField* field = nullptr;
  std::span<const ElementTransform> transforms;
  std::span<const Vec2> local_centroids;
  const UniformLossConfig* uniform = nullptr;
  const ForceSpec* force = nullptr;  // may be null
  int threads = 1;
};

// Weighted sum of all sub-losses; pixel gradients are summed with their
// weights, pushed through backward once, then force gradients are added.
TotalLoss total_loss(const LossInputs& in, const LossWeights& weights);

// Sum over the kernel x kernel window centred on each pixel, treating pixels
// outside the grid as zero. Symmetric, hence its own adjoint.
Grid<double> box_sum(const Grid<double>& in, int kernel);

}  // namespace collage
