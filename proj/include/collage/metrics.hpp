#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collage/container.hpp"
#include "collage/render.hpp"
#include "collage/vecgeom.hpp"

namespace collage {

struct QualityCounts {
  std::size_t inside = 0;         // container pixels
  std::size_t object_inside = 0;  // covered and inside
  std::size_t overlap = 0;        // covered at least twice and inside
  std::size_t exceed = 0;         // covered and outside
  bool operator==(const QualityCounts&) const = default;
};

struct QualityReport {
  double lc = 0.0;
  double oo = 0.0;
  double ea = 0.0;
  // Mean squared distance (pixels^2) from uncovered interior pixels to the
  // nearest covered pixel; +inf when nothing is covered.
  double l_nu = 0.0;
  int resolution = 0;
  QualityCounts counts;
  bool operator==(const QualityReport&) const = default;
};

inline constexpr int kMetricsResolution = 600;

// Metrics from hard masks on the field's grid. Throws EmptyContainer.
QualityReport evaluate(std::span<const HardMask> masks, const ContainerField& field);
QualityReport evaluate(std::span<const BezierShape> shapes,
                       std::span<const ElementTransform> transforms, const ContainerField& field,
                       int threads = 1);
// Builds the container field at `resolution` (>= 100) first.
QualityReport evaluate(std::span<const BezierShape> shapes,
                       std::span<const ElementTransform> transforms,
                       const ContainerSource& container, int resolution = kMetricsResolution);

// {"lc":..,"oo":..,"ea":..,"l_nu":..,"resolution":..,"counts":{..}}. An
// infinite l_nu is written as null.
std::string to_json(const QualityReport& report);
QualityReport quality_report_from_json(const std::string& text);

struct CompareRow {
  std::string label;
  QualityReport report;
  std::optional<double> wall_time;  // seconds
};

// One row per input, in input order.
std::string compare_csv(std::span<const CompareRow> rows);

}  // namespace collage
