#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "collage/vecgeom.hpp"

namespace collage::svg {

// One subpath of a `d` attribute, already promoted to cubic segments.
struct Subpath {
  std::vector<CubicSegment> segments;
  bool closed = false;
};

// Parses the M/L/H/V/C/Z subset (absolute and relative). Throws SvgParseError.
std::vector<Subpath> parse_path_data(std::string_view d);

struct PathElement {
  std::string d;
  std::string fill;
  std::string id;
  std::string css_class;
};

// Extracts every <path> element of a document, in document order.
std::vector<PathElement> parse_document(std::string_view text);

struct ParsedShape {
  BezierShape shape;
  std::string fill;
};

// Converts one path element into a validated closed loop. Segment counts
// below three are raised by splitting the longest segments at their midpoint.
ParsedShape shape_from_path(const PathElement& element);

// Loads the single element path of a shape file.
ParsedShape load_shape(const std::filesystem::path& file);

// Loads every path of a container file; each must be a closed subpath.
std::vector<Polyline> load_container_outlines(const std::filesystem::path& file,
                                              double tolerance);
std::vector<Polyline> container_outlines_from_text(std::string_view text, double tolerance);

// "M x y C ... Z" with fixed six-decimal coordinates.
std::string path_data(const BezierShape& shape);
std::string path_data(const Polyline& poly);

struct ExportItem {
  const BezierShape* shape = nullptr;
  ElementTransform transform;
  std::string color;
};

// Standalone SVG 1.1 document: one `element` path per item with its
// transform baked in, plus the container outlines as a reference layer.
std::string export_document(std::span<const ExportItem> items,
                            std::span<const Polyline> container, double canvas_width,
                            double canvas_height);

// Paths tagged class="element" in a document written by export_document.
std::vector<ParsedShape> load_layout(std::string_view text);

}  // namespace collage::svg
