#include "collage/metrics.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "collage/errors.hpp"

namespace collage {

QualityReport evaluate(std::span<const HardMask> masks, const ContainerField& field) {
  if (field.interior_count == 0) throw EmptyContainer("container has no interior pixels");
  const int w = field.grid.width;
  const int h = field.grid.height;
  Grid<int> cover(w, h, 0);
  for (const HardMask& m : masks) {
    for (int ly = 0; ly < m.rect.h; ++ly) {
      for (int lx = 0; lx < m.rect.w; ++lx) {
        if (m.covered[static_cast<std::size_t>(ly) * m.rect.w + lx]) ++cover.at(m.rect.x0 + lx, m.rect.y0 + ly);
      }
    }
  }

  QualityReport r;
  r.resolution = w;
  Grid<std::uint8_t> object(w, h, 0);
  for (std::size_t i = 0; i < cover.size(); ++i) {
    const bool in = field.interior.data[i] != 0;
    const int c = cover.data[i];
    object.data[i] = c > 0 ? 1 : 0;
    r.counts.inside += in;
    if (c > 0 && in) ++r.counts.object_inside;
    if (c > 1 && in) ++r.counts.overlap;
    if (c > 0 && !in) ++r.counts.exceed;
  }
  const double n = static_cast<double>(r.counts.inside);
  r.lc = r.counts.object_inside / n;
  r.oo = r.counts.overlap / n;
  r.ea = r.counts.exceed / n;

  const Grid<double> d2 = squared_distance_transform(object);
  double sum = 0.0;
  std::size_t gaps = 0;
  for (std::size_t i = 0; i < d2.size(); ++i) {
    if (field.interior.data[i] && !object.data[i]) {
      sum += d2.data[i];
      ++gaps;
    }
  }
  r.l_nu = gaps == 0 ? 0.0 : sum / static_cast<double>(gaps);
  return r;
}

QualityReport evaluate(std::span<const BezierShape> shapes,
                       std::span<const ElementTransform> transforms, const ContainerField& field,
                       int threads) {
  const auto polys = flatten_for_grid(shapes, transforms, field.grid);
  std::vector<RenderElement> els;
  els.reserve(polys.size());
  for (std::size_t i = 0; i < polys.size(); ++i) els.push_back({polys[i].vertices, transforms[i]});
  return evaluate(rasterize_hard(els, field.grid, threads), field);
}

QualityReport evaluate(std::span<const BezierShape> shapes,
                       std::span<const ElementTransform> transforms,
                       const ContainerSource& container, int resolution) {
  if (resolution < 100) throw ValidationError("metrics.resolution", "must be at least 100");
  const ContainerField field = build_container_field(container, RasterGrid::square(resolution));
  return evaluate(shapes, transforms, field);
}

namespace {

nlohmann::ordered_json report_object(const QualityReport& r) {
  nlohmann::ordered_json j;
  j["lc"] = r.lc;
  j["oo"] = r.oo;
  j["ea"] = r.ea;
  j["l_nu"] = std::isfinite(r.l_nu) ? nlohmann::ordered_json(r.l_nu) : nlohmann::ordered_json(nullptr);
  j["resolution"] = r.resolution;
  j["counts"] = {{"inside", r.counts.inside},
                 {"object_inside", r.counts.object_inside},
                 {"overlap", r.counts.overlap},
                 {"exceed", r.counts.exceed}};
  return j;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

std::string to_json(const QualityReport& report) { return report_object(report).dump(2) + "\n"; }

QualityReport quality_report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0, 0);
  }
  if (j.contains("metrics")) j = j["metrics"];
  QualityReport r;
  try {
    r.lc = j.at("lc").get<double>();
    r.oo = j.at("oo").get<double>();
    r.ea = j.at("ea").get<double>();
    r.l_nu = j.at("l_nu").is_null() ? std::numeric_limits<double>::infinity() : j.at("l_nu").get<double>();
    r.resolution = j.value("resolution", 0);
    if (j.contains("counts")) {
      const auto& c = j["counts"];
      r.counts.inside = c.value("inside", std::size_t{0});
      r.counts.object_inside = c.value("object_inside", std::size_t{0});
      r.counts.overlap = c.value("overlap", std::size_t{0});
      r.counts.exceed = c.value("exceed", std::size_t{0});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("metrics", e.what());
  }
  return r;
}

std::string compare_csv(std::span<const CompareRow> rows) {
  std::string out = "label,lc,oo,ea,l_nu,resolution,wall_time\n";
  for (const CompareRow& row : rows) {
    const QualityReport& r = row.report;
    out += fmt::format("{},{:.6f},{:.6f},{:.6f},{},{},{}\n", csv_field(row.label), r.lc, r.oo, r.ea,
                       std::isfinite(r.l_nu) ? fmt::format("{:.6f}", r.l_nu) : std::string("inf"),
                       r.resolution, row.wall_time ? fmt::format("{:.3f}", *row.wall_time) : std::string());
  }
  return out;
}

}  // namespace collage
