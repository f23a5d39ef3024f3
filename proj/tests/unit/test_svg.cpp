#include <doctest/doctest.h>

#include <cmath>
#include <string>

#include "collage/errors.hpp"
#include "collage/svg.hpp"
#include "support.hpp"

using namespace collage;

TEST_SUITE("svg") {

TEST_CASE("path data commands") {
  const auto subs = svg::parse_path_data("M 0 0 L 10 0 H 10 V 10 C 5 12 2 12 0 10 Z");
  REQUIRE(subs.size() == 1);
  CHECK(subs[0].closed);
  // L, H (zero length, kept), V, C and the closing line.
  CHECK(subs[0].segments.size() >= 4);
  CHECK(subs[0].segments.back().p[3] == Vec2{0, 0});

  const auto rel = svg::parse_path_data("m10,10 l5,0 l0,5 z");
  REQUIRE(rel.size() == 1);
  CHECK(rel[0].segments[1].p[3] == Vec2{15, 15});

  // Implicit lineto after moveto, scientific notation and packed numbers.
  const auto packed = svg::parse_path_data("M0,0 1e1,0 10-10z");
  REQUIRE(packed.size() == 1);
  CHECK(packed[0].segments[1].p[3] == Vec2{10, -10});

  CHECK_THROWS_AS(svg::parse_path_data("M 0 0 Q 1 1 2 2"), SvgParseError);
  CHECK_THROWS_AS(svg::parse_path_data("L 1 1"), SvgParseError);
}

TEST_CASE("documents and shapes") {
  const std::string doc = R"(<svg xmlns="http://www.w3.org/2000/svg">
    <path id="a" fill="#ff0000" d="M0 0 L4 0 L4 4 L0 4 Z"/>
  </svg>)";
  const auto paths = svg::parse_document(doc);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].fill == "#ff0000");
  CHECK(paths[0].id == "a");
  const svg::ParsedShape s = svg::shape_from_path(paths[0]);
  CHECK(s.shape.size() == 4);
  CHECK(s.shape.intrinsic_size() == doctest::Approx(4.0));
  CHECK(s.fill == "#ff0000");

  // A triangle of one line and one closing segment is split up to three.
  const svg::ParsedShape tri = svg::shape_from_path({"M0 0 L4 0 L0 4 Z", "", "t", ""});
  CHECK(tri.shape.size() >= BezierShape::kMinSegments);

  CHECK_THROWS_AS(svg::shape_from_path({"M0 0 L4 0 L4 4", "", "", ""}), Error);
}

TEST_CASE("export round trip") {
  const BezierShape sq = testing::rect_shape(1.25, 2.5, 3.75, 5.125);
  SUBCASE("identity keeps coordinates") {
    const svg::ExportItem item{&sq, {}, "#123456"};
    const std::string doc = svg::export_document({&item, 1}, {}, 600, 600);
    const auto back = svg::load_layout(doc);
    REQUIRE(back.size() == 1);
    CHECK(back[0].fill == "#123456");
    for (std::size_t k = 0; k < sq.size(); ++k) {
      CHECK(std::abs(back[0].shape.segments()[k].p[0].x - sq.segments()[k].p[0].x) < 1e-6);
      CHECK(std::abs(back[0].shape.segments()[k].p[0].y - sq.segments()[k].p[0].y) < 1e-6);
    }
  }
  SUBCASE("baked coordinates equal apply_transform") {
    ElementTransform xf;
    xf.t = {100, 200};
    xf.s = 3;
    xf.r = 0.7;
    const svg::ExportItem item{&sq, xf, "#000000"};
    const auto back = svg::load_layout(svg::export_document({&item, 1}, {}, 600, 600));
    const BezierShape want = apply_transform(sq, xf);
    REQUIRE(back.size() == 1);
    for (std::size_t k = 0; k < sq.size(); ++k) {
      for (int j = 0; j < 4; ++j) {
        CHECK(std::abs(back[0].shape.segments()[k].p[j].x - want.segments()[k].p[j].x) <= 5e-7);
        CHECK(std::abs(back[0].shape.segments()[k].p[j].y - want.segments()[k].p[j].y) <= 5e-7);
      }
    }
  }
  SUBCASE("zero elements keeps only the container layer") {
    const std::vector<Polyline> container{testing::rect_outline(0, 0, 10, 10)};
    const std::string doc = svg::export_document({}, container, 600, 600);
    CHECK(doc.find("class=\"container\"") != std::string::npos);
    CHECK(doc.find("class=\"element\"") == std::string::npos);
    CHECK(svg::load_layout(doc).empty());
    const auto outlines = svg::container_outlines_from_text(doc, 0.05);
    REQUIRE(outlines.size() == 1);
    CHECK(outlines[0].vertices.size() == 4);
  }
}

}  // TEST_SUITE
