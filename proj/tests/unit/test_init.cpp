#include <doctest/doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "collage/errors.hpp"
#include "collage/init.hpp"
#include "support.hpp"

using namespace collage;

namespace {

ContainerField field_at_200(std::vector<Polyline> outlines) {
  return build_container_field(ContainerSource::from_outlines(std::move(outlines)),
                               RasterGrid::square(kSkeletonResolution));
}

bool inside_at(const ContainerField& f, Vec2 p) {
  const int x = static_cast<int>(std::floor(p.x * f.grid.pixels_per_unit));
  const int y = static_cast<int>(std::floor(p.y * f.grid.pixels_per_unit));
  return x >= 0 && y >= 0 && x < f.grid.width && y < f.grid.height && f.inside(x, y);
}

// Disc on the left tapering to a tip at the right.
Polyline teardrop() {
  std::vector<Vec2> pts;
  const double r = 150;
  const Vec2 c{200, 300};
  // Tangent points from the tip (560, 300).
  const double a = std::acos(r / 360.0);
  for (int k = 0; k <= 64; ++k) {
    const double t = a + (2 * std::numbers::pi - 2 * a) * k / 64.0;
    pts.push_back(c + Vec2{std::cos(t), std::sin(t)} * r);
  }
  pts.push_back({560, 300});
  return testing::polygon(pts);
}

const double kPx = RasterGrid::kCanvasSize / kSkeletonResolution;

}  // namespace

TEST_SUITE("init") {

TEST_CASE("disc skeleton collapses to the centre") {
  const ContainerField f = field_at_200({testing::circle_outline({300, 300}, 200, 256)});
  const Skeleton sk = extract_skeleton(f);
  REQUIRE_FALSE(sk.points.empty());
  const auto widest = std::max_element(sk.points.begin(), sk.points.end(),
                                       [](const auto& a, const auto& b) { return a.medial_width < b.medial_width; });
  CHECK(norm(widest->position - Vec2{300, 300}) <= 2 * kPx);
  CHECK(std::abs(widest->medial_width - 200) <= 2 * kPx);
  // Thinning a disc leaves a small blob around the centre.
  for (const auto& p : sk.points) CHECK(norm(p.position - Vec2{300, 300}) <= 4 * kPx);
}

TEST_CASE("rectangle skeleton follows the midline") {
  const ContainerField f = field_at_200({testing::rect_outline(60, 200, 540, 400)});
  const Skeleton sk = extract_skeleton(f);
  int midline = 0;
  for (const auto& p : sk.points) {
    if (p.position.x < 240 || p.position.x > 360) continue;
    CHECK(std::abs(p.position.y - 300) <= 2 * kPx);
    CHECK(std::abs(p.medial_width - 100) <= 2 * kPx);
    ++midline;
  }
  CHECK(midline >= 30);
}

TEST_CASE("two discs joined by a neck") {
  const std::vector<Polyline> parts{testing::circle_outline({150, 300}, 120, 128),
                                    testing::circle_outline({450, 300}, 120, 128)};
  Grid<std::uint8_t> mask = rasterize_outlines(parts, RasterGrid::square(kSkeletonResolution));
  const Grid<std::uint8_t> neck =
      rasterize_outlines(std::vector<Polyline>{testing::rect_outline(150, 282, 450, 318)},
                         RasterGrid::square(kSkeletonResolution));
  for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] |= neck.data[i];
  const ContainerField f = build_container_field(ContainerSource::from_mask(mask), RasterGrid::square(kSkeletonResolution));
  const Skeleton sk = extract_skeleton(f);

  bool through_neck = false;
  double min_width = std::numeric_limits<double>::infinity();
  Vec2 at_min{};
  for (const auto& p : sk.points) {
    if (std::abs(p.position.y - 300) > 2 * kPx) continue;
    through_neck |= std::abs(p.position.x - 300) < 2 * kPx;
    if (p.medial_width < min_width) {
      min_width = p.medial_width;
      at_min = p.position;
    }
  }
  CHECK(through_neck);
  // The neck walls meet the discs at x = 150 +- sqrt(120^2 - 18^2) ~ 268.6 and 331.4.
  CHECK(at_min.x > 268.6 - kPx);
  CHECK(at_min.x < 331.4 + kPx);
  CHECK(std::abs(min_width - 18) <= 2 * kPx);
}

TEST_CASE("skeleton invariants") {
  const ContainerField f = field_at_200({testing::polygon({{80, 60}, {540, 120}, {420, 520}, {300, 330}, {70, 540}})});
  const Skeleton sk = extract_skeleton(f);
  for (const auto& p : sk.points) {
    REQUIRE(inside_at(f, p.position));
    const int x = static_cast<int>(p.position.x / kPx), y = static_cast<int>(p.position.y / kPx);
    CHECK(std::abs(p.medial_width - -f.distance.at(x, y) * kPx) <= kPx);
  }
  CHECK(extract_skeleton(f, 10).points.size() <= 10);
}

TEST_CASE("thinning keeps components") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Polyline> blobs;
    for (int k = 0; k < 4; ++k) {
      const Vec2 c{80 + 440 * U(rng), 80 + 440 * U(rng)};
      auto pts = testing::random_star(rng, 25, 70, 9);
      for (auto& p : pts) p = p + c;
      blobs.push_back(testing::polygon(pts));
    }
    // Union, not even-odd.
    Grid<std::uint8_t> mask(100, 100, 0);
    for (const auto& b : blobs) {
      const Grid<std::uint8_t> m = rasterize_outlines({&b, 1}, RasterGrid::square(100));
      for (std::size_t i = 0; i < mask.size(); ++i) mask.data[i] |= m.data[i];
    }
    const Grid<std::uint8_t> thinned = thin(mask);
    CHECK(count_components(thinned) == count_components(mask));
    for (std::size_t i = 0; i < mask.size(); ++i) REQUIRE((!thinned.data[i] || mask.data[i]));
  }
}

TEST_CASE("empty container") {
  const ContainerField f = build_container_field(ContainerSource::from_mask(Grid<std::uint8_t>(200, 200, 0)),
                                                 RasterGrid::square(200));
  CHECK_THROWS_AS(extract_skeleton(f), EmptyContainer);
  const BezierShape sq = testing::square_shape(10);
  CHECK_THROWS_AS(place_random(f, {&sq, 1}, {}, 1), EmptyContainer);
}

TEST_CASE("one shape in a disc goes to the centre") {
  const ContainerField f = field_at_200({testing::circle_outline({300, 300}, 200, 256)});
  const BezierShape sq = testing::square_shape(40);
  const Placement p = place_elements(extract_skeleton(f), {&sq, 1}, {}, f, 3);
  REQUIRE(p.transforms.size() == 1);
  CHECK(norm(p.transforms[0].apply(sq.centroid()) - Vec2{300, 300}) <= 2 * kPx);
  CHECK(p.overflow == 0);
}

TEST_CASE("larger shapes take wider points") {
  const ContainerField f = field_at_200({teardrop()});
  const Skeleton sk = extract_skeleton(f, 64);

  SUBCASE("two shapes of sizes 2:1") {
    const std::vector<BezierShape> shapes{testing::square_shape(20), testing::square_shape(40)};
    const Placement p = place_elements(sk, shapes, {}, f, 1);
    CHECK(p.assigned_width[1] > p.assigned_width[0]);
  }
  SUBCASE("monotone over many sizes") {
    std::vector<BezierShape> shapes;
    for (double side : {12.0, 50.0, 20.0, 35.0, 8.0, 28.0, 16.0, 44.0}) shapes.push_back(testing::square_shape(side));
    const Placement p = place_elements(sk, shapes, {}, f, 1);
    for (std::size_t a = 0; a < shapes.size(); ++a) {
      for (std::size_t b = 0; b < shapes.size(); ++b) {
        if (shapes[a].intrinsic_size() > shapes[b].intrinsic_size() && p.assigned_width[b] >= 0) {
          CHECK(p.assigned_width[a] >= p.assigned_width[b]);
        }
      }
    }
  }
}

TEST_CASE("placement is deterministic and inside") {
  const ContainerField f = field_at_200({testing::polygon({{80, 60}, {540, 120}, {420, 520}, {300, 330}, {70, 540}})});
  std::vector<BezierShape> shapes;
  for (int i = 0; i < 30; ++i) shapes.push_back(testing::square_shape(10 + i));
  const Skeleton sk = extract_skeleton(f, 4 * shapes.size());
  const Placement a = place_elements(sk, shapes, {}, f, 42);
  const Placement b = place_elements(sk, shapes, {}, f, 42);
  CHECK(a.transforms == b.transforms);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    CHECK(inside_at(f, a.transforms[i].apply(shapes[i].centroid())));
    CHECK(a.transforms[i].s <= 1.0);
    CHECK(a.transforms[i].r == 0.0);
  }
}

TEST_CASE("fixed modes are respected") {
  const ContainerField f = field_at_200({testing::circle_outline({300, 300}, 200, 128)});
  const std::vector<BezierShape> shapes{testing::square_shape(30), testing::square_shape(30)};
  std::vector<ElementTransform> init(2);
  init[0].scale_mode = ScaleMode::kFixed;
  init[0].s = 2.5;
  init[1].rotation_mode = RotationMode::range(0.2, 0.6);
  const Placement p = place_elements(extract_skeleton(f), shapes, init, f, 0);
  CHECK(p.transforms[0].s == 2.5);
  CHECK(p.transforms[1].r == doctest::Approx(0.4));
}

TEST_CASE("random placement") {
  const ContainerField f = field_at_200({testing::polygon({{80, 60}, {540, 120}, {420, 520}, {300, 330}, {70, 540}})});
  std::vector<BezierShape> shapes(50, testing::square_shape(10));
  const auto a = place_random(f, shapes, {}, 1);
  const auto b = place_random(f, shapes, {}, 2);
  CHECK(a == place_random(f, shapes, {}, 1));
  CHECK(a != b);
  for (std::size_t i = 0; i < shapes.size(); ++i) CHECK(inside_at(f, a[i].apply(shapes[i].centroid())));
}

}  // TEST_SUITE
