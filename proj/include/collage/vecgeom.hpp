#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace collage {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double k) const { return {x * k, y * k}; }
  constexpr Vec2 operator/(double k) const { return {x / k, y / k}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double k, Vec2 v) { return {k * v.x, k * v.y}; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
constexpr double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }

// Rotates `p` counter-clockwise (in a y-up frame) by `angle` radians.
inline Vec2 rotate(Vec2 p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

struct CubicSegment {
  std::array<Vec2, 4> p;

  Vec2 eval(double u) const;
  bool operator==(const CubicSegment&) const = default;
};

struct ElementTransform;

// A closed loop of cubic Bezier segments in local coordinates. The end anchor
// of segment k is bit-identical to the start anchor of segment k+1 (mod N).
class BezierShape {
 public:
  static constexpr std::size_t kMinSegments = 3;
  static constexpr std::size_t kDefaultSegments = 20;

  BezierShape() = default;

  // Validates closure, segment count and simplicity of the flattened loop.
  // Throws InvalidShape / DegenerateShape.
  BezierShape(std::vector<CubicSegment> segments, std::string id);

  // Builds a loop from N anchors and 2N handles: segment k runs from
  // anchors[k] through out_handles[k], in_handles[k] to anchors[k+1 mod N].
  // Closure holds by construction; no simplicity check is performed.
  static BezierShape from_anchors(std::span<const Vec2> anchors,
                                  std::span<const Vec2> out_handles,
                                  std::span<const Vec2> in_handles,
                                  std::string id);

  // Regular N-gon of cubic arcs approximating a circle.
  static BezierShape circle(Vec2 center, double radius, std::size_t segments,
                            std::string id = {});

  std::span<const CubicSegment> segments() const { return segments_; }
  std::size_t size() const { return segments_.size(); }
  const std::string& id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }

  // Square root of the enclosed area of the flattened loop.
  double intrinsic_size() const { return intrinsic_size_; }
  // Area centroid of the flattened loop.
  Vec2 centroid() const { return centroid_; }
  // Largest distance from the centroid to any control point.
  double bounding_radius() const;

  // Same loop translated so its centroid sits at the origin.
  BezierShape centered() const;
  bool is_closed() const;

  bool operator==(const BezierShape& o) const { return segments_ == o.segments_ && id_ == o.id_; }

 private:
  friend BezierShape apply_transform(const BezierShape& shape, const ElementTransform& xf);
  static BezierShape unchecked(std::vector<CubicSegment> segments, std::string id);
  void compute_area_stats();

  std::vector<CubicSegment> segments_;
  std::string id_;
  double intrinsic_size_ = 0.0;
  Vec2 centroid_{};
};

struct RotationMode {
  enum class Kind { kFree, kFixed, kRange };
  Kind kind = Kind::kFree;
  double lo = 0.0;
  double hi = 0.0;

  static RotationMode free() { return {}; }
  static RotationMode fixed() { return {Kind::kFixed, 0.0, 0.0}; }
  static RotationMode range(double lo, double hi) { return {Kind::kRange, lo, hi}; }
  bool operator==(const RotationMode&) const = default;
};

enum class ScaleMode { kFree, kFixed };

inline constexpr double kMinScale = 1e-3;

// Per-element similarity transform p -> R(r) * (s * p) + t.
struct ElementTransform {
  Vec2 t{};
  double s = 1.0;
  double r = 0.0;
  RotationMode rotation_mode{};
  ScaleMode scale_mode = ScaleMode::kFree;

  Vec2 apply(Vec2 p) const { return rotate(p * s, r) + t; }
  Vec2 inverse(Vec2 q) const { return rotate(q - t, -r) / s; }
  bool valid() const;
  // Clamps s and r back into their admissible sets.
  void project();
  bool operator==(const ElementTransform&) const = default;
};

struct Polyline {
  std::vector<Vec2> vertices;
  bool closed = true;

  double signed_area() const;
  std::size_t segment_count() const {
    return closed ? vertices.size() : (vertices.empty() ? 0 : vertices.size() - 1);
  }
};

BezierShape apply_transform(const BezierShape& shape, const ElementTransform& xf);
Polyline apply_transform(const Polyline& poly, const ElementTransform& xf);

// Adaptive subdivision until every control polygon lies within `tolerance`
// of its chord. Throws DegenerateShape when the enclosed area < tolerance^2.
Polyline flatten(const BezierShape& shape, double tolerance);

// Default flattening tolerance in local units: a quarter pixel at the given
// pixel density, divided by the transform scale.
double flatten_tolerance(double pixels_per_unit, double scale);

// Nearest point of a closed polyline together with even-odd containment.
struct BoundaryHit {
  double dist2 = 0.0;
  std::size_t segment = 0;  // index of the segment holding the witness
  double u = 0.0;           // witness = v[seg] + u * (v[seg+1] - v[seg])
  bool inside = false;
};

// Brute-force scan over all segments. Ties go to the lower segment index.
BoundaryHit nearest_boundary(std::span<const Vec2> vertices, Vec2 p);

struct SignedDistance {
  double distance = 0.0;  // negative inside
  Vec2 witness{};
  bool inside = false;
  std::size_t segment = 0;
  double u = 0.0;
};

SignedDistance signed_distance(const Polyline& poly, Vec2 p);

// Outward unit direction used for differentiating the signed distance at a
// hit: (p - q)/|p - q| flipped for inside points, or the segment normal when
// p sits on the boundary. `orientation` is the sign of the polygon area.
Vec2 outward_direction(std::span<const Vec2> vertices, const BoundaryHit& hit, Vec2 p,
                       double orientation);

struct TransformJacobian {
  Vec2 dt{};
  double ds = 0.0;
  double dr = 0.0;
};

// Derivatives of the signed distance from the fixed point `p` to the moving
// outline `poly` (already transformed by `xf`) with respect to xf's t, s, r.
TransformJacobian signed_distance_jacobian(const Polyline& poly, Vec2 p,
                                           const ElementTransform& xf);

// True when no two non-adjacent edges of the closed polyline intersect.
bool is_simple(const Polyline& poly);

}  // namespace collage
