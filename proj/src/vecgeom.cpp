#include "collage/vecgeom.hpp"

#include <algorithm>
#include <limits>
#include <numbers>

#include "collage/errors.hpp"

namespace collage {

namespace {

constexpr int kMaxSubdivisionDepth = 24;

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const double len2 = norm2(e);
  double u = 0.0;
  if (len2 > 0.0) {
    u = std::clamp(dot(p - a, e) / len2, 0.0, 1.0);
  }
  return norm(p - (a + e * u));
}

void subdivide(const std::array<Vec2, 4>& c, double tolerance, int depth, std::vector<Vec2>& out) {
  // The curve lies in the convex hull of its control points, so the distance
  // of the two handles to the chord bounds the chord deviation.
  const double flatness = std::max(point_segment_distance(c[1], c[0], c[3]),
                                   point_segment_distance(c[2], c[0], c[3]));
  if (flatness <= tolerance || depth >= kMaxSubdivisionDepth) {
    out.push_back(c[3]);
    return;
  }
  const Vec2 p01 = (c[0] + c[1]) * 0.5;
  const Vec2 p12 = (c[1] + c[2]) * 0.5;
  const Vec2 p23 = (c[2] + c[3]) * 0.5;
  const Vec2 p012 = (p01 + p12) * 0.5;
  const Vec2 p123 = (p12 + p23) * 0.5;
  const Vec2 mid = (p012 + p123) * 0.5;
  subdivide({c[0], p01, p012, mid}, tolerance, depth + 1, out);
  subdivide({mid, p123, p23, c[3]}, tolerance, depth + 1, out);
}

std::vector<Vec2> flatten_vertices(std::span<const CubicSegment> segments, double tolerance) {
  std::vector<Vec2> pts;
  if (segments.empty()) return pts;
  pts.push_back(segments.front().p[0]);
  for (const auto& seg : segments) subdivide(seg.p, tolerance, 0, pts);

  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const Vec2& v : pts) {
    if (out.empty() || !(out.back() == v)) out.push_back(v);
  }
  while (out.size() > 1 && out.back() == out.front()) out.pop_back();
  return out;
}

double shoelace(std::span<const Vec2> v) {
  double a = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    a += cross(v[i], v[(i + 1) % n]);
  }
  return 0.5 * a;
}

int orient(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orient(a, b, c);
  const int o2 = orient(a, b, d);
  const int o3 = orient(c, d, a);
  const int o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double default_local_tolerance(std::span<const CubicSegment> segments) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  for (const auto& seg : segments) {
    for (const Vec2& p : seg.p) {
      lo_x = std::min(lo_x, p.x);
      lo_y = std::min(lo_y, p.y);
      hi_x = std::max(hi_x, p.x);
      hi_y = std::max(hi_y, p.y);
    }
  }
  const double diag = std::hypot(hi_x - lo_x, hi_y - lo_y);
  return std::min(0.25, 0.01 * diag);
}

}  // namespace

Vec2 CubicSegment::eval(double u) const {
  const double a = 1.0 - u;
  const double b0 = a * a * a;
  const double b1 = 3.0 * a * a * u;
  const double b2 = 3.0 * a * u * u;
  const double b3 = u * u * u;
  return p[0] * b0 + p[1] * b1 + p[2] * b2 + p[3] * b3;
}

BezierShape::BezierShape(std::vector<CubicSegment> segments, std::string id)
    : segments_(std::move(segments)), id_(std::move(id)) {
  if (segments_.size() < kMinSegments) {
    throw InvalidShape("shape '" + id_ + "' has " + std::to_string(segments_.size()) +
                       " segments; at least 3 are required");
  }
  if (!is_closed()) {
    throw InvalidShape("shape '" + id_ + "' is not a closed loop");
  }
  const double tol = default_local_tolerance(segments_);
  if (!(tol > 0.0)) throw DegenerateShape("shape '" + id_ + "' has zero extent");
  const Polyline poly = flatten(*this, tol);
  if (!is_simple(poly)) {
    throw InvalidShape("shape '" + id_ + "' is self-intersecting");
  }
  compute_area_stats();
}

BezierShape BezierShape::unchecked(std::vector<CubicSegment> segments, std::string id) {
  BezierShape shape;
  shape.segments_ = std::move(segments);
  shape.id_ = std::move(id);
  shape.compute_area_stats();
  return shape;
}

BezierShape BezierShape::from_anchors(std::span<const Vec2> anchors,
                                      std::span<const Vec2> out_handles,
                                      std::span<const Vec2> in_handles, std::string id) {
  const std::size_t n = anchors.size();
  if (n < kMinSegments || out_handles.size() != n || in_handles.size() != n) {
    throw InvalidShape("from_anchors: need N >= 3 anchors and N handles of each kind");
  }
  std::vector<CubicSegment> segs(n);
  for (std::size_t k = 0; k < n; ++k) {
    segs[k].p = {anchors[k], out_handles[k], in_handles[k], anchors[(k + 1) % n]};
  }
  return unchecked(std::move(segs), std::move(id));
}

BezierShape BezierShape::circle(Vec2 center, double radius, std::size_t segments,
                                std::string id) {
  const std::size_t n = std::max(segments, kMinSegments);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  const double k = 4.0 / 3.0 * std::tan(step / 4.0) * radius;
  std::vector<Vec2> anchors(n), outs(n), ins(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a0 = step * static_cast<double>(i);
    const double a1 = step * static_cast<double>(i + 1);
    const Vec2 d0{std::cos(a0), std::sin(a0)};
    const Vec2 d1{std::cos(a1), std::sin(a1)};
    anchors[i] = center + d0 * radius;
    outs[i] = anchors[i] + perp(d0) * k;
    ins[i] = center + d1 * radius - perp(d1) * k;
  }
  return from_anchors(anchors, outs, ins, std::move(id));
}

void BezierShape::compute_area_stats() {
  intrinsic_size_ = 0.0;
  centroid_ = {};
  if (segments_.empty()) return;
  const double tol = default_local_tolerance(segments_);
  std::vector<Vec2> v = flatten_vertices(segments_, tol > 0.0 ? tol * 0.1 : 1e-9);
  const double area = shoelace(v);
  if (std::abs(area) > 0.0 && v.size() >= 3) {
    Vec2 c{};
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
      const Vec2 a = v[i];
      const Vec2 b = v[(i + 1) % n];
      const double w = cross(a, b);
      c += (a + b) * w;
    }
    centroid_ = c / (6.0 * area);
    intrinsic_size_ = std::sqrt(std::abs(area));
  } else {
    Vec2 c{};
    for (const auto& seg : segments_) c += seg.p[0];
    centroid_ = c / static_cast<double>(segments_.size());
  }
}

double BezierShape::bounding_radius() const {
  double r = 0.0;
  for (const auto& seg : segments_) {
    for (const Vec2& p : seg.p) r = std::max(r, norm(p - centroid_));
  }
  return r;
}

BezierShape BezierShape::centered() const {
  ElementTransform xf;
  xf.t = -centroid_;
  BezierShape out = apply_transform(*this, xf);
  out.centroid_ = {};
  return out;
}

bool BezierShape::is_closed() const {
  for (std::size_t k = 0, n = segments_.size(); k < n; ++k) {
    if (!(segments_[k].p[3] == segments_[(k + 1) % n].p[0])) return false;
  }
  return !segments_.empty();
}

bool ElementTransform::valid() const {
  if (!std::isfinite(t.x) || !std::isfinite(t.y) || !std::isfinite(s) || !std::isfinite(r)) {
    return false;
  }
  if (!(s > 0.0)) return false;
  if (rotation_mode.kind == RotationMode::Kind::kRange) {
    if (rotation_mode.lo > rotation_mode.hi) return false;
    if (r < rotation_mode.lo || r > rotation_mode.hi) return false;
  }
  return true;
}

void ElementTransform::project() {
  s = std::max(s, kMinScale);
  if (rotation_mode.kind == RotationMode::Kind::kRange) {
    r = std::clamp(r, rotation_mode.lo, rotation_mode.hi);
  }
}

double Polyline::signed_area() const { return shoelace(vertices); }

BezierShape apply_transform(const BezierShape& shape, const ElementTransform& xf) {
  std::vector<CubicSegment> segs(shape.segments().begin(), shape.segments().end());
  for (auto& seg : segs) {
    for (Vec2& p : seg.p) p = xf.apply(p);
  }
  return BezierShape::unchecked(std::move(segs), shape.id());
}

Polyline apply_transform(const Polyline& poly, const ElementTransform& xf) {
  Polyline out = poly;
  for (Vec2& v : out.vertices) v = xf.apply(v);
  return out;
}

Polyline flatten(const BezierShape& shape, double tolerance) {
  if (!(tolerance > 0.0)) {
    throw InvalidShape("flatten: tolerance must be positive");
  }
  Polyline poly;
  poly.closed = true;
  poly.vertices = flatten_vertices(shape.segments(), tolerance);
  if (poly.vertices.size() < 3 || std::abs(poly.signed_area()) < tolerance * tolerance) {
    throw DegenerateShape("shape '" + shape.id() + "' flattens to a near-zero area polygon");
  }
  return poly;
}

double flatten_tolerance(double pixels_per_unit, double scale) {
  return 0.25 / (pixels_per_unit * scale);
}

BoundaryHit nearest_boundary(std::span<const Vec2> v, Vec2 p) {
  BoundaryHit hit;
  hit.dist2 = std::numeric_limits<double>::infinity();
  const std::size_t n = v.size();
  bool inside = false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i];
    const Vec2 b = v[i + 1 == n ? 0 : i + 1];
    const double ex = b.x - a.x;
    const double ey = b.y - a.y;
    const double px = p.x - a.x;
    const double py = p.y - a.y;
    const double len2 = ex * ex + ey * ey;
    double u = len2 > 0.0 ? (px * ex + py * ey) / len2 : 0.0;
    u = u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
    const double dx = px - u * ex;
    const double dy = py - u * ey;
    const double d2 = dx * dx + dy * dy;
    if (d2 < hit.dist2) {
      hit.dist2 = d2;
      hit.segment = i;
      hit.u = u;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * ex / ey;
      if (p.x < x_cross) inside = !inside;
    }
  }
  hit.inside = inside;
  return hit;
}

SignedDistance signed_distance(const Polyline& poly, Vec2 p) {
  const auto& v = poly.vertices;
  const BoundaryHit hit = nearest_boundary(v, p);
  const Vec2 a = v[hit.segment];
  const Vec2 b = v[(hit.segment + 1) % v.size()];
  SignedDistance out;
  out.inside = hit.inside;
  out.segment = hit.segment;
  out.u = hit.u;
  out.witness = a + (b - a) * hit.u;
  const double d = std::sqrt(hit.dist2);
  out.distance = hit.inside ? -d : d;
  return out;
}

Vec2 outward_direction(std::span<const Vec2> v, const BoundaryHit& hit, Vec2 p,
                       double orientation) {
  const Vec2 a = v[hit.segment];
  const Vec2 b = v[(hit.segment + 1) % v.size()];
  const Vec2 q = a + (b - a) * hit.u;
  const double d = std::sqrt(hit.dist2);
  if (d > 1e-12) {
    const Vec2 w = (p - q) / d;
    return hit.inside ? -w : w;
  }
  const Vec2 e = b - a;
  const double len = norm(e);
  if (len == 0.0) return {};
  const Vec2 n{e.y / len, -e.x / len};
  return orientation >= 0.0 ? n : -n;
}

TransformJacobian signed_distance_jacobian(const Polyline& poly, Vec2 p,
                                           const ElementTransform& xf) {
  const auto& v = poly.vertices;
  const BoundaryHit hit = nearest_boundary(v, p);
  const Vec2 n = outward_direction(v, hit, p, poly.signed_area());
  const Vec2 a = v[hit.segment];
  const Vec2 b = v[(hit.segment + 1) % v.size()];
  const Vec2 q = a + (b - a) * hit.u;
  // q = R(r) s q0 + t, so dq/ds = (q - t)/s and dq/dr = perp(q - t).
  const Vec2 rel = q - xf.t;
  TransformJacobian j;
  j.dt = -n;
  j.ds = -dot(n, rel / xf.s);
  j.dr = -dot(n, perp(rel));
  return j;
}

bool is_simple(const Polyline& poly) {
  const auto& v = poly.vertices;
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v[i];
    const Vec2 b = v[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share a vertex by construction.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a, b, v[j], v[(j + 1) % n])) return false;
    }
  }
  return true;
}

}  // namespace collage
