#include "collage/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "collage/errors.hpp"
#include "collage/init.hpp"

namespace collage {

void OptimizerConfig::validate() const {
  const std::pair<const char*, double> rates[] = {
      {"optimizer.lr_translate", lr_translate}, {"optimizer.lr_scale", lr_scale}, {"optimizer.lr_rotate", lr_rotate}};
  for (const auto& [key, v] : rates) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(key, "learning rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("optimizer.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("optimizer.beta2", "must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("optimizer.epsilon", "must be > 0");
  if (epochs < 1) throw ValidationError("optimizer.epochs", "must be >= 1");
  if (grad_clip && !(*grad_clip > 0.0)) throw ValidationError("optimizer.grad_clip", "must be > 0");
  if (threads < 1) throw ValidationError("optimizer.threads", "must be >= 1");
}

ResolutionSchedule ResolutionSchedule::standard() {
  const int res[] = {50, 200, 600};
  return even(res, 200);
}

ResolutionSchedule ResolutionSchedule::single(int resolution, int epochs) {
  return {{{resolution, epochs}}};
}

ResolutionSchedule ResolutionSchedule::even(std::span<const int> resolutions, int total_epochs) {
  ResolutionSchedule s;
  const int n = static_cast<int>(resolutions.size());
  for (int i = 0; i < n; ++i) {
    s.levels.push_back({resolutions[i], total_epochs / n + (i < total_epochs % n ? 1 : 0)});
  }
  return s;
}

int ResolutionSchedule::total_epochs() const {
  int total = 0;
  for (const auto& l : levels) total += l.epochs;
  return total;
}

void ResolutionSchedule::validate(int expected_epochs) const {
  if (levels.empty()) throw ValidationError("schedule.resolutions", "at least one level is required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].resolution < 8) throw ValidationError("schedule.resolutions", "must be >= 8");
    if (levels[i].epochs < 0) throw ValidationError("schedule.epochs", "must be >= 0");
    if (i > 0 && levels[i].resolution <= levels[i - 1].resolution) {
      throw ValidationError("schedule.resolutions", "must be strictly increasing");
    }
  }
  if (total_epochs() != expected_epochs) {
    throw ValidationError("schedule.epochs",
                          fmt::format("sum {} differs from optimizer.epochs {}", total_epochs(), expected_epochs));
  }
}

RunState RunState::start(std::vector<ElementTransform> transforms) {
  RunState s;
  s.moments.resize(transforms.size());
  s.transforms = std::move(transforms);
  return s;
}

LevelContext LevelContext::build(const Scene& scene, int resolution,
                                 std::span<const double> flatten_scales) {
  LevelContext ctx;
  ctx.grid = RasterGrid::square(resolution);
  ctx.field = build_container_field(scene.container, ctx.grid);
  ctx.outlines.reserve(scene.shapes.size());
  for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
    const double s = i < flatten_scales.size() ? flatten_scales[i] : 1.0;
    ctx.outlines.push_back(flatten(scene.shapes[i], flatten_tolerance(ctx.grid.pixels_per_unit, s)));
    ctx.local_centroids.push_back(scene.shapes[i].centroid());
  }
  return ctx;
}

TotalLoss evaluate_loss(std::span<const ElementTransform> transforms, const LevelContext& level,
                        const Scene& scene, const LossWeights& weights, int threads) {
  std::vector<RenderElement> els;
  els.reserve(transforms.size());
  for (std::size_t i = 0; i < transforms.size(); ++i) els.push_back({level.outlines[i].vertices, transforms[i]});
  const CoverageBuffer buf = rasterize(els, scene.render, level.grid, true, threads);
  LossInputs in;
  in.buffer = &buf;
  in.field = &level.field;
  in.transforms = transforms;
  in.local_centroids = level.local_centroids;
  in.uniform = &scene.uniform;
  in.force = scene.force ? &*scene.force : nullptr;
  in.threads = threads;
  return total_loss(in, weights);
}

namespace {

// How far the placed outline reaches past each canvas side: left, top,
// right, bottom. Negative when clear of that side.
std::array<double, 4> overshoot(const Polyline& local, const ElementTransform& xf, double w, double h) {
  std::array<double, 4> o{-1e300, -1e300, -1e300, -1e300};
  for (Vec2 v : local.vertices) {
    const Vec2 p = xf.apply(v);
    o[0] = std::max(o[0], -p.x);
    o[1] = std::max(o[1], -p.y);
    o[2] = std::max(o[2], p.x - w);
    o[3] = std::max(o[3], p.y - h);
  }
  return o;
}

}  // namespace

LossBreakdown step(RunState& state, const LevelContext& level, const Scene& scene,
                   const LossWeights& weights, const OptimizerConfig& cfg) {
  const TotalLoss tl = evaluate_loss(state.transforms, level, scene, weights, cfg.threads);
  const std::size_t n = state.transforms.size();
  if (state.moments.size() != n) state.moments.resize(n);

  std::vector<std::array<double, 4>> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = {tl.grad[i].dt.x, tl.grad[i].dt.y, tl.grad[i].ds, tl.grad[i].dr};

  if (cfg.grad_clip) {
    // Groups: translation (both axes), scale, rotation.
    const int groups[3][2] = {{0, 2}, {2, 3}, {3, 4}};
    for (const auto& [lo, hi] : groups) {
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (int k = lo; k < hi; ++k) sq += g[i][k] * g[i][k];
      }
      const double norm = std::sqrt(sq);
      if (norm > *cfg.grad_clip) {
        const double f = *cfg.grad_clip / norm;
        for (std::size_t i = 0; i < n; ++i) {
          for (int k = lo; k < hi; ++k) g[i][k] *= f;
        }
      }
    }
  }

  state.adam_steps += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.adam_steps));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.adam_steps));
  const double lr[4] = {cfg.lr_translate, cfg.lr_translate, cfg.lr_scale, cfg.lr_rotate};
  const double w = level.grid.canvas_width();
  const double h = level.grid.canvas_height();
  for (std::size_t i = 0; i < n; ++i) {
    ElementTransform& xf = state.transforms[i];
    AdamMoments& mom = state.moments[i];
    const bool bounded = i < level.outlines.size() && !level.outlines[i].vertices.empty();
    const std::array<double, 4> before = bounded ? overshoot(level.outlines[i], xf, w, h) : std::array<double, 4>{};
    double* param[4] = {&xf.t.x, &xf.t.y, &xf.s, &xf.r};
    const bool frozen[4] = {false, false, xf.scale_mode == ScaleMode::kFixed,
                            xf.rotation_mode.kind == RotationMode::Kind::kFixed};
    for (int k = 0; k < 4; ++k) {
      if (frozen[k]) continue;
      mom.m[k] = cfg.beta1 * mom.m[k] + (1.0 - cfg.beta1) * g[i][k];
      mom.v[k] = cfg.beta2 * mom.v[k] + (1.0 - cfg.beta2) * g[i][k] * g[i][k];
      const double mhat = mom.m[k] / bc1;
      const double vhat = mom.v[k] / bc2;
      *param[k] -= lr[k] * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    xf.project();
    // The canvas border is a wall: an update may not carry an element further
    // past it than it already was.
    if (bounded) {
      const std::array<double, 4> after = overshoot(level.outlines[i], xf, w, h);
      const double push[4] = {after[0] - std::max(before[0], 0.0), after[1] - std::max(before[1], 0.0),
                              after[2] - std::max(before[2], 0.0), after[3] - std::max(before[3], 0.0)};
      if (push[0] > 0.0) xf.t.x += push[0];
      if (push[1] > 0.0) xf.t.y += push[1];
      if (push[2] > 0.0) xf.t.x -= push[2];
      if (push[3] > 0.0) xf.t.y -= push[3];
    }
  }
  state.history.push_back(tl.parts);
  state.epoch += 1;
  return tl.parts;
}

RunReport run(RunState& state, const Scene& scene, const ResolutionSchedule& schedule,
              const LossWeights& weights, const OptimizerConfig& cfg, const RunCallbacks& callbacks) {
  using Clock = std::chrono::steady_clock;
  schedule.validate(cfg.epochs);
  if (state.moments.size() != state.transforms.size()) state.moments.resize(state.transforms.size());
  const int stride = std::max(1, callbacks.frame_stride);
  if (state.epoch == 0 && callbacks.on_frame) callbacks.on_frame(0, state.transforms);

  RunReport report;
  std::optional<LevelContext> ctx;
  int level_end = 0;
  for (std::size_t li = 0; li < schedule.levels.size(); ++li) {
    const ResolutionLevel& level = schedule.levels[li];
    level_end += level.epochs;
    if (state.epoch >= level_end) continue;
    if (state.level != static_cast<int>(li)) {
      if (state.level >= 0 && cfg.reset_moments) {
        std::fill(state.moments.begin(), state.moments.end(), AdamMoments{});
        state.adam_steps = 0;
      }
      state.level = static_cast<int>(li);
      state.flatten_scales.clear();
      for (const auto& xf : state.transforms) state.flatten_scales.push_back(xf.s);
    }
    const auto t0 = Clock::now();
    ctx = LevelContext::build(scene, level.resolution, state.flatten_scales);
    LevelReport lr{level.resolution, 0, 0.0};
    const std::size_t level_first = state.history.size();
    while (state.epoch < level_end) {
      step(state, *ctx, scene, weights, cfg);
      ++lr.epochs;
      if (callbacks.on_epoch) callbacks.on_epoch(state);
      if (callbacks.on_frame && state.epoch % stride == 0) callbacks.on_frame(state.epoch, state.transforms);
      if (cfg.early_stop && state.history.size() - level_first > 20) {
        const double now = state.history.back().total;
        const double then = state.history[state.history.size() - 21].total;
        if (std::abs(now - then) <= 1e-4 * std::max(std::abs(then), 1e-300)) break;
      }
    }
    lr.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    report.wall_seconds += lr.wall_seconds;
    report.levels.push_back(lr);
  }

  if (!ctx && !schedule.levels.empty()) {
    ctx = LevelContext::build(scene, schedule.levels.back().resolution,
                              state.flatten_scales.empty() ? std::vector<double>(state.transforms.size(), 1.0)
                                                           : state.flatten_scales);
  }
  if (ctx) report.final_loss = evaluate_loss(state.transforms, *ctx, scene, weights, cfg.threads).parts;
  report.metrics = evaluate(scene.shapes, state.transforms, scene.container, kMetricsResolution);
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr int kCheckpointVersion = 1;

const char* rotation_kind_name(RotationMode::Kind k) {
  switch (k) {
    case RotationMode::Kind::kFixed:
      return "fixed";
    case RotationMode::Kind::kRange:
      return "range";
    default:
      return "free";
  }
}

RotationMode::Kind rotation_kind_from(const std::string& s) {
  if (s == "free") return RotationMode::Kind::kFree;
  if (s == "fixed") return RotationMode::Kind::kFixed;
  if (s == "range") return RotationMode::Kind::kRange;
  throw CheckpointError("unknown rotation mode '" + s + "'");
}

}  // namespace

std::string checkpoint_to_json(const RunState& state) {
  nlohmann::ordered_json j;
  j["format"] = "collage-runstate";
  j["version"] = kCheckpointVersion;
  j["epoch"] = state.epoch;
  j["adam_steps"] = state.adam_steps;
  j["level"] = state.level;
  j["flatten_scales"] = state.flatten_scales;
  auto& xfs = j["transforms"] = nlohmann::ordered_json::array();
  for (const auto& xf : state.transforms) {
    xfs.push_back({{"tx", xf.t.x},
                   {"ty", xf.t.y},
                   {"s", xf.s},
                   {"r", xf.r},
                   {"rotation_mode", rotation_kind_name(xf.rotation_mode.kind)},
                   {"rotation_lo", xf.rotation_mode.lo},
                   {"rotation_hi", xf.rotation_mode.hi},
                   {"scale_mode", xf.scale_mode == ScaleMode::kFixed ? "fixed" : "free"}});
  }
  auto& moms = j["moments"] = nlohmann::ordered_json::array();
  for (const auto& m : state.moments) moms.push_back({{"m", m.m}, {"v", m.v}});
  auto& hist = j["history"] = nlohmann::ordered_json::array();
  for (const auto& h : state.history) {
    hist.push_back({{"containment", h.containment},
                    {"overlap", h.overlap},
                    {"overlap_pixels", h.overlap_pixels},
                    {"uniform", h.uniform},
                    {"force", h.force},
                    {"total", h.total}});
  }
  return j.dump() + "\n";
}

RunState checkpoint_from_json(const std::string& text) {
  RunState s;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", std::string()) != "collage-runstate") throw CheckpointError("not a run-state checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) throw CheckpointError(fmt::format("unsupported checkpoint version {}", version));
    s.epoch = j.at("epoch").get<int>();
    s.adam_steps = j.at("adam_steps").get<std::int64_t>();
    s.level = j.at("level").get<int>();
    s.flatten_scales = j.at("flatten_scales").get<std::vector<double>>();
    for (const auto& x : j.at("transforms")) {
      ElementTransform xf;
      xf.t = {x.at("tx").get<double>(), x.at("ty").get<double>()};
      xf.s = x.at("s").get<double>();
      xf.r = x.at("r").get<double>();
      xf.rotation_mode = {rotation_kind_from(x.at("rotation_mode").get<std::string>()),
                          x.at("rotation_lo").get<double>(), x.at("rotation_hi").get<double>()};
      xf.scale_mode = x.at("scale_mode").get<std::string>() == "fixed" ? ScaleMode::kFixed : ScaleMode::kFree;
      s.transforms.push_back(xf);
    }
    for (const auto& m : j.at("moments")) {
      s.moments.push_back({m.at("m").get<std::array<double, 4>>(), m.at("v").get<std::array<double, 4>>()});
    }
    for (const auto& h : j.at("history")) {
      LossBreakdown b;
      b.containment = h.at("containment").get<double>();
      b.overlap = h.at("overlap").get<double>();
      b.overlap_pixels = h.at("overlap_pixels").get<std::size_t>();
      b.uniform = h.at("uniform").get<double>();
      b.force = h.at("force").get<double>();
      b.total = h.at("total").get<double>();
      s.history.push_back(b);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  if (s.moments.size() != s.transforms.size() || static_cast<int>(s.history.size()) != s.epoch) {
    throw CheckpointError("inconsistent checkpoint");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Outline fitting

namespace {

struct SoftFit {
  double mse = 0.0;
  std::vector<Vec2> grad;  // per control point
};

// Control points are laid out as [anchor, out handle, in handle] per segment.
std::vector<Vec2> sample_loop(const std::vector<Vec2>& ctrl, std::size_t segments, int samples) {
  std::vector<Vec2> v;
  v.reserve(segments * samples);
  for (std::size_t k = 0; k < segments; ++k) {
    const Vec2 p0 = ctrl[3 * k];
    const Vec2 p1 = ctrl[3 * k + 1];
    const Vec2 p2 = ctrl[3 * k + 2];
    const Vec2 p3 = ctrl[3 * ((k + 1) % segments)];
    for (int j = 0; j < samples; ++j) {
      const double u = static_cast<double>(j) / samples;
      const double a = 1.0 - u;
      v.push_back(p0 * (a * a * a) + p1 * (3 * a * a * u) + p2 * (3 * a * u * u) + p3 * (u * u * u));
    }
  }
  return v;
}

SoftFit soft_mse(const std::vector<Vec2>& ctrl, std::size_t segments, int samples,
                 const Grid<std::uint8_t>& target, double kappa, bool with_grad) {
  const std::vector<Vec2> v = sample_loop(ctrl, segments, samples);
  const std::size_t nv = v.size();
  double area2 = 0.0;
  for (std::size_t i = 0; i < nv; ++i) area2 += cross(v[i], v[(i + 1) % nv]);
  const double orientation = area2 >= 0.0 ? 1.0 : -1.0;
  const double inv_n = 1.0 / static_cast<double>(target.size());

  SoftFit out;
  std::vector<Vec2> gv(with_grad ? nv : 0);
  double sum = 0.0;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      const Vec2 p{x + 0.5, y + 0.5};
      const BoundaryHit hit = nearest_boundary(v, p);
      const double dist = std::sqrt(hit.dist2);
      const double d = hit.inside ? -dist : dist;
      const double alpha = 1.0 / (1.0 + std::exp(d / kappa));
      const double r = alpha - (target.at(x, y) ? 1.0 : 0.0);
      sum += r * r;
      if (!with_grad) continue;
      const double dl_dd = 2.0 * r * inv_n * (-alpha * (1.0 - alpha) / kappa);
      if (dl_dd == 0.0) continue;
      const Vec2 n = outward_direction(v, hit, p, orientation);
      // d(d)/d(witness) = -n; the witness interpolates the segment's ends.
      const Vec2 g = n * (-dl_dd);
      gv[hit.segment] += g * (1.0 - hit.u);
      gv[(hit.segment + 1) % nv] += g * hit.u;
    }
  }
  out.mse = sum * inv_n;
  if (!with_grad) return out;

  out.grad.assign(ctrl.size(), Vec2{});
  for (std::size_t k = 0; k < segments; ++k) {
    for (int j = 0; j < samples; ++j) {
      const double u = static_cast<double>(j) / samples;
      const double a = 1.0 - u;
      const Vec2 g = gv[k * samples + j];
      out.grad[3 * k] += g * (a * a * a);
      out.grad[3 * k + 1] += g * (3 * a * a * u);
      out.grad[3 * k + 2] += g * (3 * a * u * u);
      out.grad[3 * ((k + 1) % segments)] += g * (u * u * u);
    }
  }
  return out;
}

BezierShape loop_from_controls(const std::vector<Vec2>& ctrl, std::size_t segments) {
  std::vector<Vec2> anchors, outs, ins;
  for (std::size_t k = 0; k < segments; ++k) {
    anchors.push_back(ctrl[3 * k]);
    outs.push_back(ctrl[3 * k + 1]);
    ins.push_back(ctrl[3 * k + 2]);
  }
  return BezierShape::from_anchors(anchors, outs, ins, "fit");
}

}  // namespace

FitResult fit_outline(const Grid<std::uint8_t>& silhouette, std::size_t segments, const FitConfig& cfg,
                      const std::function<void(int, const BezierShape&)>& on_iteration) {
  if (segments < BezierShape::kMinSegments) {
    throw ValidationError("fit.segments", fmt::format("need at least {} segments", BezierShape::kMinSegments));
  }
  const std::size_t components = count_components(silhouette);
  if (components != 1) {
    throw MultipleComponents(fmt::format("silhouette has {} foreground components, expected 1", components));
  }

  double area = 0.0;
  Vec2 centroid{};
  for (int y = 0; y < silhouette.height; ++y) {
    for (int x = 0; x < silhouette.width; ++x) {
      if (!silhouette.at(x, y)) continue;
      area += 1.0;
      centroid += Vec2{x + 0.5, y + 0.5};
    }
  }
  centroid = centroid / area;
  const double radius = std::sqrt(area / std::numbers::pi);

  std::vector<Vec2> ctrl(3 * segments);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(segments);
  const double k = 4.0 / 3.0 * std::tan(step / 4.0) * radius;
  for (std::size_t i = 0; i < segments; ++i) {
    const double a0 = step * static_cast<double>(i);
    const double a1 = a0 + step;
    const Vec2 d0{std::cos(a0), std::sin(a0)};
    const Vec2 d1{std::cos(a1), std::sin(a1)};
    ctrl[3 * i] = centroid + d0 * radius;
    ctrl[3 * i + 1] = centroid + d0 * radius + perp(d0) * k;
    ctrl[3 * i + 2] = centroid + d1 * radius - perp(d1) * k;
  }

  std::vector<Vec2> m(ctrl.size()), v(ctrl.size());
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const int iters = std::max(0, cfg.iterations);
  for (int it = 0; it < iters; ++it) {
    const double t = iters > 1 ? static_cast<double>(it) / (iters - 1) : 1.0;
    const double anneal = std::min(1.0, t / 0.75);
    const double kappa = cfg.kappa_start * std::pow(cfg.kappa_end / cfg.kappa_start, anneal);
    const double lr = cfg.learning_rate * (0.1 + 0.45 * (1.0 + std::cos(std::numbers::pi * t)));
    const SoftFit f = soft_mse(ctrl, segments, cfg.samples_per_segment, silhouette, kappa, true);
    const double bc1 = 1.0 - std::pow(b1, it + 1);
    const double bc2 = 1.0 - std::pow(b2, it + 1);
    for (std::size_t c = 0; c < ctrl.size(); ++c) {
      const Vec2 g = f.grad[c];
      m[c] = m[c] * b1 + g * (1.0 - b1);
      v[c] = Vec2{b2 * v[c].x + (1.0 - b2) * g.x * g.x, b2 * v[c].y + (1.0 - b2) * g.y * g.y};
      ctrl[c].x -= lr * (m[c].x / bc1) / (std::sqrt(v[c].x / bc2) + eps);
      ctrl[c].y -= lr * (m[c].y / bc1) / (std::sqrt(v[c].y / bc2) + eps);
    }
    if (on_iteration) on_iteration(it, loop_from_controls(ctrl, segments));
  }

  FitResult out;
  out.shape = loop_from_controls(ctrl, segments);
  out.mse = soft_mse(ctrl, segments, cfg.samples_per_segment, silhouette, cfg.kappa_end, false).mse;
  out.non_converged = out.mse > cfg.nonconvergence_mse;
  return out;
}

}  // namespace collage
