// Acceptance runner: `acceptance N` checks criterion N and prints one
// PASS/FAIL line. Exit status 0 on PASS.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "collage/init.hpp"
#include "collage/job.hpp"
#include "collage/metrics.hpp"
#include "collage/optimize.hpp"
#include "support.hpp"

using namespace collage;
namespace fs = std::filesystem;

namespace {

// Criterion 1
constexpr int kGradScenes = 50;
constexpr double kGradStep = 1e-3;
constexpr double kGradRel = 1e-2;
constexpr double kGradAbs = 1e-6;
constexpr double kGradSeconds = 60.0;

// Criterion 2
constexpr double kMaxOverlapFraction = 0.001;

// Criterion 4
constexpr int kAblationWins = 4;

// Criterion 6
constexpr double kForceDelta = 3e-4;
constexpr int kForceEpochs = 3000;
constexpr double kPackedHeightFactor = 1.5;
constexpr int kTrailingWindow = kForceEpochs / 10;

// Criterion 7
constexpr double kFitMse = 0.01;

bool report(int criterion, bool pass, const std::string& detail) {
  fmt::print("criterion {}: {} - {}\n", criterion, pass ? "PASS" : "FAIL", detail);
  return pass;
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0;
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<ElementTransform> fixed_scale(std::size_t n) {
  std::vector<ElementTransform> init(n);
  for (auto& x : init) x.scale_mode = ScaleMode::kFixed;
  return init;
}

// MAT placement at the skeleton resolution.
std::vector<ElementTransform> mat_start(const Scene& scene, std::uint64_t seed, std::size_t max_points) {
  const ContainerField f = build_container_field(scene.container, RasterGrid::square(kSkeletonResolution));
  const auto init = fixed_scale(scene.shapes.size());
  return place_elements(extract_skeleton(f, max_points), scene.shapes, init, f, seed).transforms;
}

bool criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t compared = 0, failed = 0;
  std::string first;
  std::vector<std::string> per_loss;
  for (testing::SubLoss which : {testing::SubLoss::kContainment, testing::SubLoss::kOverlap,
                                 testing::SubLoss::kUniform, testing::SubLoss::kForce}) {
    std::size_t f = 0;
    for (int s = 0; s < kGradScenes; ++s) {
      const testing::GradientScene g = testing::random_gradient_scene(1000 + s);
      const testing::GradientCheck c = testing::check_gradient(g, which, kGradStep, kGradRel, kGradAbs);
      compared += c.compared;
      f += c.failed;
      if (first.empty() && !c.first_failure.empty()) first = c.first_failure;
    }
    failed += f;
    per_loss.push_back(fmt::format("{} {}", testing::name(which), f));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string detail = fmt::format("{} of {} components outside tolerance at h = {} (", failed, compared, kGradStep);
  for (std::size_t i = 0; i < per_loss.size(); ++i) detail += (i ? ", " : "") + per_loss[i];
  detail += fmt::format("), {:.1f} s", secs);
  if (!first.empty()) detail += "; first: " + first;
  const bool pass = report(1, failed == 0 && secs < kGradSeconds, detail);
  if (!pass) {
    // Same components at smaller steps, to tell kinks from wrong derivatives.
    for (double h : {1e-5, 1e-6}) {
      std::size_t f = 0;
      for (testing::SubLoss which : {testing::SubLoss::kContainment, testing::SubLoss::kOverlap,
                                     testing::SubLoss::kUniform, testing::SubLoss::kForce})
        for (int s = 0; s < kGradScenes; ++s)
          f += testing::check_gradient(testing::random_gradient_scene(1000 + s), which, h, kGradRel, kGradAbs).failed;
      fmt::print("  note: {} components outside tolerance at h = {}\n", f, h);
    }
  }
  return pass;
}

Scene disc_scene() {
  Scene scene;
  for (int i = 0; i < 100; ++i) scene.shapes.push_back(BezierShape::circle({0, 0}, 18, 8, "c"));
  scene.container = ContainerSource::from_outlines({testing::circle_outline({300, 300}, 250, 256)});
  return scene;
}

bool criterion2() {
  const Scene scene = disc_scene();
  const auto start = mat_start(scene, 0, 400);
  const auto go = [&](const ResolutionSchedule& schedule) {
    RunState state = RunState::start(start);
    OptimizerConfig cfg;
    cfg.epochs = 200;
    return run(state, scene, schedule, LossWeights{}, cfg);
  };
  const RunReport low = go(ResolutionSchedule::single(50, 200));
  const RunReport high = go(ResolutionSchedule::single(600, 200));
  const RunReport hier = go(ResolutionSchedule::standard());
  const bool a = hier.wall_seconds < high.wall_seconds;
  const bool b = hier.metrics.counts.exceed == 0 && hier.metrics.oo <= kMaxOverlapFraction;
  const bool c = low.metrics.oo > hier.metrics.oo;
  return report(2, a && b && c,
                fmt::format("wall hier {:.1f} s vs 600 {:.1f} s vs 50 {:.1f} s; hier EA {} OO {:.5f}; OO(50) {:.5f} "
                            "> OO(hier) {:.5f}",
                            hier.wall_seconds, high.wall_seconds, low.wall_seconds, hier.metrics.ea, hier.metrics.oo,
                            low.metrics.oo, hier.metrics.oo));
}

// 20 squares of side 30 in a 400 x 200 box: 4.4x slack.
Scene box_scene() {
  Scene scene;
  for (int i = 0; i < 20; ++i) scene.shapes.push_back(testing::square_shape(30));
  scene.container = ContainerSource::from_outlines({testing::rect_outline(100, 200, 500, 400)});
  return scene;
}

RunReport run_box(const Scene& scene, std::uint64_t seed, const LossWeights& w) {
  RunState state = RunState::start(mat_start(scene, seed, 4 * scene.shapes.size()));
  return run(state, scene, ResolutionSchedule::standard(), w, OptimizerConfig{});
}

bool criterion3() {
  const Scene scene = box_scene();
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const QualityReport m = run_box(scene, seed, LossWeights{}).metrics;
    pass &= m.counts.overlap == 0 && m.counts.exceed == 0;
    detail += fmt::format("{}seed {}: overlap {} exceed {}", seed ? "; " : "", seed, m.counts.overlap, m.counts.exceed);
  }
  return report(3, pass, detail);
}

bool criterion4() {
  const Scene scene = box_scene();
  LossWeights off;
  off.gamma = 0;
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double on_lnu = run_box(scene, seed, LossWeights{}).metrics.l_nu;
    const double off_lnu = run_box(scene, seed, off).metrics.l_nu;
    wins += on_lnu < off_lnu;
    detail += fmt::format("{}seed {}: {:.2f} vs {:.2f}", seed ? "; " : "", seed, on_lnu, off_lnu);
  }
  return report(4, wins >= kAblationWins, fmt::format("L-nU on < off in {} of 5 ({})", wins, detail));
}

Polyline teardrop() {
  std::vector<Vec2> pts;
  const double r = 150;
  const Vec2 c{200, 300};
  const double a = std::acos(r / 360.0);
  for (int k = 0; k <= 64; ++k) {
    const double t = a + (2 * std::numbers::pi - 2 * a) * k / 64.0;
    pts.push_back(c + Vec2{std::cos(t), std::sin(t)} * r);
  }
  pts.push_back({560, 300});
  return testing::polygon(pts);
}

bool criterion5() {
  const ContainerField f = build_container_field(ContainerSource::from_outlines({teardrop()}),
                                                 RasterGrid::square(kSkeletonResolution));
  const std::vector<BezierShape> shapes{testing::square_shape(30), testing::square_shape(60),
                                        testing::square_shape(15)};
  const Placement p = place_elements(extract_skeleton(f, 64), shapes, {}, f, 1);
  std::vector<double> size, width;
  bool interior = true;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    size.push_back(shapes[i].intrinsic_size());
    width.push_back(p.assigned_width[i]);
    const Vec2 c = p.transforms[i].apply(shapes[i].centroid()) * f.grid.pixels_per_unit;
    const int x = static_cast<int>(std::floor(c.x)), y = static_cast<int>(std::floor(c.y));
    interior &= x >= 0 && y >= 0 && x < f.grid.width && y < f.grid.height && f.inside(x, y);
  }
  const double rho = spearman(size, width);
  return report(5, rho == 1.0 && interior && p.overflow == 0,
                fmt::format("widths {:.1f}/{:.1f}/{:.1f} for sizes {:.1f}/{:.1f}/{:.1f}, rho {}, centroids {}",
                            width[0], width[1], width[2], size[0], size[1], size[2], rho,
                            interior ? "interior" : "not interior"));
}

bool criterion6() {
  Scene scene;
  double area = 0;
  for (int i = 0; i < 50; ++i) {
    const double r = 12 + 3 * (i % 3);
    scene.shapes.push_back(BezierShape::circle({0, 0}, r, 8, "c"));
    area += std::numbers::pi * r * r;
  }
  scene.container = ContainerSource::from_outlines({testing::rect_outline(0, 0, 600, 600)});
  scene.force = ForceSpec::directional({0, 1});
  const ContainerField f = build_container_field(scene.container, RasterGrid::square(kSkeletonResolution));
  RunState state = RunState::start(place_random(f, scene.shapes, fixed_scale(50), 0));

  LossWeights w;
  w.alpha = 0;
  w.gamma = 0;
  w.delta = kForceDelta;
  OptimizerConfig cfg;
  cfg.epochs = kForceEpochs;
  std::vector<double> mean_y;
  RunCallbacks cb;
  cb.on_epoch = [&](const RunState& s) {
    double m = 0;
    for (const auto& x : s.transforms) m += x.t.y;
    mean_y.push_back(m / s.transforms.size());
  };
  const int res[] = {50, 200, 600};
  const RunReport r = run(state, scene, ResolutionSchedule::even(res, kForceEpochs), w, cfg, cb);

  // Trailing means over consecutive windows must keep moving down (y grows).
  bool monotone = true;
  double prev = -1;
  for (std::size_t k = kTrailingWindow; k <= mean_y.size(); k += kTrailingWindow) {
    const double m = std::accumulate(mean_y.begin() + (k - kTrailingWindow), mean_y.begin() + k, 0.0) / kTrailingWindow;
    monotone &= m > prev;
    prev = m;
  }
  const double packed = area / RasterGrid::kCanvasSize;
  const double dist = RasterGrid::kCanvasSize - mean_y.back();
  const bool pass = dist <= kPackedHeightFactor * packed && r.metrics.counts.overlap == 0 && monotone;
  return report(6, pass,
                fmt::format("mean centroid {:.1f} above the bottom (limit {:.1f}), overlap {}, trailing mean {}",
                            dist, kPackedHeightFactor * packed, r.metrics.counts.overlap,
                            monotone ? "descending" : "not descending"));
}

bool criterion7() {
  std::mt19937_64 rng(17);
  auto blob = testing::random_convex(rng, 40, 9);
  for (auto& p : blob) p = p + Vec2{64, 64};
  const Grid<std::uint8_t> silhouettes[] = {
      testing::disc_mask(128, {64, 64}, 40),
      rasterize_outlines(std::vector<Polyline>{testing::polygon(blob)}, RasterGrid::square(128, 128))};
  bool pass = true;
  std::string detail;
  for (int k = 0; k < 2; ++k) {
    bool closed = true;
    const FitResult r = fit_outline(silhouettes[k], 20, {}, [&](int, const BezierShape& s) {
      const auto seg = s.segments();
      for (std::size_t i = 0; i < seg.size(); ++i) closed &= seg[i].p[3] == seg[(i + 1) % seg.size()].p[0];
    });
    pass &= r.mse < kFitMse && closed;
    detail += fmt::format("{}{} MSE {:.4f}, closure {}", k ? "; " : "", k ? "blob" : "disc", r.mse,
                          closed ? "held" : "broken");
  }
  return report(7, pass, detail);
}

bool criterion8() {
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> U(0, 1);
  const RasterGrid grid = RasterGrid::square(200);
  std::size_t mismatched = 0, overlap = 0, exceed = 0;
  for (int scene = 0; scene < 20; ++scene) {
    auto box = testing::random_convex(rng, 200, 7);
    for (auto& v : box) v = v + Vec2{300, 300};
    const ContainerField f = build_container_field(ContainerSource::from_outlines({testing::polygon(box)}), grid);
    const int n = 1 + static_cast<int>(U(rng) * 5);
    std::vector<BezierShape> shapes;
    std::vector<std::vector<Vec2>> local;
    std::vector<ElementTransform> xfs(n);
    for (int i = 0; i < n; ++i) {
      local.push_back(testing::random_star(rng, 30, 80, 5 + static_cast<int>(U(rng) * 6)));
      shapes.push_back(testing::polygon_shape(local.back()));
      xfs[i].t = {120 + 360 * U(rng), 120 + 360 * U(rng)};
      xfs[i].s = 0.6 + 0.8 * U(rng);
      xfs[i].r = 6.28 * U(rng);
    }
    const QualityReport r = evaluate(shapes, xfs, f);
    std::size_t oo = 0, ea = 0;
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        const Vec2 q = Vec2{x + 0.5, y + 0.5} / grid.pixels_per_unit;
        int cover = 0;
        for (int i = 0; i < n; ++i) cover += testing::brute_inside(local[i], xfs[i].inverse(q));
        const bool in = testing::brute_inside(box, q);
        oo += in && cover >= 2;
        ea += !in && cover >= 1;
      }
    }
    mismatched += (oo != r.counts.overlap) + (ea != r.counts.exceed);
    overlap += oo;
    exceed += ea;
  }
  return report(8, mismatched == 0,
                fmt::format("{} mismatched counts over 20 scenes (oracle totals: overlap {}, exceed {})", mismatched,
                            overlap, exceed));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool criterion9() {
  const fs::path dir = fs::temp_directory_path() / "collage_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "container.svg")
      << R"(<svg xmlns="http://www.w3.org/2000/svg" width="600" height="600">)"
         R"(<path d="M 500 300 C 500 410 410 500 300 500 C 190 500 100 410 100 300 )"
         R"(C 100 190 190 100 300 100 C 410 100 500 190 500 300 Z"/></svg>)";
  std::ofstream(dir / "star.svg")
      << R"(<svg xmlns="http://www.w3.org/2000/svg"><path d="M 20 0 L 26 14 L 40 15 L 29 25 L 33 40 )"
         R"(L 20 32 L 7 40 L 11 25 L 0 15 L 14 14 Z"/></svg>)";
  JobConfig cfg;
  cfg.base_dir = dir;
  cfg.container = "container.svg";
  ElementEntry e;
  e.path = "star.svg";
  e.count = 12;
  cfg.elements.push_back(e);
  cfg.seed = 11;
  cfg.optimizer.epochs = 60;
  const int res[] = {50, 200, 600};
  cfg.schedule = ResolutionSchedule::even(res, 60);
  std::string json[2], png[2];
  for (int k = 0; k < 2; ++k) {
    cfg.outputs.metrics_json = fmt::format("m{}.json", k);
    cfg.outputs.final_png = fmt::format("f{}.png", k);
    JobOptions opt;
    opt.deterministic = true;
    opt.quiet = true;
    run_job(cfg, opt);
    json[k] = slurp(dir / cfg.outputs.metrics_json);
    png[k] = slurp(dir / cfg.outputs.final_png);
  }
  fs::remove_all(dir);
  const bool same_json = !json[0].empty() && json[0] == json[1];
  const bool same_png = !png[0].empty() && png[0] == png[1];
  return report(9, same_json && same_png,
                fmt::format("metrics JSON {}, final PNG {} ({} bytes)", same_json ? "identical" : "differs",
                            same_png ? "identical" : "differs", png[0].size()));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    fmt::print(stderr, "usage: acceptance <criterion 1-9>\n");
    return 2;
  }
  bool (*const checks[])() = {criterion1, criterion2, criterion3, criterion4, criterion5,
                              criterion6, criterion7, criterion8, criterion9};
  const int n = std::atoi(argv[1]);
  if (n < 1 || n > 9) {
    fmt::print(stderr, "unknown criterion {}\n", argv[1]);
    return 2;
  }
  try {
    return checks[n - 1]() ? 0 : 1;
  } catch (const std::exception& e) {
    report(n, false, std::string("error: ") + e.what());
    return 1;
  }
}
