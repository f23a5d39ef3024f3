#include "collage/job.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "collage/errors.hpp"
#include "collage/image.hpp"
#include "collage/init.hpp"
#include "collage/metrics.hpp"
#include "collage/svg.hpp"

namespace collage {

namespace {

bool is_png(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png";
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cli", "cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cli", "cannot write " + file.string());
  out << text;
  if (!out) throw Error("cli", "error writing " + file.string());
}

struct LoadedContainer {
  ContainerSource source;
  std::vector<Polyline> outlines;  // reference layer for the exported SVG
};

LoadedContainer load_container(const std::filesystem::path& file) {
  LoadedContainer c;
  if (is_png(file)) {
    c.source = ContainerSource::from_mask(threshold_dark(read_png_luminance(file)));
  } else {
    c.outlines = svg::load_container_outlines(file, 0.05);
    c.source = ContainerSource::from_outlines(c.outlines);
  }
  return c;
}

BezierShape load_element_shape(const std::filesystem::path& file, int segments, bool quiet) {
  if (!is_png(file)) return svg::load_shape(file).shape.centered();
  const Grid<std::uint8_t> silhouette = threshold_dark(read_png_luminance(file));
  FitResult fit = fit_outline(silhouette, static_cast<std::size_t>(segments));
  if (fit.non_converged && !quiet) {
    fmt::print(stderr, "warning: outline fit of {} did not converge (mse {:.4f})\n", file.string(), fit.mse);
  }
  BezierShape shape = fit.shape.centered();
  shape.set_id(file.stem().string());
  return shape;
}

Grid<std::uint8_t> render_composite(const Scene& scene, std::span<const ElementTransform> transforms) {
  const RasterGrid grid = RasterGrid::square(kMetricsResolution);
  const auto polys = flatten_for_grid(scene.shapes, transforms, grid);
  std::vector<RenderElement> els;
  els.reserve(polys.size());
  for (std::size_t i = 0; i < polys.size(); ++i) els.push_back({polys[i].vertices, transforms[i]});
  return composite_to_gray(rasterize(els, scene.render, grid, false, 1));
}

std::string report_to_json(const RunReport& report, const JobResult& result) {
  nlohmann::ordered_json j;
  j["metrics"] = nlohmann::ordered_json::parse(to_json(report.metrics));
  j["wall_time"] = report.wall_seconds;
  auto& levels = j["levels"] = nlohmann::ordered_json::array();
  for (const auto& l : report.levels) {
    levels.push_back({{"resolution", l.resolution}, {"epochs", l.epochs}, {"wall_time", l.wall_seconds}});
  }
  const LossBreakdown& f = report.final_loss;
  j["final_loss"] = {{"containment", f.containment}, {"overlap", f.overlap}, {"overlap_pixels", f.overlap_pixels},
                     {"uniform", f.uniform},         {"force", f.force},     {"total", f.total}};
  j["placement_overflow"] = result.placement_overflow;
  return j.dump(2) + "\n";
}

}  // namespace

JobResult run_job(const JobConfig& cfg, const JobOptions& options) {
  cfg.validate(true);
  const LoadedContainer container = load_container(cfg.resolve(cfg.container));

  Scene scene;
  scene.container = container.source;
  scene.render = cfg.render;
  scene.uniform = cfg.uniform;
  std::vector<ElementTransform> templates;
  std::vector<std::string> colors;
  std::vector<std::uint8_t> force_flags;
  for (const ElementEntry& e : cfg.elements) {
    const BezierShape shape = load_element_shape(cfg.resolve(e.path), e.segments, options.quiet);
    ElementTransform xf;
    xf.s = e.scale;
    xf.r = e.rotation;
    xf.scale_mode = e.scale_mode;
    xf.rotation_mode = e.rotation_mode;
    for (int k = 0; k < e.count; ++k) {
      scene.shapes.push_back(shape);
      templates.push_back(xf);
      colors.push_back(e.display_color);
      force_flags.push_back(e.force ? 1 : 0);
    }
  }
  if (cfg.force) {
    scene.force = *cfg.force;
    scene.force->applies = force_flags;
  }

  JobResult result;
  RunState state;
  if (options.resume) {
    state = checkpoint_from_json(read_text(*options.resume));
    if (state.transforms.size() != scene.shapes.size()) {
      throw CheckpointError(fmt::format("checkpoint holds {} elements, config defines {}", state.transforms.size(),
                                        scene.shapes.size()));
    }
  } else {
    const ContainerField field = build_container_field(scene.container, RasterGrid::square(kSkeletonResolution));
    std::vector<ElementTransform> start;
    if (cfg.init == InitKind::kMat) {
      const Skeleton skeleton = extract_skeleton(field, 4 * scene.shapes.size());
      Placement placement = place_elements(skeleton, scene.shapes, templates, field, cfg.seed);
      result.placement_overflow = placement.overflow;
      start = std::move(placement.transforms);
    } else {
      start = place_random(field, scene.shapes, templates, cfg.seed);
    }
    state = RunState::start(std::move(start));
  }

  OptimizerConfig opt = cfg.optimizer;
  opt.threads = options.deterministic ? 1 : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  RunCallbacks callbacks;
  if (!cfg.outputs.frames_dir.empty()) {
    const std::filesystem::path dir = cfg.resolve(cfg.outputs.frames_dir);
    std::filesystem::create_directories(dir);
    const int stride = cfg.outputs.frame_stride;
    callbacks.frame_stride = stride;
    callbacks.on_frame = [&, dir, stride](int epoch, std::span<const ElementTransform> xfs) {
      write_png_gray(dir / fmt::format("frame_{:04d}.png", epoch / stride), render_composite(scene, xfs));
    };
  }
  if (!options.quiet) {
    callbacks.on_epoch = [&](const RunState& s) {
      const int every = std::max(1, opt.epochs / 10);
      if (s.epoch % every == 0 || s.epoch == opt.epochs) {
        const LossBreakdown& h = s.history.back();
        fmt::print(stderr, "epoch {:4d}/{}  loss {:.6g}  overlap px {}\n", s.epoch, opt.epochs, h.total,
                   h.overlap_pixels);
      }
    };
  }

  const auto save_checkpoint = [&] {
    if (!cfg.outputs.checkpoint.empty()) write_text(cfg.resolve(cfg.outputs.checkpoint), checkpoint_to_json(state));
  };
  try {
    result.report = run(state, scene, cfg.schedule, cfg.weights, opt, callbacks);
  } catch (const NonFiniteGradient&) {
    save_checkpoint();
    throw;
  }
  save_checkpoint();
  result.transforms = state.transforms;

  const OutputsConfig& out = cfg.outputs;
  if (!out.final_svg.empty()) {
    std::vector<svg::ExportItem> items;
    for (std::size_t i = 0; i < scene.shapes.size(); ++i) items.push_back({&scene.shapes[i], state.transforms[i], colors[i]});
    write_text(cfg.resolve(out.final_svg),
               svg::export_document(items, container.outlines, RasterGrid::kCanvasSize, RasterGrid::kCanvasSize));
  }
  if (!out.final_png.empty()) {
    const std::filesystem::path p = cfg.resolve(out.final_png);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_png_gray(p, render_composite(scene, state.transforms));
  }
  if (!out.metrics_json.empty()) write_text(cfg.resolve(out.metrics_json), to_json(result.report.metrics));
  if (!out.report_json.empty()) write_text(cfg.resolve(out.report_json), report_to_json(result.report, result));
  return result;
}

}  // namespace collage
