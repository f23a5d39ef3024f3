#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "collage/errors.hpp"
#include "collage/image.hpp"
#include "collage/job.hpp"
#include "collage/metrics.hpp"
#include "collage/optimize.hpp"
#include "collage/svg.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2, kNonFinite = 3 };

std::string read_text(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw collage::Error("cli", "cannot read " + file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw collage::Error("cli", "cannot write " + file);
  out << text;
}

bool is_png(const std::string& file) {
  const std::string ext = std::filesystem::path(file).extension().string();
  return ext == ".png" || ext == ".PNG";
}

collage::ContainerSource load_container(const std::string& file) {
  if (is_png(file)) return collage::ContainerSource::from_mask(collage::threshold_dark(collage::read_png_luminance(file)));
  return collage::ContainerSource::from_outlines(collage::svg::load_container_outlines(file, 0.05));
}

std::string defaults_document() {
  collage::JobConfig cfg;
  cfg.container = "container.svg";
  cfg.elements.push_back({.path = "element.svg"});
  return collage::dump_config(cfg);
}

int cmd_run(const std::string& config, bool deterministic, const std::string& resume, bool quiet) {
  const collage::JobConfig cfg = collage::load_config(config);
  collage::JobOptions opts;
  opts.deterministic = deterministic;
  opts.quiet = quiet;
  if (!resume.empty()) opts.resume = resume;
  const collage::JobResult result = collage::run_job(cfg, opts);
  if (!quiet) {
    const auto& m = result.report.metrics;
    fmt::print("LC {:.4f}  OO {:.6f}  EA {:.6f}  L-nU {:.3f}  ({:.2f} s)\n", m.lc, m.oo, m.ea, m.l_nu,
               result.report.wall_seconds);
  }
  return kOk;
}

int cmd_metrics(const std::string& layout, const std::string& container, int resolution, const std::string& out) {
  const auto parsed = collage::svg::load_layout(read_text(layout));
  std::vector<collage::BezierShape> shapes;
  for (const auto& p : parsed) shapes.push_back(p.shape);
  const std::vector<collage::ElementTransform> identity(shapes.size());
  const collage::QualityReport r = collage::evaluate(shapes, identity, load_container(container), resolution);
  const std::string json = collage::to_json(r);
  if (out.empty()) {
    fmt::print("{}", json);
  } else {
    write_text(out, json);
  }
  return kOk;
}

int cmd_fit(const std::string& png, int segments, int iterations, const std::string& out) {
  const auto silhouette = collage::threshold_dark(collage::read_png_luminance(png));
  collage::FitConfig fc;
  fc.iterations = iterations;
  collage::FitResult fit = collage::fit_outline(silhouette, static_cast<std::size_t>(segments), fc);
  fit.shape.set_id(std::filesystem::path(png).stem().string());
  const collage::svg::ExportItem item{&fit.shape, {}, "#000000"};
  write_text(out, collage::svg::export_document({&item, 1}, {}, silhouette.width, silhouette.height));
  fmt::print("mse {:.6f}{}\n", fit.mse, fit.non_converged ? " (not converged)" : "");
  return kOk;
}

int cmd_compare(const std::vector<std::string>& reports, const std::string& out) {
  std::vector<collage::CompareRow> rows;
  for (const auto& file : reports) {
    const std::string text = read_text(file);
    collage::CompareRow row;
    row.label = std::filesystem::path(file).stem().string();
    row.report = collage::quality_report_from_json(text);
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_object() && j.contains("wall_time") && j["wall_time"].is_number()) row.wall_time = j["wall_time"].get<double>();
    rows.push_back(std::move(row));
  }
  const std::string csv = collage::compare_csv(rows);
  if (out.empty()) {
    fmt::print("{}", csv);
  } else {
    write_text(out, csv);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-space collage and packing of vector shapes"};
  app.require_subcommand(1);

  std::string config, resume;
  bool deterministic = false, quiet = false;
  auto* run = app.add_subcommand("run", "Optimize a layout described by a TOML job file");
  run->add_option("config", config, "Job file")->required()->check(CLI::ExistingFile);
  run->add_flag("--deterministic", deterministic, "Single-threaded, bit-reproducible evaluation");
  run->add_option("--resume", resume, "Continue from a checkpoint written by a previous run")->check(CLI::ExistingFile);
  run->add_flag("--quiet", quiet, "Suppress progress output");
  run->footer("Job file defaults (print with `collage defaults`):\n\n" + defaults_document());

  std::string layout, container, metrics_out;
  int resolution = collage::kMetricsResolution;
  auto* metrics = app.add_subcommand("metrics", "Evaluate LC / OO / EA / L-nU of an exported layout");
  metrics->add_option("layout", layout, "SVG written by `collage run`")->required()->check(CLI::ExistingFile);
  metrics->add_option("--container", container, "Container SVG or PNG mask")->required()->check(CLI::ExistingFile);
  metrics->add_option("--resolution", resolution, "Raster resolution")->capture_default_str();
  metrics->add_option("-o,--output", metrics_out, "Write JSON here instead of stdout");

  std::string silhouette, fit_out;
  int segments = 20, iterations = collage::FitConfig{}.iterations;
  auto* fit = app.add_subcommand("fit", "Fit a closed cubic loop to a PNG silhouette (dark = inside)");
  fit->add_option("silhouette", silhouette, "PNG image")->required()->check(CLI::ExistingFile);
  fit->add_option("-n,--segments", segments, "Cubic segments")->capture_default_str();
  fit->add_option("--iterations", iterations, "Gradient steps")->capture_default_str();
  fit->add_option("-o,--output", fit_out, "Output SVG")->required();

  std::vector<std::string> reports;
  std::string table_out;
  auto* compare = app.add_subcommand("compare", "Tabulate metrics of several runs as CSV");
  compare->add_option("reports", reports, "report_json or metrics_json files")->required()->check(CLI::ExistingFile);
  compare->add_option("-o,--output", table_out, "Write CSV here instead of stdout");

  app.add_subcommand("defaults", "Print a job file with every default spelled out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) return cmd_run(config, deterministic, resume, quiet);
    if (*metrics) return cmd_metrics(layout, container, resolution, metrics_out);
    if (*fit) return cmd_fit(silhouette, segments, iterations, fit_out);
    if (*compare) return cmd_compare(reports, table_out);
    fmt::print("{}", defaults_document());
    return kOk;
  } catch (const collage::ParseError& e) {
    fmt::print(stderr, "error [{}] line {}, column {}: {}\n", e.module(), e.line(), e.column(), e.what());
    return kValidation;
  } catch (const collage::ConfigError& e) {
    fmt::print(stderr, "error [{}]: {}\n", e.module(), e.what());
    return kValidation;
  } catch (const collage::NonFiniteGradient& e) {
    fmt::print(stderr, "error [{}]: {}\n", e.module(), e.what());
    return kNonFinite;
  } catch (const collage::Error& e) {
    fmt::print(stderr, "error [{}]: {}\n", e.module(), e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRuntime;
  }
}
