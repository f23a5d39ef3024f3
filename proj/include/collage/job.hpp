#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "collage/losses.hpp"
#include "collage/optimize.hpp"
#include "collage/render.hpp"
#include "collage/vecgeom.hpp"

namespace collage {

struct ElementEntry {
  std::string path;  // SVG outline or PNG silhouette
  int count = 1;
  std::string display_color = "#808080";
  ScaleMode scale_mode = ScaleMode::kFree;
  RotationMode rotation_mode{};
  double scale = 1.0;     // initial scale; kept when scale_mode is fixed
  double rotation = 0.0;  // initial angle, radians; kept when fixed
  int segments = 20;      // loop size when fitting a PNG silhouette
  bool force = true;      // whether the force term acts on these elements

  bool operator==(const ElementEntry&) const = default;
};

struct OutputsConfig {
  std::string final_svg;
  std::string final_png;
  std::string frames_dir;
  int frame_stride = 1;
  std::string metrics_json;  // deterministic: metrics only
  std::string report_json;   // metrics, losses and wall times
  std::string checkpoint;

  bool operator==(const OutputsConfig&) const = default;
};

enum class InitKind { kMat, kRandom };

struct JobConfig {
  // Relative paths are resolved against this directory.
  std::filesystem::path base_dir;
  std::string container;
  std::vector<ElementEntry> elements;
  LossWeights weights;
  UniformLossConfig uniform;
  RenderConfig render;
  OptimizerConfig optimizer;
  ResolutionSchedule schedule = ResolutionSchedule::standard();
  std::optional<ForceSpec> force;
  InitKind init = InitKind::kMat;
  std::uint64_t seed = 0;
  OutputsConfig outputs;

  std::filesystem::path resolve(const std::string& p) const;
  // Throws ValidationError naming the offending key. With `check_paths`
  // the container and element files must exist.
  void validate(bool check_paths = true) const;
  bool operator==(const JobConfig&) const = default;
};

// Parses a TOML document. Throws ParseError (with line and column) or
// ValidationError; unknown keys are rejected.
JobConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                       bool check_paths = true);
JobConfig load_config(const std::filesystem::path& file);
// TOML document that parses back to an equal config.
std::string dump_config(const JobConfig& cfg);

struct JobOptions {
  bool deterministic = false;
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  bool quiet = false;
};

struct JobResult {
  RunReport report;
  std::vector<ElementTransform> transforms;
  std::size_t placement_overflow = 0;
};

// Ingests shapes, builds the container, initializes, optimizes and writes
// every configured output. Errors propagate as collage::Error subclasses.
JobResult run_job(const JobConfig& cfg, const JobOptions& options = {});

}  // namespace collage
