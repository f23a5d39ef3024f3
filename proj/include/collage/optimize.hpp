#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collage/container.hpp"
#include "collage/losses.hpp"
#include "collage/metrics.hpp"
#include "collage/render.hpp"
#include "collage/vecgeom.hpp"

namespace collage {

struct OptimizerConfig {
  double lr_translate = 1.1;  // canvas units
  double lr_scale = 0.02;
  double lr_rotate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 200;
  // Maximum L2 norm of each parameter group's gradient; unset disables.
  std::optional<double> grad_clip;
  bool reset_moments = false;  // zero Adam moments at every level change
  // Stop a level once the total loss changes by less than 1e-4 (relative)
  // over 20 epochs.
  bool early_stop = false;
  int threads = 1;

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

struct ResolutionLevel {
  int resolution = 0;
  int epochs = 0;
  bool operator==(const ResolutionLevel&) const = default;
};

struct ResolutionSchedule {
  std::vector<ResolutionLevel> levels;

  // 50 + 200 + 600 with 200 epochs split 67/67/66.
  static ResolutionSchedule standard();
  static ResolutionSchedule single(int resolution, int epochs);
  // Splits `total_epochs` evenly, earlier levels taking the remainder.
  static ResolutionSchedule even(std::span<const int> resolutions, int total_epochs);

  int total_epochs() const;
  // Throws ValidationError.
  void validate(int expected_epochs) const;
  bool operator==(const ResolutionSchedule&) const = default;
};

// Everything the optimizer sees: shapes in local coordinates, container
// geometry and loss settings.
struct Scene {
  std::vector<BezierShape> shapes;
  ContainerSource container;
  RenderConfig render;
  UniformLossConfig uniform;
  std::optional<ForceSpec> force;
};

struct AdamMoments {
  std::array<double, 4> m{};  // tx, ty, s, r
  std::array<double, 4> v{};
  bool operator==(const AdamMoments&) const = default;
};

struct RunState {
  std::vector<ElementTransform> transforms;
  std::vector<AdamMoments> moments;
  std::int64_t adam_steps = 0;
  int epoch = 0;  // completed epochs
  std::vector<LossBreakdown> history;
  // Scales the outlines were flattened for at the start of the current
  // level; kept so a resumed run flattens identically.
  int level = -1;
  std::vector<double> flatten_scales;

  static RunState start(std::vector<ElementTransform> transforms);
  bool operator==(const RunState&) const = default;
};

// One resolution level: container field, flattened outlines, centroids.
struct LevelContext {
  RasterGrid grid;
  ContainerField field;
  std::vector<Polyline> outlines;  // local coordinates
  std::vector<Vec2> local_centroids;

  static LevelContext build(const Scene& scene, int resolution, std::span<const double> flatten_scales);
};

// One epoch: loss and gradient at the level's resolution, one Adam update
// per parameter group, projection (including the canvas border: an update
// never carries an element further past it), history append. On
// NonFiniteGradient the state is left untouched.
LossBreakdown step(RunState& state, const LevelContext& level, const Scene& scene,
                   const LossWeights& weights, const OptimizerConfig& cfg);

// Loss and gradients of the current transforms without updating anything.
TotalLoss evaluate_loss(std::span<const ElementTransform> transforms, const LevelContext& level,
                        const Scene& scene, const LossWeights& weights, int threads = 1);

struct RunCallbacks {
  // Called with the completed-epoch count at epoch 0 and every
  // `frame_stride` epochs.
  std::function<void(int epoch, std::span<const ElementTransform>)> on_frame;
  int frame_stride = 1;
  // Called after every epoch.
  std::function<void(const RunState&)> on_epoch;
};

struct LevelReport {
  int resolution = 0;
  int epochs = 0;  // epochs actually run in this invocation
  double wall_seconds = 0.0;
};

struct RunReport {
  std::vector<LevelReport> levels;
  LossBreakdown final_loss;  // at the last level's resolution
  QualityReport metrics;     // hard masks at 600 x 600
  double wall_seconds = 0.0;  // optimization only
};

// Runs the schedule from `state.epoch` onward, mutating `state` in place so
// it reflects the last completed epoch even when an error propagates. With
// early stopping, epochs a level leaves unused roll over to the next level.
RunReport run(RunState& state, const Scene& scene, const ResolutionSchedule& schedule,
              const LossWeights& weights, const OptimizerConfig& cfg, const RunCallbacks& callbacks = {});

// Versioned JSON dump of RunState; doubles are written with round-trip
// precision. Throws CheckpointError on malformed input.
std::string checkpoint_to_json(const RunState& state);
RunState checkpoint_from_json(const std::string& text);

struct FitConfig {
  int iterations = 400;
  double learning_rate = 0.5;  // pixels
  double kappa_start = 2.0;
  double kappa_end = 0.5;
  int samples_per_segment = 8;
  double nonconvergence_mse = 0.02;
};

struct FitResult {
  BezierShape shape;  // silhouette pixel units, y down
  double mse = 0.0;
  bool non_converged = false;
};

// Fits an N-segment closed loop to a binary silhouette by descending the
// soft-rasterized MSE over anchor and handle positions. `on_iteration`
// receives the loop after each update. Throws MultipleComponents.
FitResult fit_outline(const Grid<std::uint8_t>& silhouette, std::size_t segments,
                      const FitConfig& cfg = {},
                      const std::function<void(int, const BezierShape&)>& on_iteration = {});

}  // namespace collage
