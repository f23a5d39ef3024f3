#include <algorithm>
#include <fstream>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <toml.hpp>

#include "collage/errors.hpp"
#include "collage/job.hpp"

namespace collage {

namespace {

// Typed access to one TOML table that remembers its dotted prefix for error
// messages.
class Section {
 public:
  Section(const toml::table& table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

  std::string key(std::string_view name) const {
    return prefix_.empty() ? std::string(name) : prefix_ + "." + std::string(name);
  }

  void allow(std::initializer_list<std::string_view> names) const {
    for (const auto& [k, v] : table_) {
      if (std::find(names.begin(), names.end(), k.str()) == names.end()) {
        throw ValidationError(key(k.str()), "unknown key");
      }
    }
  }

  bool has(std::string_view name) const { return table_.contains(name); }

  std::optional<double> number(std::string_view name) const {
    const toml::node* n = table_.get(name);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<double>()) return *v;
    if (auto v = n->value_exact<std::int64_t>()) return static_cast<double>(*v);
    throw ValidationError(key(name), "expected a number");
  }

  std::optional<std::int64_t> integer(std::string_view name) const {
    const toml::node* n = table_.get(name);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::int64_t>()) return *v;
    throw ValidationError(key(name), "expected an integer");
  }

  std::optional<bool> boolean(std::string_view name) const {
    const toml::node* n = table_.get(name);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<bool>()) return *v;
    throw ValidationError(key(name), "expected true or false");
  }

  std::optional<std::string> string(std::string_view name) const {
    const toml::node* n = table_.get(name);
    if (!n) return std::nullopt;
    if (auto v = n->value_exact<std::string>()) return *v;
    throw ValidationError(key(name), "expected a string");
  }

  std::optional<std::vector<double>> numbers(std::string_view name) const {
    const toml::node* n = table_.get(name);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) throw ValidationError(key(name), "expected an array of numbers");
    std::vector<double> out;
    for (const toml::node& e : *arr) {
      if (auto v = e.value_exact<double>()) {
        out.push_back(*v);
      } else if (auto i = e.value_exact<std::int64_t>()) {
        out.push_back(static_cast<double>(*i));
      } else {
        throw ValidationError(key(name), "expected an array of numbers");
      }
    }
    return out;
  }

  std::optional<std::vector<int>> integers(std::string_view name) const {
    const toml::node* n = table_.get(name);
    if (!n) return std::nullopt;
    const toml::array* arr = n->as_array();
    if (!arr) throw ValidationError(key(name), "expected an array of integers");
    std::vector<int> out;
    for (const toml::node& e : *arr) {
      auto v = e.value_exact<std::int64_t>();
      if (!v) throw ValidationError(key(name), "expected an array of integers");
      out.push_back(static_cast<int>(*v));
    }
    return out;
  }

  std::optional<Vec2> vec2(std::string_view name) const {
    auto v = numbers(name);
    if (!v) return std::nullopt;
    if (v->size() != 2) throw ValidationError(key(name), "expected [x, y]");
    return Vec2{(*v)[0], (*v)[1]};
  }

  std::optional<Section> table(std::string_view name) const {
    const toml::node* n = table_.get(name);
    if (!n) return std::nullopt;
    const toml::table* t = n->as_table();
    if (!t) throw ValidationError(key(name), "expected a table");
    return Section(*t, key(name));
  }

 private:
  const toml::table& table_;
  std::string prefix_;
};

int to_int(std::int64_t v, const std::string& key) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ValidationError(key, "out of range");
  }
  return static_cast<int>(v);
}

ElementEntry parse_element(const Section& s) {
  s.allow({"path", "count", "display_color", "scale_mode", "rotation_mode", "rotation_range", "rotation",
           "scale", "segments", "force"});
  ElementEntry e;
  e.path = s.string("path").value_or("");
  if (auto v = s.integer("count")) e.count = to_int(*v, s.key("count"));
  if (auto v = s.string("display_color")) e.display_color = *v;
  if (auto v = s.string("scale_mode")) {
    if (*v == "free") {
      e.scale_mode = ScaleMode::kFree;
    } else if (*v == "fixed") {
      e.scale_mode = ScaleMode::kFixed;
    } else {
      throw ValidationError(s.key("scale_mode"), "expected \"free\" or \"fixed\"");
    }
  }
  if (auto v = s.string("rotation_mode")) {
    if (*v == "free") {
      e.rotation_mode = RotationMode::free();
    } else if (*v == "fixed") {
      e.rotation_mode = RotationMode::fixed();
    } else if (*v == "range") {
      auto r = s.numbers("rotation_range");
      if (!r || r->size() != 2) throw ValidationError(s.key("rotation_range"), "range mode needs [lo, hi]");
      e.rotation_mode = RotationMode::range((*r)[0], (*r)[1]);
    } else {
      throw ValidationError(s.key("rotation_mode"), "expected \"free\", \"fixed\" or \"range\"");
    }
  }
  if (s.has("rotation_range") && e.rotation_mode.kind != RotationMode::Kind::kRange) {
    throw ValidationError(s.key("rotation_range"), "only valid with rotation_mode = \"range\"");
  }
  if (auto v = s.number("rotation")) e.rotation = *v;
  if (auto v = s.number("scale")) e.scale = *v;
  if (auto v = s.integer("segments")) e.segments = to_int(*v, s.key("segments"));
  if (auto v = s.boolean("force")) e.force = *v;
  return e;
}

JobConfig parse_table(const toml::table& root, const std::filesystem::path& base_dir) {
  const Section top(root, "");
  top.allow({"container", "init", "seed", "elements", "weights", "uniform", "render", "optimizer", "schedule",
             "force", "outputs"});
  JobConfig cfg;
  cfg.base_dir = base_dir;
  cfg.container = top.string("container").value_or("");
  if (auto v = top.string("init")) {
    if (*v == "mat") {
      cfg.init = InitKind::kMat;
    } else if (*v == "random") {
      cfg.init = InitKind::kRandom;
    } else {
      throw ValidationError("init", "expected \"mat\" or \"random\"");
    }
  }
  if (auto v = top.integer("seed")) {
    if (*v < 0) throw ValidationError("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*v);
  }

  if (const toml::node* n = root.get("elements")) {
    const toml::array* arr = n->as_array();
    if (!arr) throw ValidationError("elements", "expected an array of tables ([[elements]])");
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::table* t = (*arr)[i].as_table();
      const std::string key = fmt::format("elements[{}]", i);
      if (!t) throw ValidationError(key, "expected a table");
      cfg.elements.push_back(parse_element(Section(*t, key)));
    }
  }

  if (auto s = top.table("weights")) {
    s->allow({"alpha", "beta", "gamma", "delta"});
    if (auto v = s->number("alpha")) cfg.weights.alpha = *v;
    if (auto v = s->number("beta")) cfg.weights.beta = *v;
    if (auto v = s->number("gamma")) cfg.weights.gamma = *v;
    if (auto v = s->number("delta")) cfg.weights.delta = *v;
  }
  if (auto s = top.table("uniform")) {
    s->allow({"kernel_sizes", "level_weights", "normalize"});
    if (auto v = s->integers("kernel_sizes")) cfg.uniform.kernel_sizes = *v;
    if (auto v = s->numbers("level_weights")) cfg.uniform.level_weights = *v;
    if (auto v = s->boolean("normalize")) cfg.uniform.normalize = *v;
  }
  if (auto s = top.table("render")) {
    s->allow({"kappa", "tau", "padding"});
    if (auto v = s->number("kappa")) cfg.render.kappa = *v;
    if (auto v = s->number("tau")) cfg.render.tau = *v;
    if (auto v = s->integer("padding")) cfg.render.padding = to_int(*v, "render.padding");
  }
  if (auto s = top.table("optimizer")) {
    s->allow({"lr_translate", "lr_scale", "lr_rotate", "beta1", "beta2", "epsilon", "epochs", "grad_clip",
              "reset_moments", "early_stop"});
    OptimizerConfig& o = cfg.optimizer;
    if (auto v = s->number("lr_translate")) o.lr_translate = *v;
    if (auto v = s->number("lr_scale")) o.lr_scale = *v;
    if (auto v = s->number("lr_rotate")) o.lr_rotate = *v;
    if (auto v = s->number("beta1")) o.beta1 = *v;
    if (auto v = s->number("beta2")) o.beta2 = *v;
    if (auto v = s->number("epsilon")) o.epsilon = *v;
    if (auto v = s->integer("epochs")) o.epochs = to_int(*v, "optimizer.epochs");
    if (auto v = s->number("grad_clip")) o.grad_clip = *v;
    if (auto v = s->boolean("reset_moments")) o.reset_moments = *v;
    if (auto v = s->boolean("early_stop")) o.early_stop = *v;
  }
  const bool epochs_given = root.at_path("optimizer.epochs").node() != nullptr;

  std::vector<int> resolutions{50, 200, 600};
  std::optional<std::vector<int>> level_epochs;
  if (auto s = top.table("schedule")) {
    s->allow({"resolutions", "epochs"});
    if (auto v = s->integers("resolutions")) resolutions = *v;
    level_epochs = s->integers("epochs");
  }
  if (level_epochs) {
    if (level_epochs->size() != resolutions.size()) {
      throw ValidationError("schedule.epochs", "needs one entry per resolution");
    }
    cfg.schedule.levels.clear();
    int total = 0;
    for (std::size_t i = 0; i < resolutions.size(); ++i) {
      cfg.schedule.levels.push_back({resolutions[i], (*level_epochs)[i]});
      total += (*level_epochs)[i];
    }
    if (!epochs_given) cfg.optimizer.epochs = total;
  } else {
    cfg.schedule = ResolutionSchedule::even(resolutions, cfg.optimizer.epochs);
  }

  if (auto s = top.table("force")) {
    s->allow({"kind", "direction", "source"});
    const std::string kind = s->string("kind").value_or("directional");
    if (kind == "directional") {
      cfg.force = ForceSpec::directional(s->vec2("direction").value_or(Vec2{0.0, 1.0}));
      if (s->has("source")) throw ValidationError("force.source", "only valid for kind = \"point\"");
    } else if (kind == "point") {
      auto q = s->vec2("source");
      if (!q) throw ValidationError("force.source", "point force needs a source [x, y]");
      cfg.force = ForceSpec::point(*q);
      if (s->has("direction")) throw ValidationError("force.direction", "only valid for kind = \"directional\"");
    } else {
      throw ValidationError("force.kind", "expected \"directional\" or \"point\"");
    }
  }

  if (auto s = top.table("outputs")) {
    s->allow({"final_svg", "final_png", "frames_dir", "frame_stride", "metrics_json", "report_json", "checkpoint"});
    OutputsConfig& o = cfg.outputs;
    if (auto v = s->string("final_svg")) o.final_svg = *v;
    if (auto v = s->string("final_png")) o.final_png = *v;
    if (auto v = s->string("frames_dir")) o.frames_dir = *v;
    if (auto v = s->integer("frame_stride")) o.frame_stride = to_int(*v, "outputs.frame_stride");
    if (auto v = s->string("metrics_json")) o.metrics_json = *v;
    if (auto v = s->string("report_json")) o.report_json = *v;
    if (auto v = s->string("checkpoint")) o.checkpoint = *v;
  }
  return cfg;
}

std::string extension_of(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void check_input(const JobConfig& cfg, const std::string& path, const std::string& key, bool check_paths) {
  if (path.empty()) throw ValidationError(key, "is required");
  const std::string ext = extension_of(path);
  if (ext != ".svg" && ext != ".png") throw ValidationError(key, "expected an .svg or .png file");
  if (check_paths && !std::filesystem::is_regular_file(cfg.resolve(path))) {
    throw ValidationError(key, "file not found: " + cfg.resolve(path).string());
  }
}

}  // namespace

std::filesystem::path JobConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

void JobConfig::validate(bool check_paths) const {
  check_input(*this, container, "container", check_paths);
  if (elements.empty()) throw ValidationError("elements", "at least one [[elements]] entry is required");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const ElementEntry& e = elements[i];
    const std::string key = fmt::format("elements[{}]", i);
    check_input(*this, e.path, key + ".path", check_paths);
    if (e.count < 1) throw ValidationError(key + ".count", "must be >= 1");
    if (!(e.scale >= kMinScale) || !std::isfinite(e.scale)) {
      throw ValidationError(key + ".scale", fmt::format("must be >= {}", kMinScale));
    }
    if (!std::isfinite(e.rotation)) throw ValidationError(key + ".rotation", "must be finite");
    if (e.segments < static_cast<int>(BezierShape::kMinSegments)) {
      throw ValidationError(key + ".segments", "must be >= 3");
    }
    if (e.rotation_mode.kind == RotationMode::Kind::kRange && !(e.rotation_mode.lo <= e.rotation_mode.hi)) {
      throw ValidationError(key + ".rotation_range", "needs lo <= hi");
    }
  }
  weights.validate();
  uniform.validate();
  render.validate();
  optimizer.validate();
  schedule.validate(optimizer.epochs);
  if (force) force->validate();
  if (outputs.frame_stride < 1) throw ValidationError("outputs.frame_stride", "must be >= 1");
}

JobConfig parse_config(const std::string& text, const std::filesystem::path& base_dir, bool check_paths) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ParseError(std::string(e.description()), static_cast<int>(e.source().begin.line),
                     static_cast<int>(e.source().begin.column));
  }
  JobConfig cfg = parse_table(root, base_dir);
  cfg.validate(check_paths);
  return cfg;
}

JobConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), file.parent_path());
}

std::string dump_config(const JobConfig& cfg) {
  toml::table root;
  root.insert("container", cfg.container);
  root.insert("init", cfg.init == InitKind::kMat ? "mat" : "random");
  root.insert("seed", static_cast<std::int64_t>(cfg.seed));

  toml::array elements;
  for (const ElementEntry& e : cfg.elements) {
    toml::table t;
    t.insert("path", e.path);
    t.insert("count", e.count);
    t.insert("display_color", e.display_color);
    t.insert("scale_mode", e.scale_mode == ScaleMode::kFixed ? "fixed" : "free");
    switch (e.rotation_mode.kind) {
      case RotationMode::Kind::kFree:
        t.insert("rotation_mode", "free");
        break;
      case RotationMode::Kind::kFixed:
        t.insert("rotation_mode", "fixed");
        break;
      case RotationMode::Kind::kRange:
        t.insert("rotation_mode", "range");
        t.insert("rotation_range", toml::array{e.rotation_mode.lo, e.rotation_mode.hi});
        break;
    }
    t.insert("rotation", e.rotation);
    t.insert("scale", e.scale);
    t.insert("segments", e.segments);
    t.insert("force", e.force);
    elements.push_back(std::move(t));
  }
  root.insert("elements", std::move(elements));

  root.insert("weights", toml::table{{"alpha", cfg.weights.alpha},
                                     {"beta", cfg.weights.beta},
                                     {"gamma", cfg.weights.gamma},
                                     {"delta", cfg.weights.delta}});
  toml::array kernels, level_weights;
  for (int k : cfg.uniform.kernel_sizes) kernels.push_back(k);
  for (double w : cfg.uniform.level_weights) level_weights.push_back(w);
  root.insert("uniform", toml::table{{"kernel_sizes", std::move(kernels)},
                                     {"level_weights", std::move(level_weights)},
                                     {"normalize", cfg.uniform.normalize}});
  root.insert("render", toml::table{{"kappa", cfg.render.kappa},
                                    {"tau", cfg.render.tau},
                                    {"padding", cfg.render.padding}});
  const OptimizerConfig& o = cfg.optimizer;
  toml::table opt{{"lr_translate", o.lr_translate},
                  {"lr_scale", o.lr_scale},
                  {"lr_rotate", o.lr_rotate},
                  {"beta1", o.beta1},
                  {"beta2", o.beta2},
                  {"epsilon", o.epsilon},
                  {"epochs", o.epochs},
                  {"reset_moments", o.reset_moments},
                  {"early_stop", o.early_stop}};
  if (o.grad_clip) opt.insert("grad_clip", *o.grad_clip);
  root.insert("optimizer", std::move(opt));

  toml::array res, eps;
  for (const auto& l : cfg.schedule.levels) {
    res.push_back(l.resolution);
    eps.push_back(l.epochs);
  }
  root.insert("schedule", toml::table{{"resolutions", std::move(res)}, {"epochs", std::move(eps)}});

  if (cfg.force) {
    const ForceSpec& f = *cfg.force;
    if (f.kind == ForceSpec::Kind::kDirectional) {
      root.insert("force", toml::table{{"kind", "directional"}, {"direction", toml::array{f.direction.x, f.direction.y}}});
    } else {
      root.insert("force", toml::table{{"kind", "point"}, {"source", toml::array{f.source.x, f.source.y}}});
    }
  }

  const OutputsConfig& out = cfg.outputs;
  toml::table outputs;
  const std::pair<const char*, const std::string*> paths[] = {
      {"final_svg", &out.final_svg},       {"final_png", &out.final_png},     {"frames_dir", &out.frames_dir},
      {"metrics_json", &out.metrics_json}, {"report_json", &out.report_json}, {"checkpoint", &out.checkpoint}};
  for (const auto& [k, v] : paths) {
    if (!v->empty()) outputs.insert(k, *v);
  }
  outputs.insert("frame_stride", out.frame_stride);
  root.insert("outputs", std::move(outputs));

  std::ostringstream ss;
  ss << root << "\n";
  return ss.str();
}

}  // namespace collage
