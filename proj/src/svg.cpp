#include "collage/svg.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "collage/errors.hpp"

namespace collage::svg {

namespace {

CubicSegment line_segment(Vec2 a, Vec2 b) {
  return {{a, a + (b - a) / 3.0, a + (b - a) * (2.0 / 3.0), b}};
}

class PathLexer {
 public:
  explicit PathLexer(std::string_view d) : d_(d) {}

  void skip_separators() {
    while (pos_ < d_.size() && (std::isspace(static_cast<unsigned char>(d_[pos_])) || d_[pos_] == ',')) {
      ++pos_;
    }
  }

  bool done() {
    skip_separators();
    return pos_ >= d_.size();
  }

  bool next_is_command() {
    skip_separators();
    return pos_ < d_.size() && std::isalpha(static_cast<unsigned char>(d_[pos_])) &&
           d_[pos_] != 'e' && d_[pos_] != 'E';
  }

  char command() {
    skip_separators();
    return d_[pos_++];
  }

  double number() {
    skip_separators();
    if (pos_ >= d_.size()) fail("expected a number");
    // Number grammar: sign? digits? ('.' digits)? exponent?
    std::size_t end = pos_;
    if (end < d_.size() && (d_[end] == '+' || d_[end] == '-')) ++end;
    bool digits = false;
    while (end < d_.size() && std::isdigit(static_cast<unsigned char>(d_[end]))) {
      ++end;
      digits = true;
    }
    if (end < d_.size() && d_[end] == '.') {
      ++end;
      while (end < d_.size() && std::isdigit(static_cast<unsigned char>(d_[end]))) {
        ++end;
        digits = true;
      }
    }
    if (!digits) fail("expected a number");
    if (end < d_.size() && (d_[end] == 'e' || d_[end] == 'E')) {
      std::size_t e = end + 1;
      if (e < d_.size() && (d_[e] == '+' || d_[e] == '-')) ++e;
      if (e < d_.size() && std::isdigit(static_cast<unsigned char>(d_[e]))) {
        while (e < d_.size() && std::isdigit(static_cast<unsigned char>(d_[e]))) ++e;
        end = e;
      }
    }
    std::size_t start = pos_;
    if (d_[start] == '+') ++start;
    double value = 0.0;
    const auto res = std::from_chars(d_.data() + start, d_.data() + end, value);
    if (res.ec != std::errc{} || res.ptr != d_.data() + end) fail("malformed number");
    pos_ = end;
    return value;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw SvgParseError(fmt::format("path data: {} at offset {}", msg, pos_));
  }

 private:
  std::string_view d_;
  std::size_t pos_ = 0;
};

std::string attribute(std::string_view tag, std::string_view name) {
  std::size_t pos = 0;
  while ((pos = tag.find(name, pos)) != std::string_view::npos) {
    const bool boundary = pos > 0 && (std::isspace(static_cast<unsigned char>(tag[pos - 1])));
    std::size_t p = pos + name.size();
    while (p < tag.size() && std::isspace(static_cast<unsigned char>(tag[p]))) ++p;
    if (boundary && p < tag.size() && tag[p] == '=') {
      ++p;
      while (p < tag.size() && std::isspace(static_cast<unsigned char>(tag[p]))) ++p;
      if (p < tag.size() && (tag[p] == '"' || tag[p] == '\'')) {
        const char quote = tag[p];
        const std::size_t close = tag.find(quote, p + 1);
        if (close == std::string_view::npos) break;
        return std::string(tag.substr(p + 1, close - p - 1));
      }
    }
    pos += name.size();
  }
  return {};
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw SvgParseError("cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void split_segment(std::vector<CubicSegment>& segs, std::size_t k) {
  const auto& c = segs[k].p;
  const Vec2 p01 = (c[0] + c[1]) * 0.5;
  const Vec2 p12 = (c[1] + c[2]) * 0.5;
  const Vec2 p23 = (c[2] + c[3]) * 0.5;
  const Vec2 p012 = (p01 + p12) * 0.5;
  const Vec2 p123 = (p12 + p23) * 0.5;
  const Vec2 mid = (p012 + p123) * 0.5;
  const CubicSegment first{{c[0], p01, p012, mid}};
  const CubicSegment second{{mid, p123, p23, c[3]}};
  segs[k] = first;
  segs.insert(segs.begin() + static_cast<std::ptrdiff_t>(k) + 1, second);
}

void append_coord(std::string& out, Vec2 p) { out += fmt::format("{:.6f} {:.6f}", p.x, p.y); }

}  // namespace

std::vector<Subpath> parse_path_data(std::string_view d) {
  PathLexer lex(d);
  std::vector<Subpath> subpaths;
  Vec2 cur{};
  Vec2 start{};
  char cmd = 0;
  bool have_current = false;

  auto current_subpath = [&]() -> Subpath& {
    if (subpaths.empty()) lex.fail("drawing command before moveto");
    return subpaths.back();
  };

  while (!lex.done()) {
    if (lex.next_is_command()) {
      cmd = lex.command();
    } else if (cmd == 0) {
      lex.fail("expected a command");
    }
    const bool rel = std::islower(static_cast<unsigned char>(cmd)) != 0;
    switch (std::toupper(static_cast<unsigned char>(cmd))) {
      case 'M': {
        Vec2 p{lex.number(), lex.number()};
        if (rel && have_current) p = p + cur;
        subpaths.push_back({});
        cur = start = p;
        have_current = true;
        // Further coordinate pairs are implicit linetos.
        cmd = rel ? 'l' : 'L';
        break;
      }
      case 'L': {
        Vec2 p{lex.number(), lex.number()};
        if (rel) p = p + cur;
        current_subpath().segments.push_back(line_segment(cur, p));
        cur = p;
        break;
      }
      case 'H': {
        double x = lex.number();
        if (rel) x += cur.x;
        const Vec2 p{x, cur.y};
        current_subpath().segments.push_back(line_segment(cur, p));
        cur = p;
        break;
      }
      case 'V': {
        double y = lex.number();
        if (rel) y += cur.y;
        const Vec2 p{cur.x, y};
        current_subpath().segments.push_back(line_segment(cur, p));
        cur = p;
        break;
      }
      case 'C': {
        Vec2 c1{lex.number(), lex.number()};
        Vec2 c2{lex.number(), lex.number()};
        Vec2 p{lex.number(), lex.number()};
        if (rel) {
          c1 = c1 + cur;
          c2 = c2 + cur;
          p = p + cur;
        }
        current_subpath().segments.push_back({{cur, c1, c2, p}});
        cur = p;
        break;
      }
      case 'Z': {
        Subpath& sp = current_subpath();
        if (!sp.segments.empty()) {
          const Vec2 end = sp.segments.back().p[3];
          const double scale = std::max({1.0, std::abs(start.x), std::abs(start.y)});
          if (norm(end - start) <= 1e-9 * scale) {
            sp.segments.back().p[3] = start;
          } else {
            sp.segments.push_back(line_segment(end, start));
          }
        }
        sp.closed = true;
        cur = start;
        cmd = 0;
        break;
      }
      default:
        lex.fail(fmt::format("unsupported command '{}'", cmd));
    }
  }
  for (auto& sp : subpaths) {
    if (!sp.closed && !sp.segments.empty() && sp.segments.back().p[3] == sp.segments.front().p[0]) {
      sp.closed = true;
    }
  }
  subpaths.erase(std::remove_if(subpaths.begin(), subpaths.end(),
                                [](const Subpath& sp) { return sp.segments.empty(); }),
                 subpaths.end());
  return subpaths;
}

std::vector<PathElement> parse_document(std::string_view text) {
  std::vector<PathElement> out;
  std::size_t pos = 0;
  while ((pos = text.find("<path", pos)) != std::string_view::npos) {
    const std::size_t after = pos + 5;
    if (after < text.size() && !std::isspace(static_cast<unsigned char>(text[after])) &&
        text[after] != '/' && text[after] != '>') {
      pos = after;
      continue;
    }
    const std::size_t close = text.find('>', pos);
    if (close == std::string_view::npos) throw SvgParseError("unterminated <path> element");
    const std::string_view tag = text.substr(pos, close - pos);
    if (!attribute(tag, "transform").empty()) {
      throw SvgParseError("<path> transform attributes are not supported; bake them into d");
    }
    PathElement el;
    el.d = attribute(tag, "d");
    el.fill = attribute(tag, "fill");
    el.id = attribute(tag, "id");
    el.css_class = attribute(tag, "class");
    if (el.d.empty()) throw SvgParseError("<path> element without d attribute");
    out.push_back(std::move(el));
    pos = close;
  }
  return out;
}

ParsedShape shape_from_path(const PathElement& element) {
  auto subpaths = parse_path_data(element.d);
  if (subpaths.size() != 1) {
    throw SvgParseError(fmt::format("path '{}' must contain exactly one subpath, found {}",
                                    element.id, subpaths.size()));
  }
  auto& sp = subpaths.front();
  if (!sp.closed) throw SvgParseError(fmt::format("path '{}' is not closed", element.id));
  while (sp.segments.size() < BezierShape::kMinSegments) {
    std::size_t longest = 0;
    double best = -1.0;
    for (std::size_t k = 0; k < sp.segments.size(); ++k) {
      const double len = norm(sp.segments[k].p[3] - sp.segments[k].p[0]) +
                         norm(sp.segments[k].p[1] - sp.segments[k].p[0]);
      if (len > best) {
        best = len;
        longest = k;
      }
    }
    split_segment(sp.segments, longest);
  }
  return {BezierShape(std::move(sp.segments), element.id), element.fill};
}

ParsedShape load_shape(const std::filesystem::path& file) {
  const auto elements = parse_document(read_file(file));
  if (elements.size() != 1) {
    throw SvgParseError(fmt::format("{}: expected one <path>, found {}", file.string(),
                                    elements.size()));
  }
  ParsedShape parsed = shape_from_path(elements.front());
  if (parsed.shape.id().empty()) parsed.shape.set_id(file.stem().string());
  return parsed;
}

std::vector<Polyline> container_outlines_from_text(std::string_view text, double tolerance) {
  std::vector<Polyline> out;
  for (const auto& el : parse_document(text)) {
    if (el.css_class == "element") continue;
    for (auto& sp : parse_path_data(el.d)) {
      if (!sp.closed) throw SvgParseError("container path '" + el.id + "' is not closed");
      while (sp.segments.size() < BezierShape::kMinSegments) split_segment(sp.segments, 0);
      const BezierShape loop(std::move(sp.segments), el.id);
      out.push_back(flatten(loop, tolerance));
    }
  }
  if (out.empty()) throw SvgParseError("container document has no closed paths");
  return out;
}

std::vector<Polyline> load_container_outlines(const std::filesystem::path& file,
                                              double tolerance) {
  return container_outlines_from_text(read_file(file), tolerance);
}

std::string path_data(const BezierShape& shape) {
  std::string out;
  const auto segs = shape.segments();
  if (segs.empty()) return out;
  out += "M ";
  append_coord(out, segs.front().p[0]);
  for (const auto& seg : segs) {
    out += " C ";
    append_coord(out, seg.p[1]);
    out += ' ';
    append_coord(out, seg.p[2]);
    out += ' ';
    append_coord(out, seg.p[3]);
  }
  out += " Z";
  return out;
}

std::string path_data(const Polyline& poly) {
  std::string out;
  for (std::size_t i = 0; i < poly.vertices.size(); ++i) {
    out += i == 0 ? "M " : " L ";
    append_coord(out, poly.vertices[i]);
  }
  if (poly.closed && !poly.vertices.empty()) out += " Z";
  return out;
}

std::string export_document(std::span<const ExportItem> items,
                            std::span<const Polyline> container, double canvas_width,
                            double canvas_height) {
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n",
      canvas_width, canvas_height);
  if (!container.empty()) {
    out += "  <g id=\"container-layer\">\n";
    for (std::size_t i = 0; i < container.size(); ++i) {
      out += fmt::format(
          "    <path id=\"container-{}\" class=\"container\" fill=\"none\" stroke=\"#bbbbbb\" "
          "d=\"{}\"/>\n",
          i, path_data(container[i]));
    }
    out += "  </g>\n";
  }
  out += "  <g id=\"elements\">\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    const BezierShape baked = apply_transform(*items[i].shape, items[i].transform);
    out += fmt::format("    <path id=\"element-{}\" class=\"element\" fill=\"{}\" d=\"{}\"/>\n", i,
                       items[i].color.empty() ? "#000000" : items[i].color, path_data(baked));
  }
  out += "  </g>\n</svg>\n";
  return out;
}

std::vector<ParsedShape> load_layout(std::string_view text) {
  std::vector<ParsedShape> out;
  for (const auto& el : parse_document(text)) {
    if (el.css_class != "element") continue;
    out.push_back(shape_from_path(el));
  }
  return out;
}

}  // namespace collage::svg
