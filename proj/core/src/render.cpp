#include "cspnma/render.hpp"

#include <cmath>
#include <cstdio>

namespace cspnma {

namespace {

constexpr const char* kFont = "Helvetica, Arial, sans-serif";

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

std::string num_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return std::string(buf);
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct XScale {
  double x_min, x_max, plot_x0, plot_x1;
  double operator()(double v) const {
    return plot_x0 + (v - x_min) / (x_max - x_min) * (plot_x1 - plot_x0);
  }
};

XScale read_scale(const Json& layout) {
  return {layout.at("x_min").get<double>(), layout.at("x_max").get<double>(),
          layout.at("plot_x0").get<double>(),
          layout.at("plot_x1").get<double>()};
}

std::string svg_open(double width, double height) {
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(width) +
       "\" height=\"" + px(height) + "\" viewBox=\"0 0 " + px(width) + " " +
       px(height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + px(width) + "\" height=\"" +
       px(height) + "\" fill=\"#ffffff\"/>\n";
  return s;
}

std::string text(double x, double y, const std::string& body,
                 const std::string& anchor = "start", int size = 13,
                 const std::string& fill = "#1a1a1a") {
  return "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-family=\"" +
         kFont + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\" fill=\"" + fill + "\">" +
         esc(body) + "</text>\n";
}

std::string hline(double x1, double x2, double y, const std::string& cls,
                  const std::string& stroke, double width,
                  const std::string& dash = "") {
  std::string s = "<line class=\"" + cls + "\" x1=\"" + px(x1) + "\" y1=\"" +
                  px(y) + "\" x2=\"" + px(x2) + "\" y2=\"" + px(y) +
                  "\" stroke=\"" + stroke + "\" stroke-width=\"" + px(width) +
                  "\"";
  if (!dash.empty()) s += " stroke-dasharray=\"" + dash + "\"";
  s += "/>\n";
  return s;
}

std::string vline(double x, double y1, double y2, const std::string& cls,
                  const std::string& stroke, double width,
                  const std::string& dash = "") {
  std::string s = "<line class=\"" + cls + "\" x1=\"" + px(x) + "\" y1=\"" +
                  px(y1) + "\" x2=\"" + px(x) + "\" y2=\"" + px(y2) +
                  "\" stroke=\"" + stroke + "\" stroke-width=\"" + px(width) +
                  "\"";
  if (!dash.empty()) s += " stroke-dasharray=\"" + dash + "\"";
  s += "/>\n";
  return s;
}

std::string square(double cx, double cy, double side, const std::string& cls,
                   const std::string& fill) {
  return "<rect class=\"" + cls + "\" x=\"" + px(cx - side / 2) + "\" y=\"" +
         px(cy - side / 2) + "\" width=\"" + px(side) + "\" height=\"" +
         px(side) + "\" fill=\"" + fill + "\"/>\n";
}

std::string diamond(double cx, double cy, double half, const std::string& cls,
                    const std::string& fill) {
  return "<polygon class=\"" + cls + "\" points=\"" + px(cx) + "," +
         px(cy - half) + " " + px(cx + half) + "," + px(cy) + " " + px(cx) +
         "," + px(cy + half) + " " + px(cx - half) + "," + px(cy) +
         "\" fill=\"" + fill + "\"/>\n";
}

std::string circle(double cx, double cy, double r, const std::string& cls,
                   const std::string& fill) {
  return "<circle class=\"" + cls + "\" cx=\"" + px(cx) + "\" cy=\"" + px(cy) +
         "\" r=\"" + px(r) + "\" fill=\"" + fill + "\"/>\n";
}

std::string axis(const XScale& sc, double y) {
  std::string s = hline(sc.plot_x0, sc.plot_x1, y, "axis", "#555555", 1.0);
  for (int k = 0; k <= 4; ++k) {
    const double v = sc.x_min + k * (sc.x_max - sc.x_min) / 4.0;
    const double x = sc(v);
    s += vline(x, y, y + 6, "tick", "#555555", 1.0);
    s += text(x, y + 22, num_label(v), "middle", 12, "#333333");
  }
  return s;
}

const char* kPalette[] = {"#2b6cb0", "#c05621", "#2f855a", "#6b46c1",
                          "#b83280", "#975a16", "#2c7a7b", "#702459",
                          "#4a5568", "#9b2c2c"};

}  // namespace

std::string render_forest_svg(const Json& j) {
  const Json& layout = j.at("layout");
  const double width = layout.at("width").get<double>();
  const double height = layout.at("height").get<double>();
  const double row_y0 = layout.at("row_y0").get<double>();
  const double row_dy = layout.at("row_dy").get<double>();
  const double side_max = layout.at("marker_side_max").get<double>();
  const XScale sc = read_scale(layout);

  std::string s = svg_open(width, height);
  s += text(width / 2, 40, "Evidence decomposition " +
            j.at("target").get<std::string>() + " (" +
            j.at("dataset").get<std::string>() + ")", "middle", 16);
  s += text(20, 80, "Component", "start", 12, "#555555");
  s += text(width - 40, 80, "Weight %", "end", 12, "#555555");

  const Json& rows = j.at("rows");
  const double axis_y = row_y0 + rows.size() * row_dy;
  s += axis(sc, axis_y);

  const double nma_x = sc(j.at("nma_estimate").get<double>());
  s += vline(nma_x, row_y0 - 20, axis_y, "nma-line", "#c0392b", 1.5, "6,4");

  int i = 0;
  for (const Json& row : rows) {
    const double y = row_y0 + i * row_dy;
    const std::string kind = row.at("kind").get<std::string>();
    std::string label = row.at("label").get<std::string>();
    const std::string path = row.at("path").get<std::string>();
    if (kind == "indirect_path" && !path.empty()) label += "  " + path;
    s += text(20, y + 4, label, "start", 13);

    char pct[16];
    std::snprintf(pct, sizeof(pct), "%.1f%%",
                  row.at("weight_pct").get<double>());
    s += text(width - 40, y + 4, pct, "end", 13);

    s += hline(sc(row.at("ci_low").get<double>()),
               sc(row.at("ci_high").get<double>()), y, "ci", "#444444", 1.5);
    const double est_x = sc(row.at("estimate").get<double>());
    const double w = std::abs(row.at("weight").get<double>());
    if (kind == "direct_study" || kind == "indirect_path") {
      const double side = std::max(3.0, side_max * std::sqrt(std::min(w, 1.0)));
      const std::string fill = kind == "direct_study" ? "#2b6cb0" : "#c05621";
      s += square(est_x, y, side, "est", fill);
    } else {
      const std::string fill = kind == "network" ? "#c0392b" : "#4a5568";
      s += diamond(est_x, y, 8.0, "est", fill);
    }
    ++i;
  }
  s += "</svg>\n";
  return s;
}

std::string render_tension_svg(const Json& j) {
  const Json& layout = j.at("layout");
  const double width = layout.at("width").get<double>();
  const double height = layout.at("height").get<double>();
  const double row_y0 = layout.at("row_y0").get<double>();
  const double row_dy = layout.at("row_dy").get<double>();
  const double dir_dy = layout.at("dir_dy").get<double>();
  const double ind_dy = layout.at("ind_dy").get<double>();
  const double r_max = layout.at("marker_r_max").get<double>();
  const XScale sc = read_scale(layout);

  std::string s = svg_open(width, height);
  s += text(width / 2, 40, "Direct vs indirect evidence, baseline " +
            j.at("baseline").get<std::string>() + " (" +
            j.at("dataset").get<std::string>() + ")", "middle", 16);

  const Json& rows = j.at("rows");
  const double axis_y = row_y0 + rows.size() * row_dy;
  s += axis(sc, axis_y);
  if (sc.x_min < 0.0 && sc.x_max > 0.0)
    s += vline(sc(0.0), row_y0 - 20, axis_y, "zero-line", "#777777", 1.0,
               "2,3");

  int i = 0;
  for (const Json& row : rows) {
    const double y = row_y0 + i * row_dy;
    s += text(20, y + 4, row.at("label").get<std::string>(), "start", 13);

    auto draw = [&](const Json& comp, double dy, const char* cls,
                    const char* fill, int shape) {
      if (comp.is_null()) return;
      const double cy = y + dy;
      s += hline(sc(comp.at("ci_low").get<double>()),
                 sc(comp.at("ci_high").get<double>()), cy, "ci", "#999999",
                 1.0);
      const double cx = sc(comp.at("estimate").get<double>());
      const double wgt = std::min(1.0, std::abs(comp.at("weight").get<double>()));
      const double r = std::max(2.5, r_max * std::sqrt(wgt));
      if (shape == 0)
        s += square(cx, cy, 2 * r, cls, fill);
      else if (shape == 1)
        s += circle(cx, cy, r, cls, fill);
      else
        s += diamond(cx, cy, r + 1.5, cls, fill);
    };
    draw(row.at("dir"), dir_dy, "t-dir", "#2b6cb0", 0);
    draw(row.at("ind"), ind_dy, "t-ind", "#c05621", 1);
    draw(row.at("nma"), 0.0, "t-nma", "#c0392b", 2);
    ++i;
  }
  s += text(30, height - 30, "square = direct, circle = indirect, diamond = network",
            "start", 12, "#555555");
  s += "</svg>\n";
  return s;
}

std::string render_paths_svg(const Json& j) {
  const Json& layout = j.at("layout");
  const double width = layout.at("width").get<double>();
  const double height = layout.at("height").get<double>();
  const double node_r = layout.at("node_radius").get<double>();

  std::string s = svg_open(width, height);
  s += text(width / 2, 40, "Evidence paths " + j.at("target").get<std::string>() +
            " (" + j.at("dataset").get<std::string>() + ")", "middle", 16);

  int pi = 0;
  for (const Json& e : j.at("entries")) {
    const std::string color = kPalette[pi % 10];
    const double w = e.at("width").get<double>();
    std::string points;
    for (const Json& pt : e.at("points")) {
      if (!points.empty()) points += " ";
      points += px(pt[0].get<double>()) + "," + px(pt[1].get<double>());
    }
    s += "<polyline class=\"flow\" points=\"" + points +
         "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + px(w) +
         "\" stroke-opacity=\"0.75\" stroke-linecap=\"round\"/>\n";
    char wlab[16];
    std::snprintf(wlab, sizeof(wlab), "%.4f", e.at("weight").get<double>());
    s += text(e.at("label_x").get<double>(), e.at("label_y").get<double>(),
              wlab, "middle", 12, color);
    ++pi;
  }

  for (const Json& node : j.at("nodes")) {
    const double x = node.at("x").get<double>();
    const double y = node.at("y").get<double>();
    const bool endpoint = node.at("endpoint").get<bool>();
    s += circle(x, y, endpoint ? node_r : node_r * 0.75, "node",
                endpoint ? "#e9eef5" : "#f3f3f3");
    s += "<circle class=\"node-ring\" cx=\"" + px(x) + "\" cy=\"" + px(y) +
         "\" r=\"" + px(endpoint ? node_r : node_r * 0.75) +
         "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";
    s += text(x, y + 4, node.at("label").get<std::string>(), "middle", 12);
  }
  s += "</svg>\n";
  return s;
}

}  // namespace cspnma
