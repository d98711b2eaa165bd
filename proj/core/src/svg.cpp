#include "sgrad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sgrad/error.hpp"

namespace sgrad {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 140.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 55.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double d = (hi - lo) * 0.05;
    lo -= d;
    hi += d;
  }
};

struct Frame {
  Range x, y;

  double px(double v) const {
    return kMarginLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kMarginLeft - kMarginRight);
  }
  double py(double v) const {
    return kHeight - kMarginBottom -
           (v - y.lo) / (y.hi - y.lo) * (kHeight - kMarginTop - kMarginBottom);
  }
};

void open_svg(std::string& s, const std::string& title) {
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       escape(title) + "</text>\n";
}

void axes(std::string& s, const Frame& f, const std::string& x_label, const std::string& y_label,
          bool log_y) {
  const double x0 = kMarginLeft, x1 = kWidth - kMarginRight;
  const double y0 = kHeight - kMarginBottom, y1 = kMarginTop;
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" +
       num(y0) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" +
       num(y1) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = f.x.lo + (f.x.hi - f.x.lo) * i / 4.0;
    const double fy = f.y.lo + (f.y.hi - f.y.lo) * i / 4.0;
    const double px = f.px(fx);
    const double py = f.py(fy);
    s += "<line x1=\"" + num(px) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(px) + "\" y2=\"" +
         num(y0 + 4) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(px) + "\" y=\"" + num(y0 + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + num(fx) +
         "</text>\n";
    s += "<line x1=\"" + num(x0 - 4) + "\" y1=\"" + num(py) + "\" x2=\"" + num(x0) + "\" y2=\"" +
         num(py) + "\" stroke=\"black\"/>\n";
    const std::string ylab = log_y ? ("1e" + num(fy)) : num(fy);
    s += "<text x=\"" + num(x0 - 8) + "\" y=\"" + num(py + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + ylab +
         "</text>\n";
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + escape(x_label) +
       "</text>\n";
  s += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
       num((y0 + y1) / 2) + ")\">" + escape(y_label) + "</text>\n";
}

void legend(std::string& s, const std::vector<std::pair<std::string, std::string>>& entries) {
  double y = kMarginTop + 10.0;
  const double x = kWidth - kMarginRight + 12.0;
  for (const auto& [name, color] : entries) {
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) +
         "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
    s += "<text x=\"" + num(x + 18) + "\" y=\"" + num(y + 2) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(name) + "</text>\n";
    y += 18.0;
  }
}

}  // namespace

std::string render_line_plot(const LinePlot& plot) {
  Frame f;
  std::vector<Series> drawn;
  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    Series s = plot.series[si];
    if (s.color.empty() || s.color == "auto") {
      s.color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    }
    Series kept;
    kept.name = s.name;
    kept.color = s.color;
    for (std::size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
      double y = s.ys[i];
      if (plot.log_y) {
        if (!(y > 0.0)) continue;
        y = std::log10(y);
      }
      if (!std::isfinite(s.xs[i]) || !std::isfinite(y)) continue;
      kept.xs.push_back(s.xs[i]);
      kept.ys.push_back(y);
      f.x.include(s.xs[i]);
      f.y.include(y);
    }
    drawn.push_back(std::move(kept));
  }
  f.x.pad();
  f.y.pad();

  std::string svg;
  open_svg(svg, plot.title);
  axes(svg, f, plot.x_label, plot.y_label, plot.log_y);

  std::vector<std::pair<std::string, std::string>> entries;
  for (const auto& s : drawn) {
    if (s.xs.empty()) continue;
    std::string pts;
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (i) pts += " ";
      pts += num(f.px(s.xs[i])) + "," + num(f.py(s.ys[i]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" +
           pts + "\"/>\n";
    entries.emplace_back(s.name, s.color);
  }
  legend(svg, entries);
  svg += "</svg>\n";
  return svg;
}

std::string render_scatter_plot(const ScatterPlot& plot) {
  Frame f;
  for (const auto& g : plot.groups) {
    for (std::size_t i = 0; i < g.xs.size() && i < g.ys.size(); ++i) {
      if (std::isfinite(g.xs[i]) && std::isfinite(g.ys[i])) {
        f.x.include(g.xs[i]);
        f.y.include(g.ys[i]);
      }
    }
  }
  f.x.pad();
  f.y.pad();

  std::string svg;
  open_svg(svg, plot.title);
  axes(svg, f, plot.x_label, plot.y_label, false);

  std::vector<std::pair<std::string, std::string>> entries;
  for (std::size_t gi = 0; gi < plot.groups.size(); ++gi) {
    const auto& g = plot.groups[gi];
    const std::string color =
        g.color == "auto" ? kPalette[gi % (sizeof(kPalette) / sizeof(kPalette[0]))] : g.color;
    for (std::size_t i = 0; i < g.xs.size() && i < g.ys.size(); ++i) {
      if (!std::isfinite(g.xs[i]) || !std::isfinite(g.ys[i])) continue;
      svg += "<circle cx=\"" + num(f.px(g.xs[i])) + "\" cy=\"" + num(f.py(g.ys[i])) + "\" r=\"" +
             num(g.radius) + "\" fill=\"" + color + "\" fill-opacity=\"0.6\"/>\n";
    }
    entries.emplace_back(g.name, color);
  }
  legend(svg, entries);
  svg += "</svg>\n";
  return svg;
}

void write_svg(const std::filesystem::path& path, const std::string& svg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("write_svg: cannot write '" + path.string() + "'");
  out << svg;
}

}  // namespace sgrad
