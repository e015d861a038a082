#include "smartposer/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "smartposer/error.hpp"

namespace smartposer::svg {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
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

std::string header(double w, double h, const std::string& title) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
         "\" viewBox=\"0 0 " + fmt(w) + " " + fmt(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n"
         "<rect x=\"0\" y=\"0\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) + "\" fill=\"#ffffff\"/>\n"
         "<text x=\"" + fmt(w / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";
}

struct Axes {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

std::string draw_axes(const Axes& a, const std::string& xl, const std::string& yl) {
  std::string s;
  const double bx = kLeft, by = kHeight - kBottom, tx = kWidth - kRight, ty = kTop;
  s += "<path d=\"M" + fmt(bx) + " " + fmt(ty) + " L" + fmt(bx) + " " + fmt(by) + " L" + fmt(tx) + " " + fmt(by) +
       "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = a.x0 + (a.x1 - a.x0) * i / 4.0;
    const double yv = a.y0 + (a.y1 - a.y0) * i / 4.0;
    s += "<text x=\"" + fmt(a.px(xv)) + "\" y=\"" + fmt(by + 16) + "\" text-anchor=\"middle\">" + label(xv) +
         "</text>\n";
    s += "<text x=\"" + fmt(bx - 6) + "\" y=\"" + fmt(a.py(yv) + 4) + "\" text-anchor=\"end\">" + label(yv) +
         "</text>\n";
  }
  s += "<text x=\"" + fmt((bx + tx) / 2) + "\" y=\"" + fmt(kHeight - 12) + "\" text-anchor=\"middle\">" +
       escape(xl) + "</text>\n";
  s += "<text x=\"14\" y=\"" + fmt((by + ty) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
       fmt((by + ty) / 2) + ")\">" + escape(yl) + "</text>\n";
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 12 + 16.0 * static_cast<double>(i);
    const double x = kWidth - kRight - 130;
    s += "<path d=\"M" + fmt(x) + " " + fmt(y) + " L" + fmt(x + 20) + " " + fmt(y) + "\" stroke=\"" +
         kColors[i % 5] + "\" stroke-width=\"2\"/>\n";
    s += "<text x=\"" + fmt(x + 26) + "\" y=\"" + fmt(y + 4) + "\">" + escape(names[i]) + "</text>\n";
  }
  return s;
}

std::string polyline(const Axes& a, const std::vector<double>& xs, const std::vector<double>& ys,
                     const char* color) {
  std::string d;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d += (i == 0 ? "M" : " L") + fmt(a.px(xs[i])) + " " + fmt(a.py(ys[i]));
  }
  return "<path d=\"" + d + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
}

double nice_max(double v) {
  if (!(v > 0.0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * p >= v) return m * p;
  }
  return 10.0 * p;
}

std::string heat_color(double v, double vmax) {
  const double f = vmax > 0.0 ? std::clamp(v / vmax, 0.0, 1.0) : 0.0;
  const int r = static_cast<int>(std::lround(255.0 - 75.0 * f));
  const int g = static_cast<int>(std::lround(255.0 - 235.0 * f));
  const int b = static_cast<int>(std::lround(255.0 - 225.0 * f));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string cdf_plot(const std::vector<std::pair<std::string, eval::CdfCurve>>& curves, const std::string& title) {
  if (curves.empty()) throw InvalidInput("cdf_plot: no series");
  double vmax = 0.0;
  for (const auto& [name, c] : curves) {
    if (c.values.empty() || c.values.size() != c.fractions.size()) {
      throw InvalidInput("cdf_plot: series '" + name + "' is empty");
    }
    vmax = std::max(vmax, c.values.back());
  }
  const Axes a{0.0, nice_max(vmax), 0.0, 1.0};
  std::string s = header(kWidth, kHeight, title) + draw_axes(a, "error (cm)", "fraction");
  std::vector<std::string> names;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k].second;
    std::vector<double> xs, ys;
    double prev = 0.0;
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      if (i + 1 < c.values.size() && c.values[i + 1] == c.values[i]) continue;
      xs.push_back(c.values[i]);
      ys.push_back(prev);
      xs.push_back(c.values[i]);
      ys.push_back(c.fractions[i]);
      prev = c.fractions[i];
    }
    s += polyline(a, xs, ys, kColors[k % 5]);
    names.push_back(curves[k].first);
  }
  s += legend(names);
  return s + "</svg>\n";
}

std::string heatmap_plot(const std::vector<HeatmapPanel>& panels, double lo, double hi, const std::string& title) {
  if (panels.empty()) throw InvalidInput("heatmap_plot: no panels");
  double vmax = 0.0;
  for (const auto& p : panels) {
    if (p.cells.size() == 0) throw InvalidInput("heatmap_plot: empty panel '" + p.title + "'");
    vmax = std::max(vmax, p.cells.maxCoeff());
  }
  const double side = 200.0;
  const double gap = 50.0;
  const double width = gap + static_cast<double>(panels.size()) * (side + gap);
  const double height = side + 110.0;
  std::string s = header(width, height, title);
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    const double ox = gap + static_cast<double>(k) * (side + gap);
    const double oy = 45.0;
    const double cw = side / static_cast<double>(p.cells.cols());
    const double ch = side / static_cast<double>(p.cells.rows());
    s += "<text x=\"" + fmt(ox + side / 2) + "\" y=\"" + fmt(oy - 6) + "\" text-anchor=\"middle\">" +
         escape(p.title) + "</text>\n";
    for (Eigen::Index r = 0; r < p.cells.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cells.cols(); ++c) {
        const double v = p.cells(r, c);
        if (v <= 0.0) continue;
        const double x = ox + static_cast<double>(c) * cw;
        const double y = oy + side - static_cast<double>(r + 1) * ch;
        s += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(cw) + "\" height=\"" + fmt(ch) +
             "\" fill=\"" + heat_color(v, vmax) + "\"/>\n";
      }
    }
    s += "<rect x=\"" + fmt(ox) + "\" y=\"" + fmt(oy) + "\" width=\"" + fmt(side) + "\" height=\"" + fmt(side) +
         "\" fill=\"none\" stroke=\"#000000\"/>\n";
    s += "<text x=\"" + fmt(ox) + "\" y=\"" + fmt(oy + side + 14) + "\">" + label(lo) + "</text>\n";
    s += "<text x=\"" + fmt(ox + side) + "\" y=\"" + fmt(oy + side + 14) + "\" text-anchor=\"end\">" + label(hi) +
         "</text>\n";
    s += "<text x=\"" + fmt(ox + side / 2) + "\" y=\"" + fmt(oy + side + 28) + "\" text-anchor=\"middle\">" +
         escape(p.x_label) + " (m)</text>\n";
    s += "<text x=\"" + fmt(ox - 8) + "\" y=\"" + fmt(oy + side / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 " +
         fmt(ox - 8) + " " + fmt(oy + side / 2) + ")\">" + escape(p.y_label) + " (m)</text>\n";
  }
  s += "<text x=\"" + fmt(gap) + "\" y=\"" + fmt(height - 14) + "\">color scale 0 to " + label(vmax) +
       " m (white to dark red)</text>\n";
  return s + "</svg>\n";
}

std::string uwb_trace_plot(const io::UwbTrace& trace, const std::string& title) {
  if (trace.t.empty()) throw InvalidInput("uwb_trace_plot: empty trace");
  if (trace.raw.size() != trace.t.size() || trace.truth.size() != trace.t.size() ||
      (!trace.corrected.empty() && trace.corrected.size() != trace.t.size())) {
    throw InvalidInput("uwb_trace_plot: series lengths differ");
  }
  double ymax = 0.0;
  for (const auto* v : {&trace.raw, &trace.corrected, &trace.truth}) {
    for (double x : *v) ymax = std::max(ymax, x);
  }
  const double t0 = trace.t.front();
  const double t1 = trace.t.back() > t0 ? trace.t.back() : t0 + 1.0;
  const Axes a{t0, t1, 0.0, nice_max(ymax)};
  std::string s = header(kWidth, kHeight, title) + draw_axes(a, "time (s)", "distance (m)");
  std::vector<std::string> names{"raw UWB"};
  s += polyline(a, trace.t, trace.raw, kColors[0]);
  if (!trace.corrected.empty()) {
    s += polyline(a, trace.t, trace.corrected, kColors[1]);
    names.push_back("corrected");
  }
  s += polyline(a, trace.t, trace.truth, kColors[2]);
  names.push_back("true");
  std::string leg;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 12 + 16.0 * static_cast<double>(i);
    const double x = kWidth - kRight - 130;
    const char* color = kColors[names[i] == "raw UWB" ? 0 : (names[i] == "corrected" ? 1 : 2)];
    leg += "<path d=\"M" + fmt(x) + " " + fmt(y) + " L" + fmt(x + 20) + " " + fmt(y) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    leg += "<text x=\"" + fmt(x + 26) + "\" y=\"" + fmt(y + 4) + "\">" + escape(names[i]) + "</text>\n";
  }
  return s + leg + "</svg>\n";
}

}  // namespace smartposer::svg
