#include "subcast/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace subcast::svg {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 24;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 48;

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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string color_scale(double t) {
  // t in [0,1]: blue -> white -> red
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    const double u = t / 0.5;
    r = static_cast<int>(33 + u * (255 - 33));
    g = static_cast<int>(102 + u * (255 - 102));
    b = static_cast<int>(172 + u * (255 - 172));
  } else {
    const double u = (t - 0.5) / 0.5;
    r = static_cast<int>(255 - u * (255 - 178));
    g = static_cast<int>(255 - u * (255 - 24));
    b = static_cast<int>(255 - u * (255 - 43));
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

void write_line_chart(const std::filesystem::path& path,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label,
                      const std::vector<Series>& series) {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  bool first = true;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      } else {
        xmin = std::min(xmin, s.x[i]);
        xmax = std::max(xmax, s.x[i]);
        ymin = std::min(ymin, s.y[i]);
        ymax = std::max(ymax, s.y[i]);
      }
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double x) {
    return kMarginLeft + (x - xmin) / (xmax - xmin) * plot_w;
  };
  auto py = [&](double y) {
    return kMarginTop + (1.0 - (y - ymin) / (ymax - ymin)) * plot_h;
  };

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title)
      << "</text>\n";

  // Axes and gridlines.
  out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
      << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#444444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = ymin + (ymax - ymin) * k / 4.0;
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << num(py(y)) << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << num(py(y))
        << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << num(py(y) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << num(y) << "</text>\n";
    const double x = xmin + (xmax - xmin) * k / 4.0;
    out << "<text x=\"" << num(px(x)) << "\" y=\"" << kMarginTop + plot_h + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << num(x) << "</text>\n";
  }
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << kHeight / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\">" << escape(y_label) << "</text>\n";

  int legend_y = kMarginTop + 14;
  for (const auto& s : series) {
    std::string points;
    bool open = false;
    std::string d;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        open = false;
        continue;
      }
      d += (open ? " L " : " M ");
      d += num(px(s.x[i])) + " " + num(py(s.y[i]));
      open = true;
    }
    (void)points;
    out << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << s.color
        << "\" stroke-width=\"1.5\"";
    if (s.dashed) out << " stroke-dasharray=\"6 3\"";
    out << "/>\n";
    out << "<line x1=\"" << kMarginLeft + plot_w - 150 << "\" y1=\"" << legend_y
        << "\" x2=\"" << kMarginLeft + plot_w - 126 << "\" y2=\"" << legend_y
        << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"";
    if (s.dashed) out << " stroke-dasharray=\"6 3\"";
    out << "/>\n";
    out << "<text x=\"" << kMarginLeft + plot_w - 120 << "\" y=\""
        << legend_y + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.label)
        << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
}

void write_heatmap(const std::filesystem::path& path, const std::string& title,
                   const Grid& grid, const std::vector<double>& values,
                   double limit) {
  if (static_cast<int>(values.size()) != grid.npoints()) {
    throw ConfigError("heatmap: value/grid size mismatch");
  }
  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const double cell_w = plot_w / grid.nlon;
  const double cell_h = plot_h / grid.nlat;

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << escape(title)
      << "</text>\n";
  for (int i = 0; i < grid.nlat; ++i) {
    // Row 0 is the southernmost latitude; draw it at the bottom.
    const double y = kMarginTop + plot_h - (i + 1) * cell_h;
    for (int j = 0; j < grid.nlon; ++j) {
      const double v = values[grid.point(i, j)];
      std::string fill;
      if (std::isfinite(v)) {
        fill = color_scale((v + limit) / (2.0 * limit));
      } else {
        fill = "#bbbbbb";
      }
      out << "<rect x=\"" << num(kMarginLeft + j * cell_w) << "\" y=\""
          << num(y) << "\" width=\"" << num(cell_w + 0.5) << "\" height=\""
          << num(cell_h + 0.5) << "\" fill=\"" << fill << "\"/>\n";
    }
  }
  out << "<rect x=\"" << kMarginLeft << "\" y=\"" << kMarginTop << "\" width=\""
      << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"#444444\"/>\n";
  out << "<text x=\"" << kMarginLeft << "\" y=\"" << kHeight - 12
      << "\" font-family=\"sans-serif\" font-size=\"11\">scale -"
      << num(limit) << " .. +" << num(limit) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace subcast::svg
