#include "optrank/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace optrank {

namespace {

constexpr Scalar kLogLo = -10, kLogHi = 1;

struct Rgb {
  int r, g, b;
};

// blue -> pale yellow -> red, high error to near zero
constexpr Rgb kStops[5] = {{49, 54, 149}, {116, 173, 209}, {255, 255, 191},
                           {244, 109, 67}, {165, 0, 38}};

Rgb colormap(Scalar t) {
  t = std::clamp(t, 0.0, 1.0);
  const Scalar x = t * 4;
  const int i = std::min(3, static_cast<int>(x));
  const Scalar f = x - i;
  auto mix = [&](int a, int b) { return static_cast<int>(std::lround(a + f * (b - a))); };
  return {mix(kStops[i].r, kStops[i + 1].r), mix(kStops[i].g, kStops[i + 1].g),
          mix(kStops[i].b, kStops[i + 1].b)};
}

std::string color_of(Scalar mean_mse) {
  Scalar v = std::log10(std::max(mean_mse, 1e-300));
  if (!std::isfinite(v)) v = kLogHi;  // NaN / inf render as the worst color
  v = std::clamp(v, kLogLo, kLogHi);
  const Rgb c = colormap((kLogHi - v) / (kLogHi - kLogLo));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::string render_heatmap_svg(const SweepGrid& grid) {
  if (grid.row_count() == 0 || grid.n_count() == 0)
    throw RuntimeFailure("empty grid, nothing to plot");
  const int cw = 24, ch = 22;
  const int left = 120, top = 34, bottom = 42, right = 96;
  const int R = static_cast<int>(grid.row_count()), N = static_cast<int>(grid.n_count());
  const int width = left + cw * N + right, height = top + ch * R + bottom;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<text x=\"" << left << "\" y=\"16\" font-size=\"13\">" << escape_xml(grid.spec.name)
      << ": mean test error over " << grid.spec.trials << " trials</text>\n";

  for (int r = 0; r < R; ++r) {
    for (int ni = 0; ni < N; ++ni) {
      const Scalar v = grid.mean_test_error(r, ni);
      svg << "<rect x=\"" << left + ni * cw << "\" y=\"" << top + r * ch << "\" width=\"" << cw
          << "\" height=\"" << ch << "\" fill=\"" << color_of(v) << "\">"
          << "<title>n=" << grid.spec.sample_sizes[static_cast<std::size_t>(ni)] << " mean=" << v
          << "</title></rect>\n";
    }
    svg << "<text x=\"" << left - 6 << "\" y=\"" << top + r * ch + ch / 2 + 4
        << "\" text-anchor=\"end\">" << escape_xml(grid.rows[static_cast<std::size_t>(r)].label)
        << "</text>\n";
    // dashed marker at the left edge of the optimistic column
    const auto& opt = grid.rows[static_cast<std::size_t>(r)].optimistic;
    if (opt) {
      const auto& ns = grid.spec.sample_sizes;
      const auto it = std::find(ns.begin(), ns.end(), *opt);
      if (it != ns.end()) {
        const int x = left + static_cast<int>(it - ns.begin()) * cw;
        svg << "<line x1=\"" << x << "\" y1=\"" << top + r * ch << "\" x2=\"" << x << "\" y2=\""
            << top + (r + 1) * ch
            << "\" stroke=\"#ffd700\" stroke-width=\"2.5\" stroke-dasharray=\"4,3\"/>\n";
      }
    }
  }

  const int label_step = N > 24 ? ((N + 15) / 16) : 1;
  for (int ni = 0; ni < N; ni += label_step)
    svg << "<text x=\"" << left + ni * cw + cw / 2 << "\" y=\"" << top + R * ch + 14
        << "\" text-anchor=\"middle\">" << grid.spec.sample_sizes[static_cast<std::size_t>(ni)]
        << "</text>\n";
  svg << "<text x=\"" << left + N * cw / 2 << "\" y=\"" << top + R * ch + 32
      << "\" text-anchor=\"middle\">training samples</text>\n";

  // legend: log10 scale from 1e1 down to 1e-10
  const int lx = left + N * cw + 28, lh = std::max(ch * R, 120);
  for (int i = 0; i < lh; ++i) {
    const Scalar t = 1.0 - static_cast<Scalar>(i) / (lh - 1);
    const Rgb c = colormap(1 - t);  // top = high error
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    svg << "<rect x=\"" << lx << "\" y=\"" << top + i << "\" width=\"14\" height=\"1.5\" fill=\""
        << buf << "\"/>\n";
  }
  for (Scalar e : {1.0, -2.0, -5.0, -8.0, -10.0}) {
    const int y = top + static_cast<int>((kLogHi - e) / (kLogHi - kLogLo) * (lh - 1));
    svg << "<text x=\"" << lx + 18 << "\" y=\"" << y + 4 << "\">1e" << static_cast<int>(e)
        << "</text>\n";
  }
  svg << "<text x=\"" << lx << "\" y=\"" << top - 6 << "\" font-size=\"10\">log10 MSE</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string format_transition_table(const TransitionReport& report) {
  std::ostringstream out;
  std::size_t w = 8;
  for (const auto& row : report.rows) w = std::max(w, row.label.size());
  out << "  " << std::string(w, ' ') << "  optimistic  empirical  gap\n";
  char buf[128];
  for (const auto& row : report.rows) {
    auto cell = [](const std::optional<int>& v) {
      return v ? std::to_string(*v) : std::string("-");
    };
    std::snprintf(buf, sizeof buf, "  %-*s  %10s  %9s  %3s\n", static_cast<int>(w),
                  row.label.c_str(), cell(row.optimistic_n).c_str(), cell(row.empirical_n).c_str(),
                  cell(row.gap).c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace optrank
