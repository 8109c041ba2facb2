#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "epimob/serialize.hpp"

namespace epimob::svg {

/// Minimal direct-to-SVG chart emitters for the report stage. Diagnostic
/// quality only: axes, polylines, points and cells, no styling machinery.

struct Line {
    std::string label;
    std::string color;
    std::vector<double> xs;
    std::vector<double> ys;  // NaN breaks the polyline
};

namespace detail {

constexpr double width = 720, height = 420;
constexpr double ml = 60, mr = 20, mt = 30, mb = 40;  // margins

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Scale {
    double lo = 0, hi = 1, out_lo = 0, out_hi = 1;
    double operator()(double v) const {
        return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
    }
};

inline void expand(double v, double& lo, double& hi) {
    if (std::isnan(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
}

inline void open_chart(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << "</text>\n";
}

inline void axes(std::ostringstream& out, const Scale& sx, const Scale& sy) {
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double fx = sx.lo + i * (sx.hi - sx.lo) / 4;
        double fy = sy.lo + i * (sy.hi - sy.lo) / 4;
        out << "<text x=\"" << num(sx(fx)) << "\" y=\"" << height - mb + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << num(fx)
            << "</text>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << num(sy(fy) + 3)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(fy)
            << "</text>\n";
    }
}

inline void polyline(std::ostringstream& out, const Line& ln, const Scale& sx, const Scale& sy) {
    std::string points;
    auto flush = [&]() {
        if (!points.empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << ln.color
                << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
            points.clear();
        }
    };
    for (std::size_t i = 0; i < ln.xs.size(); ++i) {
        if (std::isnan(ln.ys[i])) {
            flush();
            continue;
        }
        points += num(sx(ln.xs[i])) + "," + num(sy(ln.ys[i])) + " ";
    }
    flush();
}

}  // namespace detail

/// Multi-series line chart over a shared x axis.
inline std::string line_chart(const std::string& title, const std::vector<Line>& lines) {
    using namespace detail;
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (const Line& ln : lines)
        for (std::size_t i = 0; i < ln.xs.size(); ++i) {
            expand(ln.xs[i], xlo, xhi);
            expand(ln.ys[i], ylo, yhi);
        }
    if (!(xlo < xhi)) xhi = xlo + 1;
    if (!(ylo < yhi)) yhi = ylo + 1;
    Scale sx{xlo, xhi, ml, width - mr};
    Scale sy{ylo, yhi, height - mb, mt};
    std::ostringstream out;
    open_chart(out, title);
    axes(out, sx, sy);
    double ly = mt + 12;
    for (const Line& ln : lines) {
        polyline(out, ln, sx, sy);
        out << "<text x=\"" << width - mr - 4 << "\" y=\"" << ly
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
            << ln.color << "\">" << ln.label << "</text>\n";
        ly += 14;
    }
    out << "</svg>\n";
    return out.str();
}

/// Scatter plot with an optional fitted line.
inline std::string scatter_chart(const std::string& title, const std::vector<double>& xs,
                                 const std::vector<double>& ys, double slope, double intercept,
                                 bool with_fit) {
    using namespace detail;
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        expand(xs[i], xlo, xhi);
        expand(ys[i], ylo, yhi);
    }
    if (!(xlo < xhi)) xhi = xlo + 1;
    if (!(ylo < yhi)) yhi = ylo + 1;
    Scale sx{xlo, xhi, ml, width - mr};
    Scale sy{ylo, yhi, height - mb, mt};
    std::ostringstream out;
    open_chart(out, title);
    axes(out, sx, sy);
    for (std::size_t i = 0; i < xs.size(); ++i)
        out << "<circle cx=\"" << num(sx(xs[i])) << "\" cy=\"" << num(sy(ys[i]))
            << "\" r=\"3\" fill=\"steelblue\"/>\n";
    if (with_fit)
        out << "<line x1=\"" << num(sx(xlo)) << "\" y1=\"" << num(sy(intercept + slope * xlo))
            << "\" x2=\"" << num(sx(xhi)) << "\" y2=\"" << num(sy(intercept + slope * xhi))
            << "\" stroke=\"firebrick\" stroke-width=\"1.5\"/>\n";
    out << "</svg>\n";
    return out.str();
}

/// Heatmap of a value grid (row index = s, column index = t), blue-white-red.
inline std::string heatmap_chart(const std::string& title, const std::vector<double>& svals,
                                 const std::vector<double>& tvals,
                                 const std::vector<std::vector<double>>& z) {
    using namespace detail;
    double zmax = 0;
    for (const auto& row : z)
        for (double v : row) zmax = std::max(zmax, std::abs(v));
    if (zmax == 0) zmax = 1;
    Scale sx{svals.front(), svals.back(), ml, width - mr};
    Scale sy{tvals.front(), tvals.back(), height - mb, mt};
    double cw = (width - ml - mr) / svals.size();
    double ch = (height - mt - mb) / tvals.size();
    std::ostringstream out;
    open_chart(out, title);
    for (std::size_t i = 0; i < svals.size(); ++i)
        for (std::size_t j = 0; j < tvals.size(); ++j) {
            double f = z[i][j] / zmax;  // [-1, 1]
            int r = static_cast<int>(255 * std::min(1.0, 1.0 + f));
            int b = static_cast<int>(255 * std::min(1.0, 1.0 - f));
            int g = static_cast<int>(255 * (1.0 - std::abs(f)));
            out << "<rect x=\"" << num(sx(svals[i]) - cw / 2) << "\" y=\""
                << num(sy(tvals[j]) - ch / 2) << "\" width=\"" << num(cw + 0.5) << "\" height=\""
                << num(ch + 0.5) << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\"/>\n";
        }
    axes(out, sx, sy);
    out << "</svg>\n";
    return out.str();
}

/// Curve with a shaded confidence band.
inline std::string band_chart(const std::string& title, const std::vector<double>& xs,
                              const std::vector<double>& mid, const std::vector<double>& lo,
                              const std::vector<double>& hi) {
    using namespace detail;
    double xlo = xs.front(), xhi = xs.back();
    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        expand(lo[i], ylo, yhi);
        expand(hi[i], ylo, yhi);
    }
    expand(0.0, ylo, yhi);  // keep the zero line visible
    if (!(ylo < yhi)) yhi = ylo + 1;
    Scale sx{xlo, xhi, ml, width - mr};
    Scale sy{ylo, yhi, height - mb, mt};
    std::ostringstream out;
    open_chart(out, title);
    std::string poly;
    for (std::size_t i = 0; i < xs.size(); ++i)
        poly += num(sx(xs[i])) + "," + num(sy(hi[i])) + " ";
    for (std::size_t i = xs.size(); i-- > 0;)
        poly += num(sx(xs[i])) + "," + num(sy(lo[i])) + " ";
    out << "<polygon fill=\"lightsteelblue\" fill-opacity=\"0.6\" points=\"" << poly << "\"/>\n";
    Line mid_line{"estimate", "navy", xs, mid};
    polyline(out, mid_line, sx, sy);
    out << "<line x1=\"" << ml << "\" y1=\"" << num(sy(0.0)) << "\" x2=\"" << width - mr
        << "\" y2=\"" << num(sy(0.0)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    axes(out, sx, sy);
    out << "</svg>\n";
    return out.str();
}

}  // namespace epimob::svg
