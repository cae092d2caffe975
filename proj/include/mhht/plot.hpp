#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace mhht {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    double width = 640.0;
    double height = 400.0;
};

namespace plot_detail {

// Fixed two-decimal output keeps the file byte-stable across runs.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", std::abs(v) < 0.005 ? 0.0 : v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

inline std::string escape(std::string const& s) {
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

inline char const* colour(std::size_t i) {
    static char const* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return palette[i % 6];
}

}  // namespace plot_detail

/// Minimal SVG line chart with axes, five ticks per axis and a legend.
inline void write_svg(std::ostream& os, LinePlot const& p) {
    using namespace plot_detail;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (auto const& s : p.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
    if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;

    double const left = 70.0, right = 20.0, top = 40.0, bottom = 50.0;
    double const pw = p.width - left - right, ph = p.height - top - bottom;
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(p.width) << "\" height=\"" << fmt(p.height)
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(p.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(p.title)
       << "</text>\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
       << fmt(top + ph) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(top + ph)
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
        os << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << fmt(top + ph + 16) << "\" text-anchor=\"middle\">" << tick(xv)
           << "</text>\n";
        os << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(sy(yv) + 4) << "\" text-anchor=\"end\">" << tick(yv)
           << "</text>\n";
    }
    os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(p.height - 10) << "\" text-anchor=\"middle\">"
       << escape(p.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(p.y_label) << "</text>\n";
    for (std::size_t k = 0; k < p.series.size(); ++k) {
        auto const& s = p.series[k];
        os << "<polyline fill=\"none\" stroke=\"" << colour(k) << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            os << (first ? "" : " ") << fmt(sx(s.x[i])) << ',' << fmt(sy(s.y[i]));
            first = false;
        }
        os << "\"/>\n";
        double ly = top + 14.0 * static_cast<double>(k) + 6.0;
        os << "<line x1=\"" << fmt(left + pw - 110) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(left + pw - 90)
           << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << colour(k) << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fmt(left + pw - 85) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace mhht
