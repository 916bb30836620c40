#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "qfe/error.hpp"
#include "qfe/matrix.hpp"

namespace qfe::svg {

namespace detail {

inline void fmt(std::string& out, double v, int precision = 2) {
    if (!std::isfinite(v)) {
        out += "0";
        return;
    }
    char buf[48];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    out.append(buf, res.ptr);
}

inline void fmt_tick(std::string& out, double v) {
    if (!std::isfinite(v)) {
        out += "nan";
        return;
    }
    char buf[48];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 4);
    out.append(buf, res.ptr);
}

inline std::string escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr int kWidth = 640, kHeight = 400;
constexpr int kLeft = 64, kRight = 24, kTop = 36, kBottom = 48;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

inline std::string header(const std::string& title) {
    std::string out =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
        "viewBox=\"0 0 640 400\" font-family=\"sans-serif\">\n";
    out += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    if (!title.empty())
        out += "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
               escape(title) + "</text>\n";
    return out;
}

struct Range {
    double lo = 0.0, hi = 1.0;
    void expand(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finalize() {
        if (lo > hi) {
            lo = 0.0;
            hi = 1.0;
        }
        if (lo == hi) {
            lo -= 1.0;
            hi += 1.0;
        }
    }
};

inline void axes(std::string& out, const Range& xr, const Range& yr, const std::string& x_label,
                 const std::string& y_label) {
    out += "<g stroke=\"black\" stroke-width=\"1\">";
    out += "<line x1=\"64\" y1=\"352\" x2=\"616\" y2=\"352\"/>";
    out += "<line x1=\"64\" y1=\"36\" x2=\"64\" y2=\"352\"/></g>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = static_cast<double>(i) / 4.0;
        const double px = kLeft + fx * (kWidth - kLeft - kRight);
        const double py = kHeight - kBottom - fx * (kHeight - kTop - kBottom);
        out += "<text text-anchor=\"middle\" font-size=\"10\" x=\"";
        fmt(out, px);
        out += "\" y=\"368\">";
        fmt_tick(out, xr.lo + fx * (xr.hi - xr.lo));
        out += "</text>\n<text text-anchor=\"end\" font-size=\"10\" x=\"58\" y=\"";
        fmt(out, py + 3);
        out += "\">";
        fmt_tick(out, yr.lo + fx * (yr.hi - yr.lo));
        out += "</text>\n";
    }
    if (!x_label.empty())
        out += "<text x=\"340\" y=\"392\" text-anchor=\"middle\" font-size=\"12\">" +
               escape(x_label) + "</text>\n";
    if (!y_label.empty())
        out += "<text x=\"16\" y=\"194\" text-anchor=\"middle\" font-size=\"12\" "
               "transform=\"rotate(-90 16 194)\">" +
               escape(y_label) + "</text>\n";
}

}  // namespace detail

struct Series {
    std::string name;
    std::vector<double> x;  // empty means 0..n-1
    std::vector<double> y;
    bool fill = false;  // area fill down to the x axis (distribution curves)
};

// Standalone line chart; one polyline per series, legend on top.
[[nodiscard]] inline std::string line_chart(const std::vector<Series>& series,
                                            const std::string& title = {},
                                            const std::string& x_label = {},
                                            const std::string& y_label = {}) {
    if (series.empty()) throw Error(errc::domain, "no series to plot");
    detail::Range xr{std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity()};
    detail::Range yr = xr;
    for (const Series& s : series) {
        if (s.y.empty()) throw Error(errc::domain, "empty series '" + s.name + "'");
        if (!s.x.empty() && s.x.size() != s.y.size())
            throw Error(errc::shape, "x/y length mismatch in series '" + s.name + "'");
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            xr.expand(s.x.empty() ? static_cast<double>(i) : s.x[i]);
            yr.expand(s.y[i]);
        }
    }
    xr.finalize();
    yr.finalize();

    std::string out = detail::header(title);
    detail::axes(out, xr, yr, x_label, y_label);

    auto px = [&](double v) {
        return detail::kLeft + (v - xr.lo) / (xr.hi - xr.lo) *
                                   (detail::kWidth - detail::kLeft - detail::kRight);
    };
    auto py = [&](double v) {
        return detail::kHeight - detail::kBottom -
               (v - yr.lo) / (yr.hi - yr.lo) * (detail::kHeight - detail::kTop - detail::kBottom);
    };

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = detail::kPalette[si % 8];
        std::string points;
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            const double xv = s.x.empty() ? static_cast<double>(i) : s.x[i];
            if (!points.empty()) points += ' ';
            detail::fmt(points, px(xv));
            points += ',';
            detail::fmt(points, py(s.y[i]));
        }
        if (points.empty()) throw Error(errc::domain, "series '" + s.name + "' has no finite points");
        if (s.fill) {
            std::string area = points;
            area += ' ';
            detail::fmt(area, px(s.x.empty() ? static_cast<double>(s.y.size() - 1) : s.x.back()));
            area += ',';
            detail::fmt(area, py(yr.lo));
            area += ' ';
            detail::fmt(area, px(s.x.empty() ? 0.0 : s.x.front()));
            area += ',';
            detail::fmt(area, py(yr.lo));
            out += "<polygon points=\"" + area + "\" fill=\"" + color +
                   "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
        }
        out += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        if (!s.name.empty()) {
            const double lx = detail::kLeft + 8.0 + 120.0 * static_cast<double>(si % 4);
            const double ly = detail::kTop + 12.0 + 14.0 * static_cast<double>(si / 4);
            out += "<rect x=\"";
            detail::fmt(out, lx);
            out += "\" y=\"";
            detail::fmt(out, ly - 8);
            out += "\" width=\"10\" height=\"10\" fill=\"" + std::string(color) + "\"/>";
            out += "<text font-size=\"10\" x=\"";
            detail::fmt(out, lx + 14);
            out += "\" y=\"";
            detail::fmt(out, ly);
            out += "\">" + detail::escape(s.name) + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

// Matrix heatmap with one rect per cell (class "cell"), values overlaid for
// small matrices, NaN cells in gray.
[[nodiscard]] inline std::string heatmap(const Matrix& m, const std::vector<std::string>& labels,
                                         const std::string& title = {}) {
    if (m.rows() == 0 || m.cols() == 0) throw Error(errc::domain, "empty matrix");
    if (!labels.empty() && (labels.size() != m.rows() || labels.size() != m.cols()))
        throw Error(errc::shape, "label count does not match the matrix");

    detail::Range vr{std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) vr.expand(m(i, j));
    vr.finalize();

    const double plot_w = detail::kWidth - detail::kLeft - detail::kRight;
    const double plot_h = detail::kHeight - detail::kTop - detail::kBottom;
    const double cw = plot_w / static_cast<double>(m.cols());
    const double ch = plot_h / static_cast<double>(m.rows());

    std::string out = detail::header(title);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            std::string color = "#cccccc";
            if (std::isfinite(v)) {
                const double t = (v - vr.lo) / (vr.hi - vr.lo);
                // viridis endpoints, linear blend
                const int r = static_cast<int>(std::lround(68.0 + t * (253.0 - 68.0)));
                const int g = static_cast<int>(std::lround(1.0 + t * (231.0 - 1.0)));
                const int b = static_cast<int>(std::lround(84.0 + t * (37.0 - 84.0)));
                char buf[8];
                std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
                color = buf;
            }
            const double x = detail::kLeft + cw * static_cast<double>(j);
            const double y = detail::kTop + ch * static_cast<double>(i);
            out += "<rect class=\"cell\" x=\"";
            detail::fmt(out, x);
            out += "\" y=\"";
            detail::fmt(out, y);
            out += "\" width=\"";
            detail::fmt(out, cw);
            out += "\" height=\"";
            detail::fmt(out, ch);
            out += "\" fill=\"" + color + "\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
            if (m.rows() <= 14 && m.cols() <= 14) {
                out += "<text font-size=\"9\" text-anchor=\"middle\" x=\"";
                detail::fmt(out, x + cw / 2);
                out += "\" y=\"";
                detail::fmt(out, y + ch / 2 + 3);
                out += "\">";
                if (std::isfinite(v))
                    detail::fmt(out, v);
                else
                    out += "n/a";
                out += "</text>\n";
            }
        }
    }
    if (!labels.empty() && m.rows() <= 24) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            out += "<text font-size=\"9\" text-anchor=\"end\" x=\"60\" y=\"";
            detail::fmt(out, detail::kTop + ch * (static_cast<double>(i) + 0.5) + 3);
            out += "\">" + detail::escape(labels[i]) + "</text>\n";
            out += "<text font-size=\"9\" text-anchor=\"middle\" x=\"";
            detail::fmt(out, detail::kLeft + cw * (static_cast<double>(i) + 0.5));
            out += "\" y=\"366\">" + detail::escape(labels[i]) + "</text>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

// Density curves rendered as filled line series.
[[nodiscard]] inline std::string kde_chart(const std::vector<Series>& curves,
                                           const std::string& title = {},
                                           const std::string& x_label = {}) {
    std::vector<Series> filled = curves;
    for (Series& s : filled) s.fill = true;
    return line_chart(filled, title, x_label, "density");
}

}  // namespace qfe::svg
