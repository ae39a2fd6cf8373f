#include "varibad/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace varibad::plot {

namespace {

constexpr double kW = 760.0, kH = 480.0;
constexpr double kLeft = 70.0, kRight = 170.0, kTop = 44.0, kBottom = 52.0;

std::string esc(const std::string& s) {
    std::string out;
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

std::string fmt(double x) {
    std::ostringstream os;
    double ax = std::fabs(x);
    if (x != 0.0 && (ax >= 1e5 || ax < 1e-3)) {
        os.precision(2);
        os << std::scientific << x;
    } else {
        os.precision(4);
        os << x;
    }
    return os.str();
}

struct Scale {
    double lo, hi, a, b;  // screen = a*value + b
    double operator()(double v) const { return a * v + b; }
};

Scale make_scale(double lo, double hi, double s0, double s1) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    double a = (s1 - s0) / (hi - lo);
    return {lo, hi, a, s0 - a * lo};
}

// "Nice" tick spacing: 1/2/5 times a power of ten covering ~5 intervals.
std::vector<double> ticks(double lo, double hi) {
    double span = hi - lo;
    double raw = span / 5.0;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double norm = raw / mag;
    double step = (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0) * mag;
    std::vector<double> out;
    double t = std::ceil(lo / step) * step;
    for (; t <= hi + 1e-9 * span; t += step) out.push_back(std::fabs(t) < 1e-12 * span ? 0.0 : t);
    return out;
}

void open_svg(std::ostream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n"
        << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\""
        << " text-anchor=\"middle\">" << esc(title) << "</text>\n";
}

void axes(std::ostream& out, const Scale& sx, const Scale& sy, const std::string& xlabel,
          const std::string& ylabel, bool x_ticks = true) {
    double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (double t : ticks(sy.lo, sy.hi)) {
        double yy = sy(t);
        out << "<line x1=\"" << x0 << "\" y1=\"" << yy << "\" x2=\"" << x1 << "\" y2=\"" << yy
            << "\" stroke=\"#e0e0e0\"/>\n"
            << "<text x=\"" << x0 - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">" << fmt(t)
            << "</text>\n";
    }
    if (x_ticks) {
        for (double t : ticks(sx.lo, sx.hi)) {
            double xx = sx(t);
            out << "<line x1=\"" << xx << "\" y1=\"" << y0 << "\" x2=\"" << xx << "\" y2=\"" << y0 + 4
                << "\" stroke=\"#333\"/>\n"
                << "<text x=\"" << xx << "\" y=\"" << y0 + 17 << "\" text-anchor=\"middle\">" << fmt(t)
                << "</text>\n";
        }
    }
    out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"#333\"/>\n"
        << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"#333\"/>\n"
        << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kH - 14 << "\" text-anchor=\"middle\">"
        << esc(xlabel) << "</text>\n"
        << "<text x=\"18\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << (y0 + y1) / 2 << ")\">" << esc(ylabel) << "</text>\n</g>\n";
}

void legend_entry(std::ostream& out, int idx, const std::string& color, bool dashed,
                  const std::string& label) {
    double lx = kW - kRight + 14, ly = kTop + 12 + 18.0 * idx;
    out << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 24 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n"
        << "<text x=\"" << lx + 30 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << esc(label) << "</text>\n";
}

void draw_hlines(std::ostream& out, const Scale& sy, const std::vector<HLine>& hlines, int legend_start) {
    int li = legend_start;
    for (const auto& h : hlines) {
        if (h.y < sy.lo || h.y > sy.hi) continue;
        double yy = sy(h.y);
        out << "<line x1=\"" << kLeft << "\" y1=\"" << yy << "\" x2=\"" << kW - kRight << "\" y2=\"" << yy
            << "\" stroke=\"" << h.color << "\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
        if (!h.label.empty()) legend_entry(out, li++, h.color, true, h.label);
    }
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series,
                      const std::vector<HLine>& hlines) {
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    for (const auto& s : series) {
        for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
        for (double v : s.y) ylo = std::min(ylo, v), yhi = std::max(yhi, v);
        for (double v : s.band_lo) ylo = std::min(ylo, v);
        for (double v : s.band_hi) yhi = std::max(yhi, v);
    }
    for (const auto& h : hlines) ylo = std::min(ylo, h.y), yhi = std::max(yhi, h.y);
    if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    double pad = 0.06 * (yhi - ylo + 1e-12);
    Scale sx = make_scale(xlo, xhi, kLeft, kW - kRight);
    Scale sy = make_scale(ylo - pad, yhi + pad, kH - kBottom, kTop);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("plot: cannot open " + path);
    open_svg(out, title);
    axes(out, sx, sy, xlabel, ylabel);
    int li = 0;
    for (const auto& s : series) {
        if (s.band_lo.size() == s.x.size() && s.band_hi.size() == s.x.size() && !s.x.empty()) {
            out << "<path fill=\"" << s.color << "\" fill-opacity=\"0.15\" stroke=\"none\" d=\"M";
            for (size_t i = 0; i < s.x.size(); ++i)
                out << ' ' << sx(s.x[i]) << ' ' << sy(s.band_hi[i]) << (i + 1 < s.x.size() ? " L" : "");
            for (size_t i = s.x.size(); i-- > 0;) out << " L " << sx(s.x[i]) << ' ' << sy(s.band_lo[i]);
            out << " Z\"/>\n";
        }
        if (!s.x.empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\""
                << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << " points=\"";
            for (size_t i = 0; i < s.x.size(); ++i) out << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
            out << "\"/>\n";
        }
        legend_entry(out, li++, s.color, s.dashed, s.label);
    }
    draw_hlines(out, sy, hlines, li);
    out << "</svg>\n";
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& categories, const std::vector<BarSeries>& bars,
                     const std::string& ylabel, const std::vector<HLine>& hlines) {
    size_t ncat = categories.size(), nser = bars.size();
    double ylo = 0.0, yhi = 0.0;
    for (const auto& b : bars)
        for (size_t i = 0; i < b.values.size(); ++i) {
            double e = i < b.errs.size() ? b.errs[i] : 0.0;
            ylo = std::min(ylo, b.values[i] - e);
            yhi = std::max(yhi, b.values[i] + e);
        }
    for (const auto& h : hlines) ylo = std::min(ylo, h.y), yhi = std::max(yhi, h.y);
    double pad = 0.08 * (yhi - ylo + 1e-12);
    Scale sy = make_scale(ylo - (ylo < 0 ? pad : 0), yhi + pad, kH - kBottom, kTop);
    double plot_w = kW - kLeft - kRight;
    double group_w = plot_w / std::max<size_t>(ncat, 1);
    double bar_w = 0.8 * group_w / std::max<size_t>(nser, 1);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("plot: cannot open " + path);
    open_svg(out, title);
    Scale sx = make_scale(0, static_cast<double>(ncat), kLeft, kW - kRight);
    axes(out, sx, sy, "", ylabel, /*x_ticks=*/false);
    double y_base = sy(std::max(0.0, sy.lo));
    for (size_t ci = 0; ci < ncat; ++ci) {
        double gx = kLeft + group_w * (static_cast<double>(ci) + 0.1);
        for (size_t si = 0; si < nser; ++si) {
            if (ci >= bars[si].values.size()) continue;
            double v = bars[si].values[ci];
            double x = gx + bar_w * static_cast<double>(si);
            double yv = sy(v);
            out << "<rect x=\"" << x << "\" y=\"" << std::min(yv, y_base) << "\" width=\"" << bar_w * 0.92
                << "\" height=\"" << std::fabs(y_base - yv) << "\" fill=\"" << bars[si].color << "\"/>\n";
            if (ci < bars[si].errs.size() && bars[si].errs[ci] > 0) {
                double cx = x + bar_w * 0.46;
                out << "<line x1=\"" << cx << "\" y1=\"" << sy(v - bars[si].errs[ci]) << "\" x2=\"" << cx
                    << "\" y2=\"" << sy(v + bars[si].errs[ci]) << "\" stroke=\"#222\" stroke-width=\"1.5\"/>\n";
            }
        }
        out << "<text x=\"" << kLeft + group_w * (static_cast<double>(ci) + 0.5) << "\" y=\""
            << kH - kBottom + 17 << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << esc(categories[ci]) << "</text>\n";
    }
    int li = 0;
    for (const auto& b : bars) legend_entry(out, li++, b.color, false, b.label);
    draw_hlines(out, sy, hlines, li);
    out << "</svg>\n";
}

void write_grid_heatmap(const std::string& path, const std::string& title, int width, int height,
                        const std::vector<double>& cell_values, const std::vector<int>& path_cells,
                        int start_cell, int goal_cell) {
    if (static_cast<int>(cell_values.size()) != width * height)
        throw std::invalid_argument("heatmap: cell_values size mismatch");
    double cell = std::min((kW - kLeft - kRight) / width, (kH - kTop - kBottom) / height);
    double x0 = kLeft, y0 = kTop + 10;
    // y=0 is the bottom row, so row y draws at the bottom of the panel.
    auto cx = [&](int c) { return x0 + (c % width + 0.5) * cell; };
    auto cy = [&](int c) { return y0 + (height - 1 - c / width + 0.5) * cell; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("plot: cannot open " + path);
    open_svg(out, title);
    for (int c = 0; c < width * height; ++c) {
        double v = std::clamp(cell_values[c], 0.0, 1.0);
        int r = static_cast<int>(255 * (1 - v) + 40 * v);
        int g = static_cast<int>(255 * (1 - v) + 70 * v);
        int b = static_cast<int>(255 * (1 - v) + 160 * v);
        out << "<rect x=\"" << cx(c) - cell / 2 << "\" y=\"" << cy(c) - cell / 2 << "\" width=\"" << cell
            << "\" height=\"" << cell << "\" fill=\"rgb(" << r << ',' << g << ',' << b
            << ")\" stroke=\"#999\"/>\n";
        out << "<text x=\"" << cx(c) << "\" y=\"" << cy(c) + 4
            << "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\" fill=\"#555\">"
            << fmt(cell_values[c]) << "</text>\n";
    }
    if (!path_cells.empty()) {
        out << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2.5\" stroke-opacity=\"0.8\" "
               "points=\"";
        for (int c : path_cells) out << cx(c) << ',' << cy(c) << ' ';
        out << "\"/>\n";
    }
    if (start_cell >= 0)
        out << "<circle cx=\"" << cx(start_cell) << "\" cy=\"" << cy(start_cell)
            << "\" r=\"6\" fill=\"#2ca02c\"/>\n";
    if (goal_cell >= 0)
        out << "<circle cx=\"" << cx(goal_cell) << "\" cy=\"" << cy(goal_cell)
            << "\" r=\"6\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"3\"/>\n";
    out << "</svg>\n";
}

}  // namespace varibad::plot
