#include "qgain/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace qgain {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr std::array<const char*, 8> kColors = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) {
    std::ostringstream ss;
    ss.imbue(std::locale::classic());
    ss.precision(5);
    ss << v;
    return ss.str();
}

struct Axis {
    bool log = false;
    double lo = 0.0, hi = 1.0;

    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
    double t(double v) const { return log ? std::log10(v) : v; }
    double frac(double v) const { return hi > lo ? (t(v) - lo) / (hi - lo) : 0.5; }
};

Axis make_axis(bool log, const std::vector<PlotSeries>& series, bool use_x) {
    Axis a;
    a.log = log;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : series) {
        const auto& v = use_x ? s.x : s.y;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!a.usable(s.x[i]) && use_x) continue;
            if (!a.usable(v[i])) continue;
            lo = std::min(lo, a.t(v[i]));
            hi = std::max(hi, a.t(v[i]));
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    if (!log) {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

} // namespace

std::string line_plot_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    const Axis ax = make_axis(spec.log_x, series, true);
    const Axis ay = make_axis(spec.log_y, series, false);
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + ax.frac(x) * pw; };
    auto py = [&](double y) { return kTop + (1.0 - ay.frac(y)) * ph; };

    std::ostringstream o;
    o.imbue(std::locale::classic());
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << esc(spec.title) << "</text>\n";
    o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int k = 0; k <= 4; ++k) {
        const double fx = k / 4.0;
        const double xv = ax.lo + fx * (ax.hi - ax.lo);
        const double X = kLeft + fx * pw;
        o << "<line x1=\"" << X << "\" y1=\"" << kTop + ph << "\" x2=\"" << X << "\" y2=\"" << kTop + ph + 5
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << X << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
          << num(ax.log ? std::pow(10.0, xv) : xv) << "</text>\n";
        const double yv = ay.lo + fx * (ay.hi - ay.lo);
        const double Y = kTop + (1.0 - fx) * ph;
        o << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << Y << "\" x2=\"" << kLeft << "\" y2=\"" << Y
          << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << kLeft - 8 << "\" y=\"" << Y + 4 << "\" text-anchor=\"end\">"
          << num(ay.log ? std::pow(10.0, yv) : yv) << "</text>\n";
    }
    o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">"
      << esc(spec.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << esc(spec.y_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % kColors.size()];
        std::string path;
        bool pen = false;
        const auto& S = series[s];
        for (std::size_t i = 0; i < std::min(S.x.size(), S.y.size()); ++i) {
            if (!ax.usable(S.x[i]) || !ay.usable(S.y[i])) {
                pen = false;
                continue;
            }
            path += (pen ? " L" : " M") + num(px(S.x[i])) + " " + num(py(S.y[i]));
            pen = true;
        }
        if (!path.empty()) {
            o << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << color
              << "\" stroke-width=\"1.5\"/>\n";
        }
        const double ly = kTop + 10 + 18.0 * static_cast<double>(s);
        o << "<line x1=\"" << kLeft + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 30
          << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << kLeft + pw + 35 << "\" y=\"" << ly + 4 << "\">" << esc(S.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

} // namespace qgain
