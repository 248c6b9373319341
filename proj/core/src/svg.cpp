#include "scarcegrad/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "scarcegrad/errors.hpp"

namespace scarcegrad {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void include(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    bool empty() const { return !(lo <= hi); }
    void pad() {
        if (empty()) {
            lo = 0.0;
            hi = 1.0;
        } else if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

void write_svg_plot(const std::filesystem::path& path, const SvgPlotSpec& spec) {
    Range xr, yr;
    for (const auto& s : spec.series) {
        if (s.x.size() != s.y.size())
            throw ContractError("write_svg_plot: series x/y size mismatch");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double y = s.y[i];
            if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
            if (spec.log_y && y <= 0.0) continue;
            xr.include(s.x[i]);
            yr.include(spec.log_y ? std::log10(y) : y);
        }
    }
    xr.pad();
    yr.pad();

    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    const double plot_h = kHeight - kMarginTop - kMarginBottom;
    auto sx = [&](double x) { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * plot_w; };
    auto sy = [&](double y) {
        const double v = spec.log_y ? std::log10(y) : y;
        return kMarginTop + (yr.hi - v) / (yr.hi - yr.lo) * plot_h;
    };

    std::ofstream out(path);
    if (!out) throw ParseError("write_svg_plot: cannot open " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << spec.title << "</text>\n";

    // axes
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kMarginTop + plot_h << "\" stroke=\"black\"/>\n";

    const int ticks = 5;
    for (int t = 0; t <= ticks; ++t) {
        const double fx = xr.lo + (xr.hi - xr.lo) * t / ticks;
        const double px = sx(fx);
        out << "<line x1=\"" << px << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\"" << px
            << "\" y2=\"" << kMarginTop + plot_h + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px << "\" y=\"" << kMarginTop + plot_h + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt(fx) << "</text>\n";
        const double fy = yr.lo + (yr.hi - yr.lo) * t / ticks;
        const double py = kMarginTop + (yr.hi - fy) / (yr.hi - yr.lo) * plot_h;
        out << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << py << "\" x2=\"" << kMarginLeft
            << "\" y2=\"" << py << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << py + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << (spec.log_y ? "1e" + fmt(fy) : fmt(fy)) << "</text>\n";
    }
    out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << spec.x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << kMarginTop + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << kMarginTop + plot_h / 2 << ")\">" << spec.y_label
        << "</text>\n";

    double legend_y = kMarginTop + 6.0;
    for (const auto& s : spec.series) {
        if (s.points_only) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                const double y = s.y[i];
                if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
                if (spec.log_y && y <= 0.0) continue;
                out << "<circle cx=\"" << sx(s.x[i]) << "\" cy=\"" << sy(y)
                    << "\" r=\"2.4\" fill=\"" << s.color << "\" fill-opacity=\"0.65\"/>\n";
            }
        } else {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.6\" "
                << "points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                const double y = s.y[i];
                if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
                if (spec.log_y && y <= 0.0) continue;
                out << sx(s.x[i]) << ',' << sy(y) << ' ';
            }
            out << "\"/>\n";
        }
        if (!s.label.empty()) {
            out << "<rect x=\"" << kMarginLeft + plot_w - 150 << "\" y=\"" << legend_y - 8
                << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
            out << "<text x=\"" << kMarginLeft + plot_w - 136 << "\" y=\"" << legend_y + 1
                << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
            legend_y += 16.0;
        }
    }
    out << "</svg>\n";
}

}  // namespace scarcegrad
