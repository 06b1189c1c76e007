#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "neemo/error.hpp"

namespace neemo::svg {

namespace {

// Blue - white - red, t in [-1, 1].
std::string ramp(double t) {
    t = std::clamp(t, -1.0, 1.0);
    const double lo[3] = {33, 102, 172}, mid[3] = {247, 247, 247}, hi[3] = {178, 24, 43};
    const double* end = t < 0 ? lo : hi;
    const double s = std::abs(t);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(mid[0] + s * (end[0] - mid[0])),
                  static_cast<int>(mid[1] + s * (end[1] - mid[1])), static_cast<int>(mid[2] + s * (end[2] - mid[2])));
    return buf;
}

struct Mapper {
    double x0, y0, sx, sy;
    double px(double x) const { return (x - x0) * sx; }
    double py(double y) const { return (y - y0) * sy; }  // flipped via the group transform
};

}  // namespace

std::string render(const Frame& f, int size_px) {
    const auto& g = f.grid;
    if (g.xmax <= g.xmin || g.ymax <= g.ymin) throw InputError("svg: empty bounding box");
    const double w = size_px;
    const double h = size_px * (g.ymax - g.ymin) / (g.xmax - g.xmin);
    const Mapper m{g.xmin, g.ymin, w / (g.xmax - g.xmin), h / (g.ymax - g.ymin)};

    std::ostringstream out;
    out.precision(5);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h + 24 << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!f.title.empty()) out << "<text x=\"4\" y=\"16\" font-family=\"monospace\" font-size=\"13\">" << f.title << "</text>\n";
    out << "<g transform=\"translate(0," << h + 24 << ") scale(1,-1)\">\n";

    if (!f.heatmap.empty()) {
        if (f.heatmap.size() != static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny))
            throw InputError("svg: heatmap size does not match grid");
        double scale = 0.0;
        for (double v : f.heatmap) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) scale = 1.0;
        const double cw = w / g.nx, ch = h / g.ny;
        for (int r = 0; r < g.ny; ++r)
            for (int c = 0; c < g.nx; ++c)
                out << "<rect x=\"" << c * cw << "\" y=\"" << r * ch << "\" width=\"" << cw + 0.5 << "\" height=\""
                    << ch + 0.5 << "\" fill=\"" << ramp(f.heatmap[static_cast<std::size_t>(r * g.nx + c)] / scale)
                    << "\"/>\n";
    }

    const double wmax = f.event_weights.size() ? f.event_weights.maxCoeff() : 1.0;
    for (Eigen::Index i = 0; i < f.event_points.cols(); ++i) {
        const double rad = 1.0 + 2.0 * std::sqrt(f.event_weights.size() ? f.event_weights[i] / wmax : 1.0);
        out << "<circle cx=\"" << m.px(f.event_points(0, i)) << "\" cy=\"" << m.py(f.event_points(1, i)) << "\" r=\""
            << rad << "\" fill=\"#1b9e77\"/>\n";
    }
    for (Eigen::Index j = 0; j < f.sample_points.cols(); ++j)
        out << "<circle cx=\"" << m.px(f.sample_points(0, j)) << "\" cy=\"" << m.py(f.sample_points(1, j))
            << "\" r=\"2\" fill=\"#7570b3\"/>\n";

    if (f.forces.cols() == f.sample_points.cols() && f.forces.cols() > 0) {
        const double fmax = f.forces.colwise().norm().maxCoeff();
        const double len = fmax > 0 ? 0.06 * w / fmax : 0.0;
        for (Eigen::Index j = 0; j < f.forces.cols(); ++j) {
            const double x = m.px(f.sample_points(0, j)), y = m.py(f.sample_points(1, j));
            out << "<line x1=\"" << x << "\" y1=\"" << y << "\" x2=\"" << x + len * f.forces(0, j) << "\" y2=\""
                << y + len * f.forces(1, j) << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        }
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

void write(const std::filesystem::path& path, const Frame& frame, int size_px) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path.string());
    os << render(frame, size_px);
}

}  // namespace neemo::svg
