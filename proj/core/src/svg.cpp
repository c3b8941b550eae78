#include "hybridsent/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hybridsent/errors.hpp"

namespace hybridsent {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr double kMargin = 48.0;
// Negative (class 0) orange, positive (class 1) blue.
const char* kColors[2] = {"#ff7f0e", "#1f77b4"};
const char* kClassNames[2] = {"negative", "positive"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string scatter_svg(const Tensord& coords, const std::vector<int>& labels) {
    const std::size_t n = labels.size();
    if (n > 0 && (coords.rank() != 2 || coords.dim(0) != n || coords.dim(1) != 2)) {
        throw DataError("scatter_svg: coords must be [n,2] aligned with labels");
    }
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    if (n > 0) {
        min_x = max_x = coords(0, 0);
        min_y = max_y = coords(0, 1);
        for (std::size_t i = 1; i < n; ++i) {
            min_x = std::min(min_x, coords(i, 0));
            max_x = std::max(max_x, coords(i, 0));
            min_y = std::min(min_y, coords(i, 1));
            max_y = std::max(max_y, coords(i, 1));
        }
    }
    if (max_x - min_x < 1e-12) max_x = min_x + 1.0;
    if (max_y - min_y < 1e-12) max_y = min_y + 1.0;
    const double sx = (kWidth - 2.0 * kMargin) / (max_x - min_x);
    const double sy = (kHeight - 2.0 * kMargin) / (max_y - min_y);

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "  <rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = labels[i] == 1 ? 1 : 0;
        const double px = kMargin + (coords(i, 0) - min_x) * sx;
        // SVG y axis points down; flip so larger coordinates plot higher.
        const double py = kHeight - kMargin - (coords(i, 1) - min_y) * sy;
        out << "  <circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py)
            << "\" r=\"3\" fill=\"" << kColors[cls] << "\" fill-opacity=\"0.75\"/>\n";
    }
    for (int cls = 0; cls < 2; ++cls) {
        const double ly = 20.0 + 18.0 * cls;
        out << "  <circle cx=\"20\" cy=\"" << fmt(ly) << "\" r=\"5\" fill=\"" << kColors[cls]
            << "\"/>\n";
        out << "  <text x=\"32\" y=\"" << fmt(ly + 4.0)
            << "\" font-family=\"sans-serif\" font-size=\"13\">" << kClassNames[cls] << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void emit_plot(const Tensord& coords, const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << scatter_svg(coords, labels);
    if (!out) throw DataError("write failure: " + path);
}

}  // namespace hybridsent
