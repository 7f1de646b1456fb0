#include "ckmr/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "ckmr/errors.hpp"

namespace ckmr {

namespace {

std::ofstream open_svg(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file: " + path);
    return out;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string val3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

}  // namespace

void write_curves_svg(const std::string& path, const std::vector<CurveGrid>& curves,
                      const std::vector<std::string>& group_names) {
    const int pw = 280, ph = 190, cols = 3;
    const int ml = 40, mr = 12, mt = 26, mb = 28;
    const int n_panels = static_cast<int>(curves.size());
    const int n_rows = (n_panels + cols - 1) / cols;
    const int W = cols * pw, H = std::max(1, n_rows) * ph;

    std::ofstream out = open_svg(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (int p = 0; p < n_panels; ++p) {
        const CurveGrid& c = curves[p];
        const double x0 = (p % cols) * pw, y0 = (p / cols) * ph;
        const double iw = pw - ml - mr, ih = ph - mt - mb;

        double ylo = c.lo.minCoeff(), yhi = c.hi.maxCoeff();
        if (!(yhi > ylo)) {
            ylo -= 1.0;
            yhi += 1.0;
        }
        const double pad = 0.05 * (yhi - ylo);
        ylo -= pad;
        yhi += pad;
        const double glo = c.grid[0], ghi = c.grid[c.grid.size() - 1];
        const auto px = [&](double g) { return x0 + ml + iw * (g - glo) / (ghi - glo); };
        const auto py = [&](double v) { return y0 + mt + ih * (yhi - v) / (yhi - ylo); };

        out << "<text x=\"" << num(x0 + ml) << "\" y=\"" << num(y0 + 16)
            << "\" font-size=\"12\" fill=\"#333\">"
            << (c.index < static_cast<int>(group_names.size()) ? group_names[c.index] : "?")
            << "</text>\n";

        out << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
        for (Eigen::Index i = 0; i < c.grid.size(); ++i)
            out << num(px(c.grid[i])) << ',' << num(py(c.hi[i])) << ' ';
        for (Eigen::Index i = c.grid.size() - 1; i >= 0; --i)
            out << num(px(c.grid[i])) << ',' << num(py(c.lo[i])) << ' ';
        out << "\"/>\n";

        if (ylo < 0.0 && 0.0 < yhi)
            out << "<line x1=\"" << num(px(glo)) << "\" y1=\"" << num(py(0)) << "\" x2=\""
                << num(px(ghi)) << "\" y2=\"" << num(py(0))
                << "\" stroke=\"#bbb\" stroke-dasharray=\"3,3\"/>\n";

        out << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"1.5\" points=\"";
        for (Eigen::Index i = 0; i < c.grid.size(); ++i)
            out << num(px(c.grid[i])) << ',' << num(py(c.mean[i])) << ' ';
        out << "\"/>\n";

        // frame plus end labels on both axes
        out << "<rect x=\"" << num(x0 + ml) << "\" y=\"" << num(y0 + mt) << "\" width=\""
            << num(iw) << "\" height=\"" << num(ih)
            << "\" fill=\"none\" stroke=\"#888\" stroke-width=\"0.7\"/>\n";
        out << "<text x=\"" << num(x0 + ml) << "\" y=\"" << num(y0 + ph - 8)
            << "\" font-size=\"9\" fill=\"#555\">" << val3(glo) << "</text>\n";
        out << "<text x=\"" << num(x0 + ml + iw) << "\" y=\"" << num(y0 + ph - 8)
            << "\" font-size=\"9\" fill=\"#555\" text-anchor=\"end\">" << val3(ghi) << "</text>\n";
        out << "<text x=\"" << num(x0 + ml - 4) << "\" y=\"" << num(py(ylo + pad))
            << "\" font-size=\"9\" fill=\"#555\" text-anchor=\"end\">" << val3(ylo + pad)
            << "</text>\n";
        out << "<text x=\"" << num(x0 + ml - 4) << "\" y=\"" << num(py(yhi - pad) + 8)
            << "\" font-size=\"9\" fill=\"#555\" text-anchor=\"end\">" << val3(yhi - pad)
            << "</text>\n";
    }
    out << "</svg>\n";
}

void write_pip_heat_svg(const std::string& path, const Eigen::VectorXd& main_pip,
                        const Eigen::MatrixXd& joint_pip,
                        const std::vector<std::string>& group_names) {
    const Eigen::Index M = main_pip.size();
    if (joint_pip.rows() != M || static_cast<Eigen::Index>(group_names.size()) != M)
        throw ConfigError("PIP table and group names disagree");

    const int cell = 34, ml = 90, mt = 90, mr = 16, mb = 16;
    const int W = ml + static_cast<int>(M) * cell + mr;
    const int H = mt + static_cast<int>(M) * cell + mb;

    std::ofstream out = open_svg(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (Eigen::Index j = 0; j < M; ++j) {
        out << "<text x=\"" << ml - 6 << "\" y=\"" << mt + j * cell + cell / 2 + 3
            << "\" font-size=\"10\" fill=\"#333\" text-anchor=\"end\">" << group_names[j]
            << "</text>\n";
        out << "<text x=\"" << ml + j * cell + cell / 2 << "\" y=\"" << mt - 6
            << "\" font-size=\"10\" fill=\"#333\" text-anchor=\"start\" transform=\"rotate(-60 "
            << ml + j * cell + cell / 2 << ' ' << mt - 6 << ")\">" << group_names[j]
            << "</text>\n";
    }

    for (Eigen::Index j = 0; j < M; ++j)
        for (Eigen::Index k = 0; k < M; ++k) {
            const double v = std::clamp(j == k ? main_pip[j] : joint_pip(j, k), 0.0, 1.0);
            const int r = static_cast<int>(std::lround(255 + v * (8 - 255)));
            const int g = static_cast<int>(std::lround(255 + v * (48 - 255)));
            const int b = static_cast<int>(std::lround(255 + v * (107 - 255)));
            const int x = ml + static_cast<int>(k) * cell, y = mt + static_cast<int>(j) * cell;
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
                << cell << "\" fill=\"rgb(" << r << ',' << g << ',' << b
                << ")\" stroke=\"#ddd\"/>\n";
            out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 3
                << "\" font-size=\"8\" text-anchor=\"middle\" fill=\""
                << (v > 0.55 ? "white" : "#444") << "\">" << val3(v) << "</text>\n";
        }
    out << "</svg>\n";
}

}  // namespace ckmr
