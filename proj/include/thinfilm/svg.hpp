#pragma once
// Minimal self-contained SVG line-chart writer (log-log axes) so curve
// emission has no plotting dependency.

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace thinfilm::svg {

struct Series {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<std::pair<double, double>> points;  // (x, y), positive values
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 860;
    int height = 560;
};

inline void write_loglog_chart(const std::string& path, const ChartSpec& spec,
                               const std::vector<Series>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (x <= 0 || y <= 0) continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmin > xmax) {
        xmin = 1;
        xmax = 10;
        ymin = 1;
        ymax = 10;
    }
    const double lx0 = std::floor(std::log10(xmin)), lx1 = std::ceil(std::log10(xmax));
    const double ly0 = std::floor(std::log10(ymin)), ly1 = std::ceil(std::log10(ymax));
    const int ml = 70, mr = 24, mt = 44, mb = 56;
    const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
    auto px = [&](double x) { return ml + (std::log10(x) - lx0) / (lx1 - lx0) * pw; };
    auto py = [&](double y) { return mt + ph - (std::log10(y) - ly0) / (ly1 - ly0) * ph; };

    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << spec.width << "' height='" << spec.height
        << "' viewBox='0 0 " << spec.width << " " << spec.height << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << spec.width / 2 << "' y='24' text-anchor='middle' font-size='16' font-family='sans-serif'>"
        << spec.title << "</text>\n";

    for (double d = lx0; d <= lx1 + 1e-9; d += 1) {
        const double x = std::pow(10.0, d);
        out << "<line x1='" << px(x) << "' y1='" << mt << "' x2='" << px(x) << "' y2='" << mt + ph
            << "' stroke='#dddddd'/>\n";
        out << "<text x='" << px(x) << "' y='" << mt + ph + 18
            << "' text-anchor='middle' font-size='11' font-family='sans-serif'>1e" << static_cast<int>(d)
            << "</text>\n";
    }
    for (double d = ly0; d <= ly1 + 1e-9; d += 1) {
        const double y = std::pow(10.0, d);
        out << "<line x1='" << ml << "' y1='" << py(y) << "' x2='" << ml + pw << "' y2='" << py(y)
            << "' stroke='#dddddd'/>\n";
        out << "<text x='" << ml - 6 << "' y='" << py(y) + 4
            << "' text-anchor='end' font-size='11' font-family='sans-serif'>1e" << static_cast<int>(d)
            << "</text>\n";
    }
    out << "<rect x='" << ml << "' y='" << mt << "' width='" << pw << "' height='" << ph
        << "' fill='none' stroke='#444444'/>\n";
    out << "<text x='" << ml + pw / 2 << "' y='" << spec.height - 14
        << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << spec.x_label << "</text>\n";
    out << "<text x='18' y='" << mt + ph / 2 << "' text-anchor='middle' font-size='13' font-family='sans-serif'"
        << " transform='rotate(-90 18 " << mt + ph / 2 << ")'>" << spec.y_label << "</text>\n";

    int legend_y = mt + 14;
    for (const auto& s : series) {
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.8' points='";
        for (const auto& [x, y] : s.points) {
            if (x <= 0 || y <= 0) continue;
            out << px(x) << "," << py(y) << " ";
        }
        out << "'/>\n";
        out << "<line x1='" << ml + pw - 150 << "' y1='" << legend_y << "' x2='" << ml + pw - 126 << "' y2='"
            << legend_y << "' stroke='" << s.color << "' stroke-width='3'/>\n";
        out << "<text x='" << ml + pw - 120 << "' y='" << legend_y + 4
            << "' font-size='12' font-family='sans-serif'>" << s.label << "</text>\n";
        legend_y += 18;
    }
    out << "</svg>\n";

    std::ofstream f(path);
    f << out.str();
}

}  // namespace thinfilm::svg
