#pragma once

// Minimal SVG line plot for ablation summaries.

#include <cstdio>
#include <string>
#include <vector>

namespace lanetopo {

struct SvgSeries {
    std::string label;
    std::string color;
    std::vector<double> y;  // one point per x label
};

inline std::string svg_line_plot(const std::string& title,
                                 const std::vector<std::string>& x_labels,
                                 const std::vector<SvgSeries>& series) {
    const int width = 560, height = 360, ml = 60, mr = 20, mt = 40, mb = 50;
    const int pw = width - ml - mr, ph = height - mt - mb;
    double ymax = 0.0;
    for (const auto& s : series)
        for (double v : s.y) ymax = std::max(ymax, v);
    if (ymax <= 0.0) ymax = 1.0;
    ymax *= 1.1;
    auto xpos = [&](size_t i) {
        return ml + (x_labels.size() > 1 ? double(i) * pw / double(x_labels.size() - 1)
                                         : pw / 2.0);
    };
    auto ypos = [&](double v) { return mt + ph - v / ymax * ph; };
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns='http://www.w3.org/2000/svg' width='%d' height='%d'>\n", width,
                  height);
    out += buf;
    out += "<rect width='100%' height='100%' fill='white'/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<text x='%d' y='24' font-family='sans-serif' font-size='15'>%s</text>\n",
                  ml, title.c_str());
    out += buf;
    for (int g = 0; g <= 4; ++g) {
        double v = ymax * g / 4.0;
        std::snprintf(buf, sizeof(buf),
                      "<line x1='%d' y1='%.1f' x2='%d' y2='%.1f' stroke='#ddd'/>\n"
                      "<text x='%d' y='%.1f' font-family='sans-serif' font-size='11' "
                      "text-anchor='end'>%.3f</text>\n",
                      ml, ypos(v), width - mr, ypos(v), ml - 6, ypos(v) + 4, v);
        out += buf;
    }
    for (size_t i = 0; i < x_labels.size(); ++i) {
        std::snprintf(buf, sizeof(buf),
                      "<text x='%.1f' y='%d' font-family='sans-serif' font-size='11' "
                      "text-anchor='middle'>%s</text>\n",
                      xpos(i), height - mb + 20, x_labels[i].c_str());
        out += buf;
    }
    int legend_y = mt;
    for (const auto& s : series) {
        std::string pts;
        for (size_t i = 0; i < s.y.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", xpos(i), ypos(s.y[i]));
            pts += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<polyline points='%s' fill='none' stroke='%s' stroke-width='2'/>\n",
                      pts.c_str(), s.color.c_str());
        out += buf;
        for (size_t i = 0; i < s.y.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "<circle cx='%.1f' cy='%.1f' r='3' fill='%s'/>\n",
                          xpos(i), ypos(s.y[i]), s.color.c_str());
            out += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<text x='%d' y='%d' font-family='sans-serif' font-size='12' "
                      "fill='%s'>%s</text>\n",
                      width - mr - 110, legend_y, s.color.c_str(), s.label.c_str());
        out += buf;
        legend_y += 16;
    }
    out += "</svg>\n";
    return out;
}

}  // namespace lanetopo
