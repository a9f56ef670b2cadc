#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "catephi/errors.hpp"
#include "catephi/eval.hpp"

namespace catephi {

// PEHE-versus-annotation panels, one per (benchmark, sampling) pair found in
// the results rows: log-scaled x axis, one mean polyline and one confidence
// band polygon per method. Output is plain SVG text.

struct PlotPanel {
    std::string benchmark, sampling;
    std::vector<std::string> methods;                       // first-appearance order
    std::vector<int> levels;                                // ascending
    std::map<std::string, std::map<int, std::pair<double, double>>> series;  // mean, ci
};

inline std::vector<PlotPanel> collect_panels(const std::vector<ResultsRow>& rows) {
    std::vector<PlotPanel> panels;
    auto panel_for = [&](const ResultsRow& r) -> PlotPanel& {
        for (auto& p : panels)
            if (p.benchmark == r.benchmark && p.sampling == r.sampling) return p;
        panels.push_back(PlotPanel{r.benchmark, r.sampling, {}, {}, {}});
        return panels.back();
    };
    std::map<std::pair<std::string, int>, std::vector<double>> buckets;
    for (const auto& r : rows) {
        PlotPanel& p = panel_for(r);
        if (std::find(p.methods.begin(), p.methods.end(), r.method) == p.methods.end())
            p.methods.push_back(r.method);
        if (std::find(p.levels.begin(), p.levels.end(), r.level) == p.levels.end())
            p.levels.push_back(r.level);
        if (!r.failed)
            buckets[{p.benchmark + "/" + p.sampling + "/" + r.method, r.level}].push_back(r.pehe);
    }
    for (auto& p : panels) {
        std::sort(p.levels.begin(), p.levels.end());
        for (const auto& m : p.methods)
            for (int level : p.levels) {
                auto it = buckets.find({p.benchmark + "/" + p.sampling + "/" + m, level});
                if (it == buckets.end() || it->second.empty()) continue;
                const auto& vals = it->second;
                double mean = 0.0;
                for (double v : vals) mean += v;
                mean /= vals.size();
                double ci = 0.0;
                if (vals.size() > 1) {
                    double ss = 0.0;
                    for (double v : vals) ss += (v - mean) * (v - mean);
                    ci = 1.96 * std::sqrt(ss / (vals.size() - 1)) /
                         std::sqrt(static_cast<double>(vals.size()));
                }
                p.series[m][level] = {mean, ci};
            }
    }
    return panels;
}

namespace detail {

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline const char* method_color(const std::string& method, std::size_t fallback_idx) {
    if (method == "plug_in") return "#1f77b4";
    if (method == "info_extraction") return "#ff7f0e";
    if (method == "direct_regression") return "#d62728";
    if (method == "adjusted") return "#2ca02c";
    static const char* palette[] = {"#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
    return palette[fallback_idx % 4];
}

}  // namespace detail

inline std::string render_panel_svg(const PlotPanel& panel) {
    const double width = 640, height = 440;
    const double ml = 70, mr = 20, mt = 44, mb = 58;
    const double pw = width - ml - mr, ph = height - mt - mb;

    if (panel.levels.empty()) throw EvalError("plot: no levels to draw");
    double lx0 = std::log10(static_cast<double>(panel.levels.front())) - 0.05;
    double lx1 = std::log10(static_cast<double>(panel.levels.back())) + 0.05;
    if (lx1 <= lx0) lx1 = lx0 + 1.0;
    double ymax = 0.0;
    for (const auto& [m, pts] : panel.series)
        for (const auto& [lvl, mc] : pts) ymax = std::max(ymax, mc.first + mc.second);
    if (ymax <= 0.0) ymax = 1.0;
    ymax *= 1.08;

    auto px = [&](int level) {
        return ml + pw * (std::log10(static_cast<double>(level)) - lx0) / (lx1 - lx0);
    };
    auto py = [&](double v) { return mt + ph * (1.0 - v / ymax); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << detail::fmt2(ml + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << panel.benchmark << " ("
        << panel.sampling << " sampling)</text>\n";

    // axes
    svg << "<line x1=\"" << detail::fmt2(ml) << "\" y1=\"" << detail::fmt2(mt + ph) << "\" x2=\""
        << detail::fmt2(ml + pw) << "\" y2=\"" << detail::fmt2(mt + ph)
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << detail::fmt2(ml) << "\" y1=\"" << detail::fmt2(mt) << "\" x2=\""
        << detail::fmt2(ml) << "\" y2=\"" << detail::fmt2(mt + ph) << "\" stroke=\"black\"/>\n";

    for (int level : panel.levels) {
        double x = px(level);
        svg << "<line x1=\"" << detail::fmt2(x) << "\" y1=\"" << detail::fmt2(mt + ph)
            << "\" x2=\"" << detail::fmt2(x) << "\" y2=\"" << detail::fmt2(mt + ph + 4)
            << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << detail::fmt2(x) << "\" y=\"" << detail::fmt2(mt + ph + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << level
            << "</text>\n";
    }
    double step = ymax / 4.0;
    double mag = std::pow(10.0, std::floor(std::log10(step)));
    double norm = step / mag;
    step = (norm <= 1.0 ? 1.0 : norm <= 2.0 ? 2.0 : norm <= 2.5 ? 2.5 : norm <= 5.0 ? 5.0 : 10.0) *
           mag;
    for (double v = 0.0; v <= ymax + 1e-12; v += step) {
        double y = py(v);
        svg << "<line x1=\"" << detail::fmt2(ml - 4) << "\" y1=\"" << detail::fmt2(y) << "\" x2=\""
            << detail::fmt2(ml) << "\" y2=\"" << detail::fmt2(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << detail::fmt2(ml - 8) << "\" y=\"" << detail::fmt2(y + 3)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">"
            << detail::fmt_tick(v) << "</text>\n";
    }
    svg << "<text x=\"" << detail::fmt2(ml + pw / 2) << "\" y=\"" << detail::fmt2(height - 14)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">structured "
           "annotations (log scale)</text>\n";
    svg << "<text x=\"18\" y=\"" << detail::fmt2(mt + ph / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 18 " << detail::fmt2(mt + ph / 2) << ")\">PEHE</text>\n";

    // confidence bands first so the mean lines draw on top
    for (std::size_t mi = 0; mi < panel.methods.size(); ++mi) {
        const auto& method = panel.methods[mi];
        auto it = panel.series.find(method);
        if (it == panel.series.end() || it->second.empty()) continue;
        const char* color = detail::method_color(method, mi);
        std::ostringstream pts;
        for (const auto& [lvl, mc] : it->second)
            pts << detail::fmt2(px(lvl)) << ',' << detail::fmt2(py(mc.first + mc.second)) << ' ';
        for (auto rit = it->second.rbegin(); rit != it->second.rend(); ++rit)
            pts << detail::fmt2(px(rit->first)) << ','
                << detail::fmt2(py(rit->second.first - rit->second.second)) << ' ';
        svg << "<polygon class=\"band\" points=\"" << pts.str() << "\" fill=\"" << color
            << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }
    for (std::size_t mi = 0; mi < panel.methods.size(); ++mi) {
        const auto& method = panel.methods[mi];
        auto it = panel.series.find(method);
        if (it == panel.series.end() || it->second.empty()) continue;
        const char* color = detail::method_color(method, mi);
        std::ostringstream pts;
        for (const auto& [lvl, mc] : it->second)
            pts << detail::fmt2(px(lvl)) << ',' << detail::fmt2(py(mc.first)) << ' ';
        svg << "<polyline class=\"mean\" points=\"" << pts.str() << "\" fill=\"none\" stroke=\""
            << color << "\" stroke-width=\"2\"/>\n";
        for (const auto& [lvl, mc] : it->second)
            svg << "<circle cx=\"" << detail::fmt2(px(lvl)) << "\" cy=\""
                << detail::fmt2(py(mc.first)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }

    // legend
    double ly = mt + 10;
    for (std::size_t mi = 0; mi < panel.methods.size(); ++mi) {
        const char* color = detail::method_color(panel.methods[mi], mi);
        double lx = ml + pw - 158;
        svg << "<line x1=\"" << detail::fmt2(lx) << "\" y1=\"" << detail::fmt2(ly) << "\" x2=\""
            << detail::fmt2(lx + 22) << "\" y2=\"" << detail::fmt2(ly) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << detail::fmt2(lx + 28) << "\" y=\"" << detail::fmt2(ly + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << panel.methods[mi]
            << "</text>\n";
        ly += 16;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace catephi
