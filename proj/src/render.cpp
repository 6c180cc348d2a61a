#include "easteer/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace easteer {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string px(double v) { return fmt("%.2f", v); }

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string header(double w, double h) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(w) + "\" height=\"" + px(h) +
           "\" viewBox=\"0 0 " + px(w) + " " + px(h) + "\" font-family=\"sans-serif\" font-size=\"11\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const std::string& extra = {}) {
    return "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\"" + (extra.empty() ? "" : " " + extra) + ">" + escape(s) +
           "</text>\n";
}

std::string diverging(double v) {
    v = std::clamp(v, -1.0, 1.0);
    int r = 255, g = 255, b = 255;
    if (v >= 0) {
        g = b = static_cast<int>(std::lround(255.0 * (1.0 - v)));
    } else {
        r = g = static_cast<int>(std::lround(255.0 * (1.0 + v)));
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& colour) {
    std::string p;
    for (const auto& [x, y] : pts) {
        p += (p.empty() ? "" : " ") + px(x) + "," + px(y);
    }
    return "<polyline fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"2\" points=\"" + p + "\"/>\n";
}

} // namespace

std::string render_heatmap_svg(const SimilarityMatrix& m) {
    const double cell = 44, left = 120, top = 120;
    const auto n = static_cast<double>(m.size());
    std::string out = header(left + n * cell + 20, top + n * cell + 20);
    for (std::size_t i = 0; i < m.size(); ++i) {
        out += text(left - 6, top + (i + 0.5) * cell + 4, m.labels[i], "text-anchor=\"end\"");
        const double cx = left + (i + 0.5) * cell, cy = top - 6;
        out += text(cx, cy, m.labels[i], "transform=\"rotate(-45 " + px(cx) + " " + px(cy) + ")\"");
        for (std::size_t j = 0; j < m.size(); ++j) {
            const double v = m.at(i, j);
            out += "<rect x=\"" + px(left + j * cell) + "\" y=\"" + px(top + i * cell) + "\" width=\"" + px(cell) +
                   "\" height=\"" + px(cell) + "\" fill=\"" + diverging(v) + "\" stroke=\"#888\"/>\n";
            out += text(left + (j + 0.5) * cell, top + (i + 0.5) * cell + 4, fmt("%.2f", v),
                        "text-anchor=\"middle\" font-size=\"9\"");
        }
    }
    return out + "</svg>\n";
}

std::string render_sweep_svg(const SweepResult& r) {
    const double w = 520, h = 320, left = 50, right = 20, top = 30, bottom = 40;
    const double pw = w - left - right, ph = h - top - bottom;
    double lo = 0, hi = 1;
    if (!r.points.empty()) {
        lo = r.points.front().alpha;
        hi = r.points.back().alpha;
    }
    if (hi <= lo) {
        hi = lo + 1;
    }
    auto sx = [&](double a) { return left + (a - lo) / (hi - lo) * pw; };
    auto sy = [&](double v) { return top + (1.0 - std::clamp(v, 0.0, 1.0)) * ph; };

    std::string out = header(w, h);
    out += text(left, 18, r.base_concept + " + " + r.attribute);
    out += "<rect x=\"" + px(left) + "\" y=\"" + px(top) + "\" width=\"" + px(pw) + "\" height=\"" + px(ph) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        out += text(left - 6, sy(t / 4.0) + 4, fmt("%.2f", t / 4.0), "text-anchor=\"end\"");
        out += text(sx(lo + (hi - lo) * t / 4.0), top + ph + 16, fmt("%.2f", lo + (hi - lo) * t / 4.0),
                    "text-anchor=\"middle\"");
    }
    out += text(left + pw / 2, h - 6, "alpha", "text-anchor=\"middle\"");
    std::vector<std::pair<double, double>> conf, ccs;
    for (const auto& p : r.points) {
        conf.emplace_back(sx(p.alpha), sy(p.attribute_confidence));
        ccs.emplace_back(sx(p.alpha), sy(p.ccs));
    }
    out += polyline(conf, "#c0392b");
    out += polyline(ccs, "#2c7fb8");
    out += text(left + pw - 110, top + 14, "confidence", "fill=\"#c0392b\"");
    out += text(left + pw - 110, top + 28, "CCS", "fill=\"#2c7fb8\"");
    return out + "</svg>\n";
}

std::string render_report_svg(const ExperimentReport& report) {
    const double bar = 14, gap = 16, left = 220, top = 20, width = 300;
    const double row_h = 3 * bar + gap;
    const double h = top + report.rows.size() * row_h + 30;
    std::string out = header(left + width + 40, h);
    const char* colours[3] = {"#8e44ad", "#16a085", "#2c7fb8"};
    const char* names[3] = {"H_g", "H_r", "CCS"};
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        const double y0 = top + i * row_h;
        out += text(left - 8, y0 + 1.5 * bar + 4, row.model_id + " / " + row.method + " / " + row.concept_name,
                    "text-anchor=\"end\"");
        const double vals[3] = {row.h_gender, row.h_race, row.ccs};
        for (int k = 0; k < 3; ++k) {
            out += "<rect x=\"" + px(left) + "\" y=\"" + px(y0 + k * bar) + "\" width=\"" +
                   px(width * std::clamp(vals[k], 0.0, 1.0)) + "\" height=\"" + px(bar - 2) + "\" fill=\"" +
                   colours[k] + "\"/>\n";
            out += text(left + width * std::clamp(vals[k], 0.0, 1.0) + 4, y0 + k * bar + 10,
                        std::string(names[k]) + " " + fmt("%.2f", vals[k]), "font-size=\"9\"");
        }
    }
    return out + "</svg>\n";
}

} // namespace easteer
