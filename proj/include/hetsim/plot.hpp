// SPDX-License-Identifier: Apache-2.0
//
// hetsim - link-level simulation library for heterogeneous multiuser uplink receivers
// Copyright (C) 2026 the hetsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file
// except in compliance with the License. You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the
// License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND,
// either express or implied. See the License for the specific language governing permissions
// and limitations under the License.
// ------------------------------------------------------------------------------------------
//
// Deterministic SVG line charts rendered straight from the experiment CSV: detection
// operating curves, NMSE-versus-sweep and miss-rate-versus-sweep figures. Pure rendering;
// byte-identical output for identical input.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "metrics.hpp"

namespace hetsim {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> pts;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline const std::vector<std::string> &palette() {
    static const std::vector<std::string> p = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                               "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    return p;
}

struct Axis {
    double lo = 0.0, hi = 1.0;
    bool log = false;

    double map(double v, double pix_lo, double pix_hi) const {
        const double a = log ? std::log10(v) : v;
        const double l = log ? std::log10(lo) : lo;
        const double h = log ? std::log10(hi) : hi;
        const double t = (h > l) ? (a - l) / (h - l) : 0.5;
        return pix_lo + t * (pix_hi - pix_lo);
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            const int d0 = static_cast<int>(std::floor(std::log10(lo)));
            const int d1 = static_cast<int>(std::ceil(std::log10(hi)));
            for (int d = d0; d <= d1; ++d)
                out.push_back(std::pow(10.0, d));
        } else {
            for (int i = 0; i <= 5; ++i)
                out.push_back(lo + (hi - lo) * static_cast<double>(i) / 5.0);
        }
        return out;
    }
};

} // namespace detail

// Renders line series into an SVG file. Log axes drop non-positive coordinates; series
// left empty after filtering are skipped. Throws if nothing remains to draw.
inline void write_line_svg(const std::string &path, const std::string &title, const std::string &xlabel,
                           const std::string &ylabel, bool xlog, bool ylog,
                           const std::vector<PlotSeries> &series) {
    const double W = 760, H = 540, ml = 80, mr = 180, mt = 50, mb = 60;
    std::vector<PlotSeries> keep;
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool any = false;
    for (const auto &s : series) {
        PlotSeries f;
        f.label = s.label;
        for (auto [x, y] : s.pts) {
            if (!std::isfinite(x) || !std::isfinite(y))
                continue;
            if ((xlog && x <= 0.0) || (ylog && y <= 0.0))
                continue;
            f.pts.emplace_back(x, y);
        }
        std::sort(f.pts.begin(), f.pts.end());
        if (f.pts.empty())
            continue;
        for (auto [x, y] : f.pts) {
            if (!any) {
                xmin = xmax = x;
                ymin = ymax = y;
                any = true;
            } else {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
        keep.push_back(std::move(f));
    }
    if (!any)
        throw std::runtime_error("plot: no drawable points for '" + path + "'");
    auto widen = [](double &lo, double &hi, bool lg) {
        if (lg) {
            if (hi / lo < 1.0001) {
                lo /= 2.0;
                hi *= 2.0;
            } else {
                lo /= 1.2;
                hi *= 1.2;
            }
        } else {
            if (hi - lo < 1e-12) {
                lo -= 0.5;
                hi += 0.5;
            } else {
                const double pad = (hi - lo) * 0.06;
                lo -= pad;
                hi += pad;
            }
        }
    };
    widen(xmin, xmax, xlog);
    widen(ymin, ymax, ylog);
    detail::Axis ax{xmin, xmax, xlog}, ay{ymin, ymax, ylog};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << detail::svg_num((ml + W - mr) / 2) << "\" y=\"28\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

    // Frame and grid.
    svg << "<rect x=\"" << detail::svg_num(ml) << "\" y=\"" << detail::svg_num(mt) << "\" width=\""
        << detail::svg_num(W - ml - mr) << "\" height=\"" << detail::svg_num(H - mt - mb)
        << "\" fill=\"none\" stroke=\"#333333\"/>\n";
    for (double tx : ax.ticks()) {
        if (tx < ax.lo || tx > ax.hi)
            continue;
        const double px = ax.map(tx, ml, W - mr);
        svg << "<line x1=\"" << detail::svg_num(px) << "\" y1=\"" << detail::svg_num(mt) << "\" x2=\""
            << detail::svg_num(px) << "\" y2=\"" << detail::svg_num(H - mb)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << detail::svg_num(px) << "\" y=\"" << detail::svg_num(H - mb + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << detail::tick_label(tx) << "</text>\n";
    }
    for (double ty : ay.ticks()) {
        if (ty < ay.lo || ty > ay.hi)
            continue;
        const double py = ay.map(ty, H - mb, mt);
        svg << "<line x1=\"" << detail::svg_num(ml) << "\" y1=\"" << detail::svg_num(py) << "\" x2=\""
            << detail::svg_num(W - mr) << "\" y2=\"" << detail::svg_num(py)
            << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << detail::svg_num(ml - 8) << "\" y=\"" << detail::svg_num(py + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::tick_label(ty)
            << "</text>\n";
    }
    svg << "<text x=\"" << detail::svg_num((ml + W - mr) / 2) << "\" y=\"" << detail::svg_num(H - 16)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xlabel << "</text>\n";
    svg << "<text x=\"20\" y=\"" << detail::svg_num((mt + H - mb) / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 "
        << detail::svg_num((mt + H - mb) / 2) << ")\">" << ylabel << "</text>\n";

    // Series.
    for (std::size_t si = 0; si < keep.size(); ++si) {
        const std::string &color = detail::palette()[si % detail::palette().size()];
        std::ostringstream pl;
        for (auto [x, y] : keep[si].pts)
            pl << detail::svg_num(ax.map(x, ml, W - mr)) << "," << detail::svg_num(ay.map(y, H - mb, mt)) << " ";
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pl.str()
            << "\"/>\n";
        for (auto [x, y] : keep[si].pts)
            svg << "<circle cx=\"" << detail::svg_num(ax.map(x, ml, W - mr)) << "\" cy=\""
                << detail::svg_num(ay.map(y, H - mb, mt)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const double ly = mt + 18 + 18 * static_cast<double>(si);
        svg << "<line x1=\"" << detail::svg_num(W - mr + 12) << "\" y1=\"" << detail::svg_num(ly - 4)
            << "\" x2=\"" << detail::svg_num(W - mr + 36) << "\" y2=\"" << detail::svg_num(ly - 4)
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << detail::svg_num(W - mr + 42) << "\" y=\"" << detail::svg_num(ly)
            << "\" font-family=\"sans-serif\" font-size=\"12\">" << keep[si].label << "</text>\n";
    }
    svg << "</svg>\n";

    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << svg.str();
    if (!out)
        throw std::runtime_error("failed while writing '" + path + "'");
}

namespace detail {

inline std::string series_label(const std::string &sweep_var, double value) {
    return sweep_var + "=" + tick_label(value);
}

} // namespace detail

// Renders one figure kind from experiment CSV rows. Kinds: "roc" (per-sweep-value
// operating curves from the roc_pmd_*/roc_pfa_* rows, log-log), "nmse" (nmse_* metrics
// over the sweep, log y), "pmd" (miss/false-alarm rates over the sweep, log y).
inline void plot_csv_rows(const std::vector<CsvRow> &rows, const std::string &kind, const std::string &out_path) {
    if (rows.empty())
        throw std::runtime_error("plot: CSV contains no data rows");
    const std::string sweep_var = rows.front().sweep_var;
    if (kind == "roc") {
        // value -> grid index -> (pmd, pfa)
        std::map<double, std::map<int, std::pair<double, double>>> grid;
        for (const auto &r : rows) {
            const bool is_pmd = r.metric.rfind("roc_pmd_", 0) == 0;
            const bool is_pfa = r.metric.rfind("roc_pfa_", 0) == 0;
            if (!is_pmd && !is_pfa)
                continue;
            const int idx = std::stoi(r.metric.substr(8));
            auto &cell = grid[r.value][idx];
            (is_pmd ? cell.first : cell.second) = r.mean;
        }
        if (grid.empty())
            throw std::runtime_error("plot: CSV has no roc_pmd_*/roc_pfa_* rows; cannot draw an operating curve");
        std::vector<PlotSeries> series;
        for (const auto &[value, cells] : grid) {
            PlotSeries s;
            s.label = detail::series_label(sweep_var, value);
            for (const auto &[idx, pp] : cells)
                s.pts.emplace_back(pp.second, pp.first); // x = pfa, y = pmd
            series.push_back(std::move(s));
        }
        write_line_svg(out_path, "Detection operating curves", "false-alarm probability",
                       "missed-detection probability", true, true, series);
        return;
    }
    if (kind == "nmse") {
        std::vector<PlotSeries> series;
        for (const std::string metric : {"nmse_mtd", "nmse_embb"}) {
            PlotSeries s;
            s.label = metric;
            for (const auto &r : rows)
                if (r.metric == metric)
                    s.pts.emplace_back(r.value, r.mean);
            if (!s.pts.empty())
                series.push_back(std::move(s));
        }
        if (series.empty())
            throw std::runtime_error("plot: CSV has no nmse_* rows");
        write_line_svg(out_path, "Channel-estimate NMSE", sweep_var, "NMSE", false, true, series);
        return;
    }
    if (kind == "pmd") {
        std::vector<PlotSeries> series;
        for (const std::string metric : {"pmd", "pfa", "p_out"}) {
            PlotSeries s;
            s.label = metric;
            for (const auto &r : rows)
                if (r.metric == metric)
                    s.pts.emplace_back(r.value, r.mean);
            if (!s.pts.empty())
                series.push_back(std::move(s));
        }
        if (series.empty())
            throw std::runtime_error("plot: CSV has no pmd/pfa/p_out rows");
        write_line_svg(out_path, "Detection and outage rates", sweep_var, "probability", false, true, series);
        return;
    }
    throw std::invalid_argument("plot: unknown kind '" + kind + "' (expected roc, nmse, or pmd)");
}

inline void plot_csv(const std::string &csv_path, const std::string &kind, const std::string &out_path) {
    plot_csv_rows(read_csv(csv_path), kind, out_path);
}

} // namespace hetsim
