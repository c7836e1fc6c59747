#pragma once

// Tabular (CSV / JSON) and SVG renderings of the analysis results. Long-form CSVs are
// the machine contract; wide forms are pivoted for reading.

#include "qmad/ingest.hpp"
#include "qmad/madeval.hpp"
#include "qmad/stats.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace qmad::report {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Text of the `#` comment line heading every emitted CSV.
inline std::string provenance(std::string_view command, std::uint64_t config_hash, std::uint64_t registry_hash)
{
    return "qmad " + std::string(kToolVersion) + " command=" + std::string(command) + " config=" + hex64(config_hash) +
           " registry=" + hex64(registry_hash);
}

inline std::string fixed4(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

using qmad::format_double;

// --- separability -----------------------------------------------------------

struct FdrRow {
    std::string dataset;
    std::string attack_type;
    std::string estimator;
    stats::FdrResult fdr;
};

inline void write_fdr_long(std::ostream& out, std::span<const FdrRow> rows, const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "dataset,attack_type,estimator,fdr\n";
    for (const auto& r : rows)
        out << csv::escape(r.dataset) << ',' << csv::escape(r.attack_type) << ',' << csv::escape(r.estimator) << ','
            << (r.fdr.infinite ? "inf" : format_double(r.fdr.value)) << '\n';
}

/// dataset,attack_type,<estimator...>
inline void write_fdr_wide(std::ostream& out, std::span<const FdrRow> rows, std::span<const std::string> estimators,
                           const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "dataset,attack_type";
    for (const auto& e : estimators) out << ',' << csv::escape(e);
    out << '\n';
    std::map<std::pair<std::string, std::string>, std::map<std::string, stats::FdrResult>> grid;
    for (const auto& r : rows) grid[{r.dataset, r.attack_type}][r.estimator] = r.fdr;
    for (const auto& [key, cells] : grid) {
        out << csv::escape(key.first) << ',' << csv::escape(key.second);
        for (const auto& e : estimators) {
            const auto it = cells.find(e);
            out << ',' << (it == cells.end() ? "" : it->second.infinite ? "inf" : fixed4(it->second.value));
        }
        out << '\n';
    }
}

// --- metric reports -----------------------------------------------------------

/// estimator,source_dataset,eval_dataset,attack_type,threshold,apcer,bpcer,acer
inline void write_metric_rows(std::ostream& out, const madeval::MetricReport& report, const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "estimator,source_dataset,eval_dataset,attack_type,threshold,apcer,bpcer,acer\n";
    for (const auto& r : report.rows)
        out << csv::escape(r.estimator) << ',' << csv::escape(r.source_dataset) << ',' << csv::escape(r.eval_dataset)
            << ',' << csv::escape(r.attack_type) << ',' << format_double(r.threshold) << ',' << format_double(r.apcer)
            << ',' << format_double(r.bpcer) << ',' << format_double(r.acer) << '\n';
}

/// Estimator with the lowest EER in each (dataset, attack) row; ties go to the first name.
inline std::map<std::pair<std::string, std::string>, std::string> eer_row_minima(const madeval::MetricReport& report)
{
    std::map<std::pair<std::string, std::string>, std::pair<double, std::string>> best;
    for (const auto& r : report.rows) {
        const auto key = std::make_pair(r.eval_dataset, r.attack_type);
        const double v = r.eer.value_or(r.acer);
        auto it = best.find(key);
        if (it == best.end() || v < it->second.first) best[key] = {v, r.estimator};
    }
    std::map<std::pair<std::string, std::string>, std::string> out;
    for (const auto& [k, v] : best) out[k] = v.second;
    return out;
}

/// Long-form EER table with a min_per_row marker and a trailing mean row per estimator.
inline void write_eer_long(std::ostream& out, const madeval::MetricReport& report, const std::string& comment)
{
    detail::write_comment(out, comment);
    const auto minima = eer_row_minima(report);
    out << "estimator,dataset,attack_type,eer,threshold,apcer,bpcer,min_per_row\n";
    for (const auto& r : report.rows) {
        const bool is_min = minima.at({r.eval_dataset, r.attack_type}) == r.estimator;
        out << csv::escape(r.estimator) << ',' << csv::escape(r.eval_dataset) << ',' << csv::escape(r.attack_type) << ','
            << format_double(r.eer.value_or(r.acer)) << ',' << format_double(r.threshold) << ','
            << format_double(r.apcer) << ',' << format_double(r.bpcer) << ',' << (is_min ? 1 : 0) << '\n';
    }
    for (const auto& m : report.means)
        out << csv::escape(m.estimator) << ",mean,mean," << format_double(m.value) << ",,,,\n";
}

/// dataset,attack_type,<estimator...>,min_per_row ; last row "mean".
inline void write_eer_wide(std::ostream& out, const madeval::MetricReport& report,
                           std::span<const std::string> estimators, const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "dataset,attack_type";
    for (const auto& e : estimators) out << ',' << csv::escape(e);
    out << ",min_per_row\n";
    std::map<std::pair<std::string, std::string>, std::map<std::string, double>> grid;
    for (const auto& r : report.rows) grid[{r.eval_dataset, r.attack_type}][r.estimator] = r.eer.value_or(r.acer);
    const auto minima = eer_row_minima(report);
    for (const auto& [key, cells] : grid) {
        out << csv::escape(key.first) << ',' << csv::escape(key.second);
        for (const auto& e : estimators) {
            const auto it = cells.find(e);
            out << ',' << (it == cells.end() ? "" : fixed4(it->second));
        }
        out << ',' << csv::escape(minima.at(key)) << '\n';
    }
    out << "mean,";
    std::string best;
    double best_v = std::numeric_limits<double>::infinity();
    for (const auto& e : estimators) {
        const auto it = std::ranges::find(report.means, e, &madeval::MeanRow::estimator);
        out << ',' << (it == report.means.end() ? "" : fixed4(it->value));
        if (it != report.means.end() && it->value < best_v) {
            best_v = it->value;
            best = e;
        }
    }
    out << ',' << csv::escape(best) << '\n';
}

/// estimator,source_dataset,eval_dataset,threshold,source_achieved_bpcer,bpcer
inline void write_bpcer_long(std::ostream& out, const madeval::MetricReport& report, const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "estimator,source_dataset,eval_dataset,threshold,target_bpcer,source_achieved_bpcer,bpcer\n";
    for (const auto& r : report.bpcer_rows)
        out << csv::escape(r.estimator) << ',' << csv::escape(r.source_dataset) << ',' << csv::escape(r.eval_dataset)
            << ',' << format_double(r.threshold) << ',' << format_double(report.target_bpcer) << ','
            << format_double(r.source_achieved_bpcer) << ',' << format_double(r.bpcer) << '\n';
}

/// Rows (source, eval dataset) x columns estimators.
inline void write_bpcer_wide(std::ostream& out, const madeval::MetricReport& report,
                             std::span<const std::string> estimators, const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "source_dataset,eval_dataset";
    for (const auto& e : estimators) out << ',' << csv::escape(e);
    out << '\n';
    std::map<std::pair<std::string, std::string>, std::map<std::string, double>> grid;
    for (const auto& r : report.bpcer_rows) grid[{r.source_dataset, r.eval_dataset}][r.estimator] = r.bpcer;
    for (const auto& [key, cells] : grid) {
        out << csv::escape(key.first) << ',' << csv::escape(key.second);
        for (const auto& e : estimators) {
            const auto it = cells.find(e);
            out << ',' << (it == cells.end() ? "" : fixed4(it->second));
        }
        out << '\n';
    }
}

/// Rows (source, estimator) x columns "<dataset>/<attack>"; optional trailing mean ACER column.
inline void write_attack_matrix(std::ostream& out, const madeval::MetricReport& report, bool use_acer,
                                const std::string& comment)
{
    detail::write_comment(out, comment);
    std::vector<std::pair<std::string, std::string>> columns;
    for (const auto& r : report.rows) {
        const auto key = std::make_pair(r.eval_dataset, r.attack_type);
        if (std::ranges::find(columns, key) == columns.end()) columns.push_back(key);
    }
    std::ranges::sort(columns);
    out << "source_dataset,estimator";
    for (const auto& [d, a] : columns) out << ',' << csv::escape(d + "/" + a);
    if (use_acer) out << ",mean";
    out << '\n';
    std::map<std::pair<std::string, std::string>, std::map<std::pair<std::string, std::string>, double>> grid;
    for (const auto& r : report.rows)
        grid[{r.source_dataset, r.estimator}][{r.eval_dataset, r.attack_type}] = use_acer ? r.acer : r.apcer;
    for (const auto& [key, cells] : grid) {
        out << csv::escape(key.first) << ',' << csv::escape(key.second);
        for (const auto& c : columns) {
            const auto it = cells.find(c);
            out << ',' << (it == cells.end() ? "" : fixed4(it->second));
        }
        if (use_acer) {
            const auto it = std::ranges::find_if(report.means, [&](const madeval::MeanRow& m) {
                return m.source_dataset == key.first && m.estimator == key.second;
            });
            out << ',' << (it == report.means.end() ? "" : fixed4(it->value));
        }
        out << '\n';
    }
}

inline void write_means(std::ostream& out, const madeval::MetricReport& report, std::string_view metric,
                        const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "estimator,source_dataset,mean_" << metric << '\n';
    for (const auto& m : report.means)
        out << csv::escape(m.estimator) << ',' << csv::escape(m.source_dataset) << ',' << format_double(m.value) << '\n';
}

inline nlohmann::json json_number(double v)
{
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : v < 0 ? "-inf" : "nan";
}

inline nlohmann::json to_json(const madeval::MetricReport& report)
{
    nlohmann::json j;
    j["target_bpcer"] = report.target_bpcer;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row{{"estimator", r.estimator},         {"source_dataset", r.source_dataset},
                           {"eval_dataset", r.eval_dataset},   {"attack_type", r.attack_type},
                           {"threshold", json_number(r.threshold)}, {"apcer", r.apcer},
                           {"bpcer", r.bpcer},                 {"acer", r.acer}};
        if (r.eer) row["eer"] = *r.eer;
        j["rows"].push_back(std::move(row));
    }
    j["bpcer_rows"] = nlohmann::json::array();
    for (const auto& r : report.bpcer_rows)
        j["bpcer_rows"].push_back({{"estimator", r.estimator},
                                   {"source_dataset", r.source_dataset},
                                   {"eval_dataset", r.eval_dataset},
                                   {"threshold", json_number(r.threshold)},
                                   {"source_achieved_bpcer", r.source_achieved_bpcer},
                                   {"bpcer", r.bpcer}});
    j["means"] = nlohmann::json::array();
    for (const auto& m : report.means)
        j["means"].push_back({{"estimator", m.estimator}, {"source_dataset", m.source_dataset}, {"value", m.value}});
    return j;
}

// --- distributions and overlap --------------------------------------------------

struct NamedCurve {
    std::string dataset;
    std::string estimator;
    std::string population; ///< "bonafide" or the attack type
    stats::KdeCurve curve;
};

inline void write_kde_long(std::ostream& out, std::span<const NamedCurve> curves, const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "dataset,estimator,population,bandwidth,degenerate,grid,density\n";
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.curve.grid.size(); ++i)
            out << csv::escape(c.dataset) << ',' << csv::escape(c.estimator) << ',' << csv::escape(c.population) << ','
                << format_double(c.curve.bandwidth) << ',' << (c.curve.degenerate ? 1 : 0) << ','
                << format_double(c.curve.grid[i]) << ',' << format_double(c.curve.density[i]) << '\n';
}

struct OverlapEntry {
    std::string dataset;
    std::string attack_type;
    stats::OverlapMatrix matrix;
};

inline void write_overlap_long(std::ostream& out, std::span<const OverlapEntry> entries, const std::string& comment)
{
    detail::write_comment(out, comment);
    out << "dataset,attack_type,tail,fraction,estimator_a,estimator_b,ratio\n";
    for (const auto& e : entries)
        for (std::size_t i = 0; i < e.matrix.estimators.size(); ++i)
            for (std::size_t j = 0; j < e.matrix.estimators.size(); ++j)
                out << csv::escape(e.dataset) << ',' << csv::escape(e.attack_type) << ','
                    << to_string(e.matrix.tail) << ',' << format_double(e.matrix.fraction) << ','
                    << csv::escape(e.matrix.estimators[i]) << ',' << csv::escape(e.matrix.estimators[j]) << ','
                    << format_double(e.matrix.ratios[i][j]) << '\n';
}

/// Blocks of estimator x estimator grids, one per (dataset, attack, tail).
inline void write_overlap_wide(std::ostream& out, std::span<const OverlapEntry> entries, const std::string& comment)
{
    detail::write_comment(out, comment);
    if (entries.empty()) return;
    out << "dataset,attack_type,tail,estimator";
    for (const auto& e : entries.front().matrix.estimators) out << ',' << csv::escape(e);
    out << '\n';
    for (const auto& e : entries)
        for (std::size_t i = 0; i < e.matrix.estimators.size(); ++i) {
            out << csv::escape(e.dataset) << ',' << csv::escape(e.attack_type) << ',' << to_string(e.matrix.tail) << ','
                << csv::escape(e.matrix.estimators[i]);
            for (double v : e.matrix.ratios[i]) out << ',' << fixed4(v);
            out << '\n';
        }
}

// --- SVG ----------------------------------------------------------------------------

namespace svg {

inline std::string esc(std::string_view s)
{
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

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline constexpr std::array<std::string_view, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Series {
    std::string label;
    const stats::KdeCurve* curve;
};

/// Density curves on shared axes with a legend.
inline void curves(std::ostream& out, const std::string& title, std::span<const Series> series)
{
    constexpr double W = 640, H = 400, L = 60, R = 160, T = 40, B = 50;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y1 = 0.0;
    for (const auto& s : series) {
        x0 = std::min(x0, s.curve->grid.front());
        x1 = std::max(x1, s.curve->grid.back());
        for (double d : s.curve->density) y1 = std::max(y1, d);
    }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > 0.0)) y1 = 1.0;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - y / y1 * (H - T - B); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4.0;
        out << "<text x=\"" << num(px(xv)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
            << esc(fixed4(xv)) << "</text>\n";
        const double yv = y1 * i / 4.0;
        out << "<text x=\"" << L - 6 << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">" << esc(fixed4(yv))
            << "</text>\n";
    }
    out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">score</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& c = *series[k].curve;
        const auto colour = kPalette[k % kPalette.size()];
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < c.grid.size(); ++i) out << (i ? " " : "") << num(px(c.grid[i])) << ',' << num(py(c.density[i]));
        out << "\"/>\n";
        const double ly = T + 16.0 * static_cast<double>(k);
        out << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
            << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << esc(series[k].label) << "</text>\n";
    }
    out << "</svg>\n";
}

/// Estimator x estimator heatmap, white (0) to dark blue (1), values printed in cells.
inline void heatmap(std::ostream& out, const std::string& title, const stats::OverlapMatrix& m)
{
    const double cell = 56, L = 110, T = 40;
    const auto n = static_cast<double>(m.estimators.size());
    const double W = L + cell * n + 20, H = T + cell * n + 110;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << esc(title) << "</text>\n";
    for (std::size_t i = 0; i < m.estimators.size(); ++i) {
        for (std::size_t j = 0; j < m.estimators.size(); ++j) {
            const double v = std::clamp(m.ratios[i][j], 0.0, 1.0);
            const int r = static_cast<int>(std::lround(255 - 222 * v));
            const int g = static_cast<int>(std::lround(255 - 175 * v));
            const int b = static_cast<int>(std::lround(255 - 75 * v));
            const double x = L + cell * static_cast<double>(j), y = T + cell * static_cast<double>(i);
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
                << "\" fill=\"rgb(" << r << ',' << g << ',' << b << ")\" stroke=\"white\"/>\n";
            out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
                << (v > 0.55 ? "white" : "black") << "\">" << fixed4(m.ratios[i][j]).substr(0, 4) << "</text>\n";
        }
        out << "<text x=\"" << L - 6 << "\" y=\"" << T + cell * static_cast<double>(i) + cell / 2 + 4
            << "\" text-anchor=\"end\">" << esc(m.estimators[i]) << "</text>\n";
        const double cx = L + cell * static_cast<double>(i) + cell / 2, cy = T + cell * n + 10;
        out << "<text x=\"" << cx << "\" y=\"" << cy << "\" text-anchor=\"end\" transform=\"rotate(-60 " << cx << ' '
            << cy << ")\">" << esc(m.estimators[i]) << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace svg

} // namespace qmad::report
