#pragma once

// Manifest and score-table CSV loading, plus the manifest/score join.
//
//   manifest:  sample_id,path,label,attack_type,dataset
//   scores:    estimator,sample_id,score

#include "qmad/core.hpp"
#include "qmad/csv.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace qmad {

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    return in;
}

inline void write_comment(std::ostream& out, const std::string& comment)
{
    if (comment.empty()) return;
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) out << "# " << line << '\n';
}

} // namespace detail

inline DatasetManifest read_manifest(std::istream& in, const std::string& source = "<manifest>")
{
    csv::Reader reader(in, source, {"sample_id", "path", "label", "attack_type", "dataset"});
    std::vector<SampleRecord> samples;
    std::set<std::string> seen;
    std::string dataset;
    while (auto row = reader.next()) {
        auto& f = row->fields;
        SampleRecord rec;
        rec.sample_id = f[0];
        rec.path = f[1];
        rec.dataset = f[4];
        if (rec.sample_id.empty()) reader.fail(row->line, "empty sample_id");
        if (rec.dataset.empty()) reader.fail(row->line, "empty dataset");
        const auto label = to_lower(f[2]);
        if (label == "bonafide") {
            if (!f[3].empty()) reader.fail(row->line, "bona fide row carries attack_type '" + f[3] + "'");
            rec.label = Label::BonaFide;
        } else if (label == "attack") {
            if (f[3].empty()) reader.fail(row->line, "attack row lacks attack_type");
            rec.label = Label::Attack;
            rec.attack_type = f[3];
        } else {
            reader.fail(row->line, "label must be bonafide or attack, got '" + f[2] + "'");
        }
        if (dataset.empty()) dataset = rec.dataset;
        else if (rec.dataset != dataset)
            reader.fail(row->line, "mixed datasets '" + dataset + "' and '" + rec.dataset + "' in one manifest");
        if (!seen.insert(rec.sample_id).second)
            throw Error(ErrorKind::DuplicateSample, source + ":" + std::to_string(row->line) + ": " + rec.sample_id);
        samples.push_back(std::move(rec));
    }
    if (samples.empty()) throw Error(ErrorKind::EmptyBonaFide, source + ": manifest has no samples");
    return DatasetManifest(dataset, std::move(samples));
}

inline DatasetManifest load_manifest(const std::filesystem::path& path)
{
    auto in = detail::open_input(path);
    return read_manifest(in, path.string());
}

/// Writes rows in manifest order with canonical lower-case labels.
inline void write_manifest(std::ostream& out, const DatasetManifest& manifest, const std::string& comment = {})
{
    detail::write_comment(out, comment);
    out << "sample_id,path,label,attack_type,dataset\n";
    for (const auto& s : manifest.samples()) {
        out << csv::escape(s.sample_id) << ',' << csv::escape(s.path) << ',' << to_string(s.label) << ','
            << csv::escape(s.attack_type.value_or("")) << ',' << csv::escape(s.dataset) << '\n';
    }
}

/// Image path of a manifest row; relative paths resolve against the manifest's directory.
inline std::filesystem::path resolve_sample_path(const std::filesystem::path& manifest_path, const SampleRecord& rec)
{
    const std::filesystem::path p(rec.path);
    if (p.is_absolute()) return p;
    return manifest_path.parent_path() / p;
}

/// One table per estimator, in order of first appearance in the file.
inline std::vector<ScoreTable> read_scores(std::istream& in, const Registry& registry,
                                           const std::string& source = "<scores>")
{
    csv::Reader reader(in, source, {"estimator", "sample_id", "score"});
    std::vector<ScoreTable> tables;
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        const auto* est = registry.find(f[0]);
        if (!est)
            throw Error(ErrorKind::UnknownEstimator, source + ":" + std::to_string(row->line) + ": '" + f[0] + "'");
        if (f[1].empty()) reader.fail(row->line, "empty sample_id");
        const auto score = csv::parse_double(f[2]);
        if (!score) reader.fail(row->line, "score '" + f[2] + "' is not a number");
        if (!std::isfinite(*score))
            throw Error(ErrorKind::NonFiniteScore, source + ":" + std::to_string(row->line) + ": " + f[2]);
        auto it = std::ranges::find_if(tables, [&](const ScoreTable& t) { return t.estimator().name == est->name; });
        if (it == tables.end()) {
            tables.emplace_back(*est, std::map<std::string, double>{});
            it = std::prev(tables.end());
        }
        try {
            it->insert(f[1], *score);
        } catch (const Error& e) {
            throw Error(e.kind(), source + ":" + std::to_string(row->line) + ": " + e.what());
        }
    }
    return tables;
}

inline std::vector<ScoreTable> load_scores(const std::filesystem::path& path, const Registry& registry)
{
    auto in = detail::open_input(path);
    return read_scores(in, registry, path.string());
}

/// Shortest round-trip decimal representation.
inline std::string format_double(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Rows ordered by estimator (table order) then sample_id.
inline void write_scores(std::ostream& out, std::span<const ScoreTable> tables, const std::string& comment = {})
{
    detail::write_comment(out, comment);
    out << "estimator,sample_id,score\n";
    for (const auto& t : tables)
        for (const auto& [id, score] : t.entries())
            out << csv::escape(t.estimator().name) << ',' << csv::escape(id) << ',' << format_double(score) << '\n';
}

/// Merges tables of the same estimator (e.g. one score file per dataset).
inline std::vector<ScoreTable> merge_tables(std::span<const ScoreTable> tables)
{
    std::vector<ScoreTable> out;
    for (const auto& t : tables) {
        auto it = std::ranges::find_if(out, [&](const ScoreTable& o) { return o.estimator().name == t.estimator().name; });
        if (it == out.end()) {
            out.push_back(t);
            continue;
        }
        for (const auto& [id, s] : t.entries()) it->insert(id, s);
    }
    return out;
}

/// Partition of sample ids between a manifest and a score table.
struct CoverageReport {
    std::string dataset;
    std::string estimator;
    std::vector<std::string> matched;
    std::vector<std::string> manifest_only;
    std::vector<std::string> score_only;

    std::size_t manifest_size() const noexcept { return matched.size() + manifest_only.size(); }
    double coverage() const noexcept
    {
        return manifest_size() == 0 ? 0.0
                                    : static_cast<double>(matched.size()) / static_cast<double>(manifest_size());
    }
};

inline CoverageReport join(const DatasetManifest& manifest, const ScoreTable& table)
{
    CoverageReport r;
    r.dataset = manifest.name();
    r.estimator = table.estimator().name;
    std::set<std::string> in_manifest;
    for (const auto& s : manifest.samples()) {
        in_manifest.insert(s.sample_id);
        (table.contains(s.sample_id) ? r.matched : r.manifest_only).push_back(s.sample_id);
    }
    for (const auto& [id, _] : table.entries())
        if (!in_manifest.contains(id)) r.score_only.push_back(id);
    return r;
}

inline void enforce_coverage(const CoverageReport& report, double floor)
{
    if (report.coverage() + 1e-12 < floor) {
        std::ostringstream msg;
        msg << report.estimator << " covers " << report.matched.size() << '/' << report.manifest_size()
            << " samples of '" << report.dataset << "' (floor " << floor << ")";
        if (!report.manifest_only.empty()) msg << "; first missing: " << report.manifest_only.front();
        throw Error(ErrorKind::CoverageBelowFloor, msg.str());
    }
}

/// Joins and enforces `floor` (fraction of manifest samples that must be scored).
inline CoverageReport join(const DatasetManifest& manifest, const ScoreTable& table, double floor)
{
    auto r = join(manifest, table);
    enforce_coverage(r, floor);
    return r;
}

/// Restricts a manifest to the samples scored by every table (the evaluation intersection).
inline DatasetManifest restrict_to_scored(const DatasetManifest& manifest, std::span<const ScoreTable> tables)
{
    std::vector<SampleRecord> kept;
    for (const auto& s : manifest.samples())
        if (std::ranges::all_of(tables, [&](const ScoreTable& t) { return t.contains(s.sample_id); }))
            kept.push_back(s);
    if (kept.size() == manifest.samples().size()) return manifest;
    return DatasetManifest(manifest.name(), std::move(kept));
}

} // namespace qmad
