#pragma once

// ISO/IEC 30107-3 style error rates over normalized detection scores, and the
// intra-dataset (EER) and threshold-transfer (fixed BPCER) protocols.
//
// Convention: a sample is classified bona fide iff score >= threshold.

#include "qmad/core.hpp"
#include "qmad/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace qmad::madeval {

struct DecisionThreshold {
    double value = 0.0; ///< normalized-score space
    std::string source_dataset;
    double target_bpcer = 0.2;
    double achieved_bpcer = 0.0; ///< exact empirical BPCER of the source bona fide set at `value`
};

inline Label classify(double normalized_score, double threshold) noexcept
{
    return normalized_score >= threshold ? Label::BonaFide : Label::Attack;
}

inline Label classify(double normalized_score, const DecisionThreshold& t) noexcept
{
    return classify(normalized_score, t.value);
}

/// Fraction of bona fide scores classified as attacks (score < threshold).
inline double bpcer(std::span<const double> bona_fide, double threshold)
{
    if (bona_fide.empty()) throw Error(ErrorKind::EmptyPopulation, "bpcer: no bona fide scores");
    const auto wrong = std::ranges::count_if(bona_fide, [&](double s) { return classify(s, threshold) == Label::Attack; });
    return static_cast<double>(wrong) / static_cast<double>(bona_fide.size());
}

inline double bpcer(std::span<const double> bona_fide, const DecisionThreshold& t) { return bpcer(bona_fide, t.value); }

/// Fraction of attack scores classified as bona fide (score >= threshold).
inline double apcer(std::span<const double> attacks, double threshold)
{
    if (attacks.empty()) throw Error(ErrorKind::EmptyPopulation, "apcer: no attack scores");
    const auto wrong = std::ranges::count_if(attacks, [&](double s) { return classify(s, threshold) == Label::BonaFide; });
    return static_cast<double>(wrong) / static_cast<double>(attacks.size());
}

inline double apcer(std::span<const double> attacks, const DecisionThreshold& t) { return apcer(attacks, t.value); }

inline double acer(double apcer_value, double bpcer_value) noexcept { return (apcer_value + bpcer_value) / 2.0; }

/// Empirical target quantile of the bona fide scores: the observed score whose BPCER is
/// the largest value not exceeding `target`. Finite sets generally undershoot the target;
/// the achieved value is reported.
inline DecisionThreshold threshold_at_bpcer(std::span<const double> bona_fide, double target,
                                            std::string source_dataset = {})
{
    if (bona_fide.empty()) throw Error(ErrorKind::EmptyPopulation, "threshold_at_bpcer: no bona fide scores");
    if (!(target > 0.0 && target < 1.0)) throw Error(ErrorKind::InvalidArgument, "target BPCER must lie in (0, 1)");
    std::vector<double> s(bona_fide.begin(), bona_fide.end());
    std::ranges::sort(s);
    const auto n = static_cast<double>(s.size());
    DecisionThreshold t{s.front(), std::move(source_dataset), target, 0.0};
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] == s[i - 1]) continue;
        const double rate = static_cast<double>(i) / n; // scores strictly below s[i]
        if (rate > target) break;
        t.value = s[i];
        t.achieved_bpcer = rate;
    }
    return t;
}

struct EerResult {
    double eer = 0.0;       ///< (APCER + BPCER) / 2 at the chosen operating point
    double threshold = 0.0; ///< may be +inf (everything classified as attack)
    double apcer = 0.0;
    double bpcer = 0.0;
};

/// Exhaustive sweep over every distinct observed score plus a +inf sentinel; picks the
/// point minimizing |APCER - BPCER|, ties resolved toward the lower threshold.
inline EerResult eer(std::span<const double> bona_fide, std::span<const double> attacks)
{
    if (bona_fide.empty() || attacks.empty()) throw Error(ErrorKind::EmptyPopulation, "eer: empty population");
    std::vector<double> b(bona_fide.begin(), bona_fide.end());
    std::vector<double> a(attacks.begin(), attacks.end());
    std::ranges::sort(b);
    std::ranges::sort(a);
    std::vector<double> candidates;
    candidates.reserve(a.size() + b.size() + 1);
    std::ranges::merge(a, b, std::back_inserter(candidates));
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    candidates.push_back(std::numeric_limits<double>::infinity());

    const auto nb = static_cast<double>(b.size());
    const auto na = static_cast<double>(a.size());
    std::size_t ib = 0; // bona fide scores < t
    std::size_t ia = 0; // attack scores < t
    EerResult best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (double t : candidates) {
        while (ib < b.size() && b[ib] < t) ++ib;
        while (ia < a.size() && a[ia] < t) ++ia;
        const double bp = static_cast<double>(ib) / nb;
        const double ap = static_cast<double>(a.size() - ia) / na;
        const double gap = std::abs(ap - bp);
        if (gap < best_gap) {
            best_gap = gap;
            best = {acer(ap, bp), t, ap, bp};
        }
    }
    return best;
}

/// One evaluated (estimator, threshold source, evaluation set, attack) cell.
struct MetricRow {
    std::string estimator;
    std::string source_dataset;
    std::string eval_dataset;
    std::string attack_type;
    double threshold = 0.0;
    double apcer = 0.0;
    double bpcer = 0.0;
    double acer = 0.0;
    std::optional<double> eer; ///< intra-dataset rows only

    friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

/// BPCER of one evaluation dataset's bona fide set under a transferred threshold.
struct BpcerRow {
    std::string estimator;
    std::string source_dataset;
    std::string eval_dataset;
    double threshold = 0.0;
    double source_achieved_bpcer = 0.0;
    double bpcer = 0.0;

    friend bool operator==(const BpcerRow&, const BpcerRow&) = default;
};

/// Unweighted mean of a metric over rows: mean EER per estimator (intra, source "*")
/// or mean ACER per (estimator, source) (cross).
struct MeanRow {
    std::string estimator;
    std::string source_dataset;
    double value = 0.0;

    friend bool operator==(const MeanRow&, const MeanRow&) = default;
};

struct MetricReport {
    double target_bpcer = 0.0; ///< 0 for intra-dataset reports
    std::vector<MetricRow> rows;
    std::vector<BpcerRow> bpcer_rows;
    std::vector<MeanRow> means;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

namespace detail {

inline const ScoreTable& table_for(std::span<const ScoreTable> normalized, const std::string& name)
{
    for (const auto& t : normalized)
        if (t.estimator().name == name) return t;
    throw Error(ErrorKind::UnknownEstimator, name);
}

inline std::vector<ScoreTable> normalize_all(std::span<const ScoreTable> tables)
{
    std::vector<ScoreTable> out;
    out.reserve(tables.size());
    for (const auto& t : tables) out.push_back(t.normalized() ? t : normalize_scores(t));
    std::ranges::sort(out, {}, [](const ScoreTable& t) { return t.estimator().name; });
    return out;
}

inline void sort_rows(MetricReport& r)
{
    std::ranges::sort(r.rows, {}, [](const MetricRow& m) {
        return std::tie(m.estimator, m.source_dataset, m.eval_dataset, m.attack_type);
    });
    std::ranges::sort(r.bpcer_rows, {}, [](const BpcerRow& m) {
        return std::tie(m.estimator, m.source_dataset, m.eval_dataset);
    });
    std::ranges::sort(r.means, {}, [](const MeanRow& m) { return std::tie(m.estimator, m.source_dataset); });
}

} // namespace detail

/// EER of bona fide vs each attack type within each dataset, plus the mean EER per
/// estimator over all (dataset, attack) rows. Tables hold raw scores; they are
/// normalized here.
inline MetricReport intra_eval(std::span<const DatasetManifest> manifests, std::span<const ScoreTable> tables,
                               std::size_t threads = 1)
{
    const auto normalized = detail::normalize_all(tables);
    struct Task {
        const ScoreTable* table;
        const DatasetManifest* manifest;
        std::string attack;
    };
    std::vector<Task> tasks;
    for (const auto& t : normalized)
        for (const auto& m : manifests)
            for (const auto& attack : m.attack_types()) tasks.push_back({&t, &m, attack});

    MetricReport report;
    report.rows.resize(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        const auto& [table, manifest, attack] = tasks[i];
        const auto bf = table->gather(manifest->bona_fide_ids());
        const auto at = table->gather(manifest->attack_ids(attack));
        const auto e = eer(bf, at);
        report.rows[i] = {table->estimator().name, manifest->name(), manifest->name(), attack,
                          e.threshold, e.apcer, e.bpcer, acer(e.apcer, e.bpcer), e.eer};
    });
    for (const auto& t : normalized) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : report.rows)
            if (r.estimator == t.estimator().name) {
                sum += *r.eer;
                ++n;
            }
        if (n) report.means.push_back({t.estimator().name, "*", sum / static_cast<double>(n)});
    }
    detail::sort_rows(report);
    return report;
}

/// Threshold transfer: for every estimator and source dataset, fix the threshold at
/// `target_bpcer` on the source bona fide set, then measure BPCER on every dataset's
/// bona fide set and APCER / ACER on every attack type.
inline MetricReport cross_eval(std::span<const DatasetManifest> manifests, std::span<const ScoreTable> tables,
                               double target_bpcer = 0.2, std::size_t threads = 1)
{
    if (manifests.empty()) throw Error(ErrorKind::InvalidArgument, "cross_eval needs at least one dataset");
    if (!(target_bpcer > 0.0 && target_bpcer < 1.0))
        throw Error(ErrorKind::InvalidArgument, "target BPCER must lie in (0, 1)");
    const auto normalized = detail::normalize_all(tables);

    struct Task {
        const ScoreTable* table;
        const DatasetManifest* source;
    };
    struct Partial {
        std::vector<MetricRow> rows;
        std::vector<BpcerRow> bpcer_rows;
        MeanRow mean;
    };
    std::vector<Task> tasks;
    for (const auto& t : normalized)
        for (const auto& m : manifests) tasks.push_back({&t, &m});

    std::vector<Partial> parts(tasks.size());
    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        const auto& [table, source] = tasks[i];
        const auto& name = table->estimator().name;
        const auto thr = threshold_at_bpcer(table->gather(source->bona_fide_ids()), target_bpcer, source->name());
        auto& part = parts[i];
        double acer_sum = 0.0;
        for (const auto& eval : manifests) {
            const double bp = bpcer(table->gather(eval.bona_fide_ids()), thr);
            part.bpcer_rows.push_back({name, source->name(), eval.name(), thr.value, thr.achieved_bpcer, bp});
            for (const auto& attack : eval.attack_types()) {
                const double ap = apcer(table->gather(eval.attack_ids(attack)), thr);
                const double ac = acer(ap, bp);
                part.rows.push_back({name, source->name(), eval.name(), attack, thr.value, ap, bp, ac, std::nullopt});
                acer_sum += ac;
            }
        }
        part.mean = {name, source->name(),
                     part.rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : acer_sum / static_cast<double>(part.rows.size())};
    });

    MetricReport report;
    report.target_bpcer = target_bpcer;
    for (auto& p : parts) {
        std::ranges::move(p.rows, std::back_inserter(report.rows));
        std::ranges::move(p.bpcer_rows, std::back_inserter(report.bpcer_rows));
        if (!std::isnan(p.mean.value)) report.means.push_back(std::move(p.mean));
    }
    detail::sort_rows(report);
    return report;
}

} // namespace qmad::madeval
