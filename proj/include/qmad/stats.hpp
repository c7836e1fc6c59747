#pragma once

// Separability and distribution analytics over score populations.

#include "qmad/core.hpp"
#include "qmad/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qmad::stats {

/// Fisher discriminant ratio. `infinite` marks two zero-variance populations with
/// different means; `value` is +inf in that case.
struct FdrResult {
    double value = 0.0;
    bool infinite = false;
};

/// (mu_attack - mu_bonafide)^2 / (sigma_attack^2 + sigma_bonafide^2)
inline FdrResult fdr(const DistributionSummary& attack, const DistributionSummary& bona_fide) noexcept
{
    const double diff = attack.mean - bona_fide.mean;
    const double denom = attack.std * attack.std + bona_fide.std * bona_fide.std;
    if (denom == 0.0) {
        if (diff == 0.0) return {0.0, false};
        return {std::numeric_limits<double>::infinity(), true};
    }
    return {diff * diff / denom, false};
}

inline FdrResult fdr(std::span<const double> attack, std::span<const double> bona_fide)
{
    return fdr(summarize(attack), summarize(bona_fide));
}

struct KdeCurve {
    std::vector<double> grid;
    std::vector<double> density;
    double bandwidth = 0.0;
    bool degenerate = false; ///< all scores equal; bandwidth is the 1e-6|v| + 1e-12 floor
};

/// Silverman's rule of thumb, 1.06 * sigma * n^(-1/5) with the population sigma.
inline double silverman_bandwidth(std::span<const double> scores)
{
    const auto s = summarize(scores);
    return 1.06 * s.std * std::pow(static_cast<double>(s.count), -0.2);
}

/// Gaussian KDE evaluated on `grid_points` evenly spaced points spanning [min - 3h, max + 3h].
inline KdeCurve kde(std::span<const double> scores, std::size_t grid_points = 512,
                    std::optional<double> bandwidth = std::nullopt)
{
    if (scores.size() < 2) throw Error(ErrorKind::InvalidArgument, "kde needs at least 2 scores");
    if (grid_points < 2) throw Error(ErrorKind::InvalidArgument, "kde needs at least 2 grid points");
    if (bandwidth && !(*bandwidth > 0.0)) throw Error(ErrorKind::InvalidArgument, "kde bandwidth must be positive");

    std::vector<double> xs(scores.begin(), scores.end());
    std::ranges::sort(xs);
    const double lo = xs.front();
    const double hi = xs.back();
    for (double x : xs)
        if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteScore, "kde: non-finite score");

    KdeCurve curve;
    if (lo == hi) {
        curve.degenerate = true;
        curve.bandwidth = 1e-6 * std::abs(lo) + 1e-12;
    } else {
        curve.bandwidth = bandwidth ? *bandwidth : silverman_bandwidth(xs);
    }
    const double h = curve.bandwidth;
    const double start = lo - 3.0 * h;
    const double step = (hi + 3.0 * h - start) / static_cast<double>(grid_points - 1);
    const double norm = 1.0 / (static_cast<double>(xs.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    const double cutoff = 10.0 * h; // exp(-50) is below double resolution of the sum

    curve.grid.resize(grid_points);
    curve.density.resize(grid_points);
    for (std::size_t g = 0; g < grid_points; ++g) {
        const double x = start + step * static_cast<double>(g);
        const auto first = std::ranges::lower_bound(xs, x - cutoff);
        const auto last = std::ranges::upper_bound(xs, x + cutoff);
        double acc = 0.0;
        for (auto it = first; it != last; ++it) {
            const double u = (x - *it) / h;
            acc += std::exp(-0.5 * u * u);
        }
        curve.grid[g] = x;
        curve.density[g] = acc * norm;
    }
    return curve;
}

/// Trapezoidal integral of a curve over its grid.
inline double trapezoid(std::span<const double> grid, std::span<const double> values)
{
    double acc = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    return acc;
}

enum class Tail { Top, Bottom };

constexpr std::string_view to_string(Tail t) noexcept { return t == Tail::Top ? "top" : "bottom"; }

/// Number of samples in a tail: ceil(fraction * n), guarded against representation error.
inline std::size_t tail_size(double fraction, std::size_t n)
{
    const double k = std::ceil(fraction * static_cast<double>(n) - 1e-9);
    return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

/// Ids of the k lowest- (Bottom) or highest- (Top) quality samples in native quality
/// space, ties broken by ascending sample_id.
inline std::vector<std::string> quality_tail(const ScoreTable& table, double fraction, Tail tail)
{
    const double sign = table.estimator().native_order == NativeOrder::Increasing ? 1.0 : -1.0;
    std::vector<std::pair<double, const std::string*>> ranked;
    ranked.reserve(table.size());
    for (const auto& [id, raw] : table.entries()) ranked.emplace_back(sign * raw, &id);
    std::ranges::stable_sort(ranked, [tail](const auto& a, const auto& b) {
        return tail == Tail::Bottom ? a.first < b.first : a.first > b.first;
    }); // entries() iterates in id order, so the stable sort keeps ties id-ascending
    const auto k = tail_size(fraction, ranked.size());
    std::vector<std::string> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(*ranked[i].second);
    std::ranges::sort(out);
    return out;
}

/// |tail(a) intersect tail(b)| / k over two tables covering the same samples.
inline double overlap_ratio(const ScoreTable& a, const ScoreTable& b, double fraction, Tail tail)
{
    if (!(fraction > 0.0 && fraction <= 0.5))
        throw Error(ErrorKind::InvalidArgument, "overlap fraction must lie in (0, 0.5]");
    if (a.size() != b.size() ||
        !std::ranges::equal(a.entries(), b.entries(), [](const auto& x, const auto& y) { return x.first == y.first; }))
        throw Error(ErrorKind::SampleSetMismatch,
                    a.estimator().name + " and " + b.estimator().name + " score different samples");
    if (a.size() == 0) throw Error(ErrorKind::EmptyPopulation, "overlap_ratio on empty tables");
    const auto ta = quality_tail(a, fraction, tail);
    const auto tb = quality_tail(b, fraction, tail);
    std::vector<std::string> both;
    std::ranges::set_intersection(ta, tb, std::back_inserter(both));
    return static_cast<double>(both.size()) / static_cast<double>(ta.size());
}

struct OverlapMatrix {
    std::vector<std::string> estimators;
    std::vector<std::vector<double>> ratios;
    Tail tail = Tail::Bottom;
    double fraction = 0.1;
};

inline OverlapMatrix overlap_matrix(std::span<const ScoreTable> tables, double fraction, Tail tail,
                                    std::size_t threads = 1)
{
    OverlapMatrix m;
    m.tail = tail;
    m.fraction = fraction;
    const auto n = tables.size();
    for (const auto& t : tables) m.estimators.push_back(t.estimator().name);
    m.ratios.assign(n, std::vector<double>(n, 1.0));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<double> values(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t p) {
        values[p] = overlap_ratio(tables[pairs[p].first], tables[pairs[p].second], fraction, tail);
    });
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        m.ratios[i][j] = m.ratios[j][i] = values[p];
    }
    return m;
}

/// Sub-table restricted to `ids` (all must be present).
inline ScoreTable subset(const ScoreTable& table, std::span<const std::string> ids)
{
    std::map<std::string, double> out;
    for (const auto& id : ids) out.emplace(id, table.at(id));
    return ScoreTable(table.estimator(), std::move(out), table.normalized());
}

} // namespace qmad::stats
