#pragma once

// Synthetic score populations: analytic oracles for the separability and error-rate
// code, and fixture directories for end-to-end runs of the CLI.

#include "qmad/core.hpp"
#include "qmad/ingest.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace qmad::synth {

/// Name of the pseudo-random engine, recorded in fixture metadata.
inline constexpr std::string_view kGenerator = "mt19937_64";

enum class DistKind { Normal, Uniform, Laplace };

/// Normal(mean, std), Uniform(low, high) or Laplace(mean, scale), stored as (p1, p2).
struct Distribution {
    DistKind kind = DistKind::Normal;
    double p1 = 0.0;
    double p2 = 1.0;

    static Distribution normal(double mean, double std) { return {DistKind::Normal, mean, std}; }
    static Distribution uniform(double low, double high) { return {DistKind::Uniform, low, high}; }
    static Distribution laplace(double mean, double scale) { return {DistKind::Laplace, mean, scale}; }

    void validate() const
    {
        switch (kind) {
        case DistKind::Normal:
            if (!(p2 > 0.0)) throw Error(ErrorKind::InvalidArgument, "normal std must be > 0");
            break;
        case DistKind::Uniform:
            if (!(p1 < p2)) throw Error(ErrorKind::InvalidArgument, "uniform needs low < high");
            break;
        case DistKind::Laplace:
            if (!(p2 > 0.0)) throw Error(ErrorKind::InvalidArgument, "laplace scale must be > 0");
            break;
        }
    }

    double mean() const noexcept { return kind == DistKind::Uniform ? 0.5 * (p1 + p2) : p1; }

    double variance() const noexcept
    {
        switch (kind) {
        case DistKind::Normal: return p2 * p2;
        case DistKind::Uniform: return (p2 - p1) * (p2 - p1) / 12.0;
        case DistKind::Laplace: return 2.0 * p2 * p2;
        }
        return 0.0;
    }

    template <class Engine>
    double sample(Engine& rng) const
    {
        switch (kind) {
        case DistKind::Normal: return std::normal_distribution<double>(p1, p2)(rng);
        case DistKind::Uniform: return std::uniform_real_distribution<double>(p1, p2)(rng);
        case DistKind::Laplace: {
            // inverse CDF on u in (-1/2, 1/2)
            const double u = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
            const double sign = u < 0.0 ? -1.0 : 1.0;
            return p1 - p2 * sign * std::log1p(-2.0 * std::abs(u));
        }
        }
        return 0.0;
    }
};

struct Population {
    Label label = Label::BonaFide;
    std::optional<std::string> attack_type;
    Distribution distribution;
    std::size_t count = 0;
};

struct SynthSpec {
    std::string dataset = "synth";
    EstimatorDescriptor estimator{"MagFace", Family::FIQA, NativeOrder::Increasing, MadPolarity::BonaFideHigh};
    std::vector<Population> populations;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (dataset.empty()) throw Error(ErrorKind::InvalidArgument, "synth dataset name must be non-empty");
        if (populations.empty()) throw Error(ErrorKind::InvalidArgument, "synth spec has no populations");
        for (const auto& p : populations) {
            if (p.count < 1) throw Error(ErrorKind::InvalidArgument, "population count must be >= 1");
            if ((p.label == Label::Attack) != p.attack_type.has_value())
                throw Error(ErrorKind::InvalidArgument, "attack_type must be given iff label is attack");
            p.distribution.validate();
        }
    }
};

struct Generated {
    DatasetManifest manifest;
    ScoreTable table;
};

/// Sample id: synth-<dataset>-<label>-<index>, index running over the whole dataset.
inline std::string sample_id(const std::string& dataset, Label label, std::size_t index)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06zu", index);
    return "synth-" + dataset + "-" + std::string(to_string(label)) + "-" + buf;
}

/// Deterministic for a fixed seed. Populations are drawn in order from one engine.
inline Generated generate(const SynthSpec& spec)
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::vector<SampleRecord> samples;
    std::map<std::string, double> scores;
    std::size_t index = 0;
    for (const auto& pop : spec.populations) {
        for (std::size_t i = 0; i < pop.count; ++i, ++index) {
            auto id = sample_id(spec.dataset, pop.label, index);
            scores.emplace(id, pop.distribution.sample(rng));
            samples.push_back({std::move(id), pop.label, pop.attack_type, spec.dataset, ""});
        }
    }
    return {DatasetManifest(spec.dataset, std::move(samples)), ScoreTable(spec.estimator, std::move(scores))};
}

/// Closed-form Fisher discriminant ratio of two populations' distributions.
inline double analytic_fdr(const Population& attack, const Population& bona_fide)
{
    const double denom = attack.distribution.variance() + bona_fide.distribution.variance();
    if (denom == 0.0) throw Error(ErrorKind::ZeroVariancePair, "both populations have zero variance");
    const double d = attack.distribution.mean() - bona_fide.distribution.mean();
    return d * d / denom;
}

// ---------------------------------------------------------------------------
// Fixture files
//
// {
//   "seed": 7,
//   "datasets": [
//     { "name": "alpha",
//       "populations": [
//         { "label": "bonafide", "count": 400,
//           "scores": { "MagFace": { "dist": "normal", "mean": 2, "std": 1 }, ... } },
//         { "label": "attack", "attack_type": "opencv", "count": 300, "scores": { ... } } ] } ]
// }
//
// Every population of a dataset must list the same estimators.

struct FixtureDataset {
    std::string name;
    std::vector<std::string> estimators;
    /// populations[e] is the population list for estimators[e]
    std::vector<std::vector<Population>> populations;
};

struct FixtureSpec {
    std::uint64_t seed = 0;
    std::vector<FixtureDataset> datasets;
};

inline Distribution parse_distribution(const nlohmann::json& j)
{
    const auto kind = to_lower(j.at("dist").get<std::string>());
    Distribution d;
    if (kind == "normal") d = Distribution::normal(j.at("mean").get<double>(), j.at("std").get<double>());
    else if (kind == "uniform") d = Distribution::uniform(j.at("low").get<double>(), j.at("high").get<double>());
    else if (kind == "laplace") d = Distribution::laplace(j.at("mean").get<double>(), j.at("scale").get<double>());
    else throw Error(ErrorKind::ParseError, "unknown distribution '" + kind + "'");
    d.validate();
    return d;
}

inline FixtureSpec parse_fixture_spec(const nlohmann::json& j)
{
    try {
        FixtureSpec spec;
        spec.seed = j.value("seed", std::uint64_t{0});
        for (const auto& jd : j.at("datasets")) {
            FixtureDataset ds;
            ds.name = jd.at("name").get<std::string>();
            const auto& pops = jd.at("populations");
            if (pops.empty()) throw Error(ErrorKind::ParseError, "dataset '" + ds.name + "' has no populations");
            for (const auto& [est, _] : pops.front().at("scores").items()) ds.estimators.push_back(est);
            ds.populations.resize(ds.estimators.size());
            for (const auto& jp : pops) {
                Population p;
                const auto label = to_lower(jp.at("label").get<std::string>());
                if (label == "bonafide") p.label = Label::BonaFide;
                else if (label == "attack") p.label = Label::Attack;
                else throw Error(ErrorKind::ParseError, "label must be bonafide or attack");
                if (jp.contains("attack_type")) p.attack_type = jp.at("attack_type").get<std::string>();
                p.count = jp.at("count").get<std::size_t>();
                const auto& scores = jp.at("scores");
                if (scores.size() != ds.estimators.size())
                    throw Error(ErrorKind::ParseError, "populations of '" + ds.name + "' list different estimators");
                for (std::size_t e = 0; e < ds.estimators.size(); ++e) {
                    p.distribution = parse_distribution(scores.at(ds.estimators[e]));
                    ds.populations[e].push_back(p);
                }
            }
            spec.datasets.push_back(std::move(ds));
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("fixture spec: ") + e.what());
    }
}

inline FixtureSpec load_fixture_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    try {
        return parse_fixture_spec(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

/// Per-(dataset, estimator) seed, so estimators of one dataset draw independent streams.
inline std::uint64_t derived_seed(std::uint64_t seed, const std::string& dataset, const std::string& estimator)
{
    return fnv1a(estimator, fnv1a(dataset, fnv1a(std::to_string(seed))));
}

struct FixtureFiles {
    std::vector<std::filesystem::path> manifests;
    std::vector<std::filesystem::path> scores;
};

/// Writes <dataset>.manifest.csv and <dataset>.scores.csv for every dataset.
inline FixtureFiles write_fixture(const FixtureSpec& spec, const Registry& registry, const std::filesystem::path& dir,
                                  const std::string& comment = {})
{
    std::filesystem::create_directories(dir);
    FixtureFiles files;
    const std::string meta = (comment.empty() ? "" : comment + "\n") + "generator=" + std::string(kGenerator) +
                             " seed=" + std::to_string(spec.seed);
    for (const auto& ds : spec.datasets) {
        std::vector<ScoreTable> tables;
        std::optional<DatasetManifest> manifest;
        for (std::size_t e = 0; e < ds.estimators.size(); ++e) {
            SynthSpec s{ds.name, registry.at(ds.estimators[e]), ds.populations[e],
                        derived_seed(spec.seed, ds.name, ds.estimators[e])};
            auto g = generate(s);
            if (!manifest) manifest = std::move(g.manifest);
            tables.push_back(std::move(g.table));
        }
        if (!manifest) throw Error(ErrorKind::InvalidArgument, "dataset '" + ds.name + "' lists no estimators");
        const auto mpath = dir / (ds.name + ".manifest.csv");
        const auto spath = dir / (ds.name + ".scores.csv");
        {
            std::ofstream out(mpath, std::ios::binary);
            write_manifest(out, *manifest, meta);
        }
        {
            std::ofstream out(spath, std::ios::binary);
            write_scores(out, tables, meta);
        }
        files.manifests.push_back(mpath);
        files.scores.push_back(spath);
    }
    return files;
}

} // namespace qmad::synth
