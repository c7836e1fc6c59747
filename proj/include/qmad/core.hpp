#pragma once

// Domain types shared by every module. No I/O and no pixel math here.

#include "qmad/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qmad {

enum class Family { FIQA, IQA };

/// Native ordering of a quality measure: does a higher raw score mean better quality?
enum class NativeOrder { Increasing, Decreasing };

/// Which population is expected to receive the higher *raw* score when the measure
/// is used as a detection score. BonaFideLow scores are negated on normalization.
enum class MadPolarity { BonaFideHigh, BonaFideLow };

enum class Label { BonaFide, Attack };

constexpr std::string_view to_string(Family f) noexcept { return f == Family::FIQA ? "FIQA" : "IQA"; }
constexpr std::string_view to_string(NativeOrder o) noexcept
{
    return o == NativeOrder::Increasing ? "increasing" : "decreasing";
}
constexpr std::string_view to_string(MadPolarity p) noexcept
{
    return p == MadPolarity::BonaFideHigh ? "bonafide_high" : "bonafide_low";
}
constexpr std::string_view to_string(Label l) noexcept { return l == Label::BonaFide ? "bonafide" : "attack"; }

constexpr MadPolarity flipped(MadPolarity p) noexcept
{
    return p == MadPolarity::BonaFideHigh ? MadPolarity::BonaFideLow : MadPolarity::BonaFideHigh;
}

inline std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// 64-bit FNV-1a, used for the provenance hashes written into CSV headers.
constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept
{
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

struct EstimatorDescriptor {
    std::string name;
    Family family = Family::IQA;
    NativeOrder native_order = NativeOrder::Increasing;
    MadPolarity mad_polarity = MadPolarity::BonaFideHigh;

    friend bool operator==(const EstimatorDescriptor&, const EstimatorDescriptor&) = default;
};

/// Set of known quality measures, looked up case-insensitively by name.
class Registry {
public:
    Registry() = default;

    explicit Registry(std::vector<EstimatorDescriptor> estimators)
    {
        for (auto& e : estimators) add(std::move(e));
    }

    /// The ten reference measures. An inverted measure is one whose
    /// detection polarity is the reverse of its native ordering.
    static Registry standard()
    {
        auto make = [](std::string name, Family fam, NativeOrder order, bool inverted) {
            const bool bona_fide_high = (order == NativeOrder::Increasing) != inverted;
            return EstimatorDescriptor{std::move(name), fam, order,
                                       bona_fide_high ? MadPolarity::BonaFideHigh : MadPolarity::BonaFideLow};
        };
        using enum NativeOrder;
        return Registry({
            make("MagFace", Family::FIQA, Increasing, false),
            make("SDD-FIQA", Family::FIQA, Increasing, false),
            make("SER-FIQ", Family::FIQA, Increasing, false),
            make("FaceQnet", Family::FIQA, Increasing, false),
            make("rankIQ", Family::FIQA, Increasing, true),
            make("BRISQUE", Family::IQA, Decreasing, false),
            make("DBCNN", Family::IQA, Increasing, true),
            make("CNNIQA", Family::IQA, Decreasing, true),
            make("UNIQUE", Family::IQA, Increasing, false),
            make("dipIQ", Family::IQA, Increasing, true),
        });
    }

    void add(EstimatorDescriptor e)
    {
        if (e.name.empty()) throw Error(ErrorKind::InvalidArgument, "estimator name must be non-empty");
        if (find(e.name)) throw Error(ErrorKind::InvalidArgument, "duplicate estimator '" + e.name + "'");
        estimators_.push_back(std::move(e));
    }

    const EstimatorDescriptor* find(std::string_view name) const noexcept
    {
        const auto key = to_lower(name);
        for (const auto& e : estimators_)
            if (to_lower(e.name) == key) return &e;
        return nullptr;
    }

    const EstimatorDescriptor& at(std::string_view name) const
    {
        if (const auto* e = find(name)) return *e;
        throw Error(ErrorKind::UnknownEstimator, std::string(name));
    }

    const std::vector<EstimatorDescriptor>& estimators() const noexcept { return estimators_; }

    std::uint64_t hash() const noexcept
    {
        std::uint64_t h = fnv1a("");
        for (const auto& e : estimators_) {
            h = fnv1a(e.name, h);
            h = fnv1a(to_string(e.family), h);
            h = fnv1a(to_string(e.native_order), h);
            h = fnv1a(to_string(e.mad_polarity), h);
        }
        return h;
    }

private:
    std::vector<EstimatorDescriptor> estimators_;
};

struct SampleRecord {
    std::string sample_id;
    Label label = Label::BonaFide;
    std::optional<std::string> attack_type; ///< present iff label == Attack
    std::string dataset;
    std::string path; ///< as written in the manifest (relative to it); may be empty for score-only fixtures

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Raw or normalized scores of one estimator, keyed (and ordered) by sample_id.
class ScoreTable {
public:
    ScoreTable() = default;

    ScoreTable(EstimatorDescriptor estimator, std::span<const std::pair<std::string, double>> entries,
               bool normalized = false)
        : estimator_(std::move(estimator))
        , normalized_(normalized)
    {
        for (const auto& [id, score] : entries) insert(id, score);
    }

    ScoreTable(EstimatorDescriptor estimator, std::map<std::string, double> entries, bool normalized = false)
        : estimator_(std::move(estimator))
        , normalized_(normalized)
    {
        for (const auto& [id, score] : entries) check_finite(id, score);
        entries_ = std::move(entries);
    }

    void insert(const std::string& sample_id, double score)
    {
        check_finite(sample_id, score);
        if (!entries_.emplace(sample_id, score).second)
            throw Error(ErrorKind::DuplicateSample, "sample '" + sample_id + "' scored twice by " + estimator_.name);
    }

    const EstimatorDescriptor& estimator() const noexcept { return estimator_; }
    const std::map<std::string, double>& entries() const noexcept { return entries_; }
    bool normalized() const noexcept { return normalized_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(const std::string& id) const { return entries_.contains(id); }

    double at(const std::string& id) const
    {
        const auto it = entries_.find(id);
        if (it == entries_.end())
            throw Error(ErrorKind::SampleSetMismatch, "no " + estimator_.name + " score for '" + id + "'");
        return it->second;
    }

    /// Gathers the scores of `ids` in order.
    std::vector<double> gather(std::span<const std::string> ids) const
    {
        std::vector<double> out;
        out.reserve(ids.size());
        for (const auto& id : ids) out.push_back(at(id));
        return out;
    }

    friend bool operator==(const ScoreTable&, const ScoreTable&) = default;

private:
    static void check_finite(const std::string& id, double score)
    {
        if (!std::isfinite(score))
            throw Error(ErrorKind::NonFiniteScore, "score for '" + id + "' is not finite");
    }

    EstimatorDescriptor estimator_;
    std::map<std::string, double> entries_;
    bool normalized_ = false;
};

/// Bona fide set plus named attack sets of one morphing dataset.
class DatasetManifest {
public:
    DatasetManifest() = default;

    DatasetManifest(std::string dataset_name, std::vector<SampleRecord> samples)
        : name_(std::move(dataset_name))
        , samples_(std::move(samples))
    {
        std::set<std::string> ids;
        bool any_bona_fide = false;
        for (const auto& s : samples_) {
            if (!ids.insert(s.sample_id).second) throw Error(ErrorKind::DuplicateSample, s.sample_id);
            if ((s.label == Label::Attack) != s.attack_type.has_value())
                throw Error(ErrorKind::InvalidArgument,
                            "sample '" + s.sample_id + "': attack_type must be present iff label is attack");
            if (s.attack_type && s.attack_type->empty())
                throw Error(ErrorKind::InvalidArgument, "sample '" + s.sample_id + "': empty attack_type");
            if (s.label == Label::BonaFide) any_bona_fide = true;
            else attack_types_.insert(*s.attack_type);
        }
        if (!any_bona_fide) throw Error(ErrorKind::EmptyBonaFide, "dataset '" + name_ + "' has no bona fide samples");
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<SampleRecord>& samples() const noexcept { return samples_; }
    const std::set<std::string>& attack_types() const noexcept { return attack_types_; }

    std::vector<std::string> bona_fide_ids() const
    {
        std::vector<std::string> out;
        for (const auto& s : samples_)
            if (s.label == Label::BonaFide) out.push_back(s.sample_id);
        return out;
    }

    std::vector<std::string> attack_ids(std::string_view attack_type) const
    {
        std::vector<std::string> out;
        for (const auto& s : samples_)
            if (s.attack_type && *s.attack_type == attack_type) out.push_back(s.sample_id);
        return out;
    }

    std::vector<std::string> all_ids() const
    {
        std::vector<std::string> out;
        out.reserve(samples_.size());
        for (const auto& s : samples_) out.push_back(s.sample_id);
        return out;
    }

private:
    std::string name_;
    std::vector<SampleRecord> samples_;
    std::set<std::string> attack_types_;
};

/// Population moments of a score list. std is the population (divide-by-N) deviation.
struct DistributionSummary {
    double mean = 0.0;
    double std = 0.0;
    std::size_t count = 0;
};

/// Two-pass mean / population std. Values are summed in sorted order so the result
/// is bit-identical for any permutation of the input.
inline DistributionSummary summarize(std::span<const double> scores)
{
    if (scores.empty()) throw Error(ErrorKind::EmptyPopulation, "summarize: no scores");
    std::vector<double> v(scores.begin(), scores.end());
    for (double x : v)
        if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteScore, "summarize: non-finite score");
    std::ranges::sort(v);
    const auto n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / n), v.size()};
}

inline double normalize_score(double raw, MadPolarity polarity) noexcept
{
    return polarity == MadPolarity::BonaFideLow ? -raw : raw;
}

/// Maps raw scores into detection space where higher always means more bona-fide-like.
/// The only place in the library where scores are negated.
inline ScoreTable normalize_scores(const ScoreTable& table)
{
    std::map<std::string, double> out;
    const auto polarity = table.estimator().mad_polarity;
    for (const auto& [id, raw] : table.entries()) out.emplace_hint(out.end(), id, normalize_score(raw, polarity));
    return ScoreTable(table.estimator(), std::move(out), true);
}

} // namespace qmad
