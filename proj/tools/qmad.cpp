// qmad: command-line front end for scoring, separability, detection protocols,
// distribution plots and tail-overlap analysis.

#include "qmad/brisque.hpp"
#include "qmad/ingest.hpp"
#include "qmad/madeval.hpp"
#include "qmad/report.hpp"
#include "qmad/stats.hpp"
#include "qmad/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#ifndef QMAD_DEFAULT_MODEL
#define QMAD_DEFAULT_MODEL "data/brisque_svr.txt"
#endif

namespace fs = std::filesystem;
using namespace qmad;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kInput = 2, kPartial = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string subcommand;
    std::vector<std::string> manifests;
    std::vector<std::string> scores;
    std::string model = QMAD_DEFAULT_MODEL;
    std::string out;
    std::string spec;
    std::string config_file;
    double target_bpcer = 0.2;
    double fraction = 0.1;
    std::size_t grid = 512;
    std::size_t threads = default_thread_count();
    bool strict = true;
    std::optional<double> min_coverage;

    double coverage_floor() const { return min_coverage.value_or(strict ? 1.0 : 0.0); }

    /// Hash of every setting that affects output content (threads and paths excluded).
    std::uint64_t hash() const
    {
        std::ostringstream s;
        s << subcommand << ";bpcer=" << report::format_double(target_bpcer)
          << ";fraction=" << report::format_double(fraction) << ";grid=" << grid << ";strict=" << strict
          << ";coverage=" << report::format_double(coverage_floor());
        return fnv1a(s.str());
    }

    void validate() const
    {
        if (!(target_bpcer > 0.0 && target_bpcer < 1.0)) throw UsageError("--target-bpcer must lie in (0, 1)");
        if (!(fraction > 0.0 && fraction <= 0.5)) throw UsageError("--fraction must lie in (0, 0.5]");
        if (grid < 2) throw UsageError("--grid must be at least 2");
        if (threads < 1) throw UsageError("--threads must be at least 1");
        if (min_coverage && !(*min_coverage >= 0.0 && *min_coverage <= 1.0))
            throw UsageError("--min-coverage must lie in [0, 1]");
    }
};

/// Values from a JSON config file fill every setting not given on the command line.
void apply_config_file(RunConfig& cfg, const CLI::App& sub)
{
    if (cfg.config_file.empty()) return;
    std::ifstream in(cfg.config_file);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + cfg.config_file);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        auto unset = [&](const char* flag) {
            const auto* opt = sub.get_option_no_throw(flag);
            return opt == nullptr || opt->count() == 0;
        };
        if (j.contains("target_bpcer") && unset("--target-bpcer")) cfg.target_bpcer = j["target_bpcer"].get<double>();
        if (j.contains("fraction") && unset("--fraction")) cfg.fraction = j["fraction"].get<double>();
        if (j.contains("grid") && unset("--grid")) cfg.grid = j["grid"].get<std::size_t>();
        if (j.contains("threads") && unset("--threads")) cfg.threads = j["threads"].get<std::size_t>();
        if (j.contains("model") && unset("--model")) cfg.model = j["model"].get<std::string>();
        if (j.contains("min_coverage") && unset("--min-coverage")) cfg.min_coverage = j["min_coverage"].get<double>();
        if (j.contains("strict") && unset("--strict") && unset("--lenient")) cfg.strict = j["strict"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, cfg.config_file + ": " + e.what());
    }
}

std::string header_comment(const RunConfig& cfg, const Registry& registry)
{
    return report::provenance(cfg.subcommand, cfg.hash(), registry.hash());
}

/// Collects outputs in memory; files are written only after the command succeeded.
class OutputSet {
public:
    explicit OutputSet(fs::path dir)
        : dir_(std::move(dir))
    {
    }

    std::ostream& open(const std::string& name) { return files_[name]; }

    void flush() const
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create " + dir_.string() + ": " + ec.message());
        for (const auto& [name, body] : files_) {
            std::ofstream out(dir_ / name, std::ios::binary);
            out << body.str();
            if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir_ / name).string());
        }
    }

private:
    fs::path dir_;
    std::map<std::string, std::ostringstream> files_;
};

struct Inputs {
    std::vector<DatasetManifest> manifests;
    std::vector<ScoreTable> tables; ///< merged across score files, in first-seen order
};

/// Loads manifests and score files, checks coverage of every (dataset, estimator) pair
/// against the floor, and restricts every manifest to samples scored by all estimators.
Inputs load_inputs(const RunConfig& cfg, const Registry& registry)
{
    if (cfg.manifests.empty()) throw UsageError("at least one --manifest is required");
    if (cfg.scores.empty()) throw UsageError("at least one --scores file is required");
    Inputs in;
    std::vector<ScoreTable> all;
    for (const auto& p : cfg.scores) std::ranges::move(load_scores(p, registry), std::back_inserter(all));
    in.tables = merge_tables(all);
    for (const auto& p : cfg.manifests) {
        auto m = load_manifest(p);
        if (std::ranges::any_of(in.manifests, [&](const auto& o) { return o.name() == m.name(); }))
            throw Error(ErrorKind::DuplicateSample, "dataset '" + m.name() + "' given twice");
        for (const auto& t : in.tables) {
            const auto r = join(m, t, cfg.coverage_floor());
            if (!r.manifest_only.empty())
                std::cerr << "warning: " << t.estimator().name << " leaves " << r.manifest_only.size() << " of "
                          << r.manifest_size() << " samples of '" << m.name() << "' unscored\n";
        }
        in.manifests.push_back(restrict_to_scored(m, in.tables));
    }
    return in;
}

std::vector<std::string> estimator_names(std::span<const ScoreTable> tables)
{
    std::vector<std::string> out;
    for (const auto& t : tables) out.push_back(t.estimator().name);
    std::ranges::sort(out);
    return out;
}

const ScoreTable& table_named(std::span<const ScoreTable> tables, const std::string& name)
{
    for (const auto& t : tables)
        if (t.estimator().name == name) return t;
    throw Error(ErrorKind::UnknownEstimator, name);
}

std::string file_safe(std::string s)
{
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return s;
}

// --- subcommands -------------------------------------------------------------------

int cmd_score(const RunConfig& cfg, const Registry& registry)
{
    if (cfg.manifests.empty()) throw UsageError("score needs --manifest");
    if (cfg.out.empty()) throw UsageError("score needs --out <file>");
    const auto model = brisque::load_svr_model(cfg.model);

    struct Job {
        std::string id;
        fs::path path;
    };
    std::vector<Job> jobs;
    for (const auto& mp : cfg.manifests) {
        const auto m = load_manifest(mp);
        for (const auto& s : m.samples()) jobs.push_back({s.sample_id, resolve_sample_path(mp, s)});
    }
    std::vector<std::optional<double>> results(jobs.size());
    std::vector<std::string> errors(jobs.size());
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        try {
            results[i] = brisque::score(load_image(jobs[i].path), model);
        } catch (const Error& e) {
            errors[i] = std::string(to_string(e.kind())) + ": " + e.what();
        }
    });

    std::map<std::string, double> scores;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (results[i]) {
            if (!scores.emplace(jobs[i].id, *results[i]).second)
                throw Error(ErrorKind::DuplicateSample, "sample '" + jobs[i].id + "' appears in two manifests");
            continue;
        }
        ++failed;
        std::cerr << "error: " << jobs[i].id << " (" << jobs[i].path.string() << "): " << errors[i] << '\n';
    }
    if (failed && cfg.strict) {
        std::cerr << failed << " of " << jobs.size() << " images failed; no output written (strict mode)\n";
        return kInput;
    }
    std::vector<ScoreTable> tables{ScoreTable(registry.at("BRISQUE"), std::move(scores))};
    std::ostringstream body;
    write_scores(body, tables, header_comment(cfg, registry));
    const fs::path out(cfg.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream file(out, std::ios::binary);
    file << body.str();
    if (!file) throw Error(ErrorKind::Io, "cannot write " + out.string());
    if (failed) {
        std::cerr << failed << " of " << jobs.size() << " images failed; partial output written\n";
        return kPartial;
    }
    return kOk;
}

int cmd_separability(const RunConfig& cfg, const Registry& registry)
{
    const auto in = load_inputs(cfg, registry);
    std::vector<report::FdrRow> rows;
    for (const auto& m : in.manifests)
        for (const auto& attack : m.attack_types())
            for (const auto& name : estimator_names(in.tables)) {
                const auto& t = table_named(in.tables, name);
                rows.push_back({m.name(), attack, name,
                                stats::fdr(t.gather(m.attack_ids(attack)), t.gather(m.bona_fide_ids()))});
            }
    const auto names = estimator_names(in.tables);
    const auto comment = header_comment(cfg, registry);
    OutputSet out(cfg.out);
    report::write_fdr_long(out.open("fdr.csv"), rows, comment);
    report::write_fdr_wide(out.open("fdr_wide.csv"), rows, names, comment);
    out.flush();
    return kOk;
}

int cmd_eer(const RunConfig& cfg, const Registry& registry)
{
    const auto in = load_inputs(cfg, registry);
    const auto rep = madeval::intra_eval(in.manifests, in.tables, cfg.threads);
    const auto names = estimator_names(in.tables);
    const auto comment = header_comment(cfg, registry);
    OutputSet out(cfg.out);
    report::write_eer_long(out.open("eer.csv"), rep, comment);
    report::write_eer_wide(out.open("eer_wide.csv"), rep, names, comment);
    out.open("eer.json") << report::to_json(rep).dump(2) << '\n';
    out.flush();
    return kOk;
}

int cmd_crosseval(const RunConfig& cfg, const Registry& registry)
{
    const auto in = load_inputs(cfg, registry);
    const auto rep = madeval::cross_eval(in.manifests, in.tables, cfg.target_bpcer, cfg.threads);
    const auto names = estimator_names(in.tables);
    const auto comment = header_comment(cfg, registry);
    OutputSet out(cfg.out);
    report::write_metric_rows(out.open("crosseval.csv"), rep, comment);
    report::write_bpcer_long(out.open("bpcer.csv"), rep, comment);
    report::write_bpcer_wide(out.open("bpcer_wide.csv"), rep, names, comment);
    report::write_attack_matrix(out.open("apcer_wide.csv"), rep, false, comment);
    report::write_attack_matrix(out.open("acer_wide.csv"), rep, true, comment);
    report::write_means(out.open("mean_acer.csv"), rep, "acer", comment);
    out.open("crosseval.json") << report::to_json(rep).dump(2) << '\n';
    out.flush();
    return kOk;
}

int cmd_distributions(const RunConfig& cfg, const Registry& registry)
{
    const auto in = load_inputs(cfg, registry);
    const auto names = estimator_names(in.tables);

    struct Job {
        std::string dataset, estimator, population;
        std::vector<double> scores;
    };
    std::vector<Job> jobs;
    for (const auto& name : names) {
        const auto& t = table_named(in.tables, name);
        for (const auto& m : in.manifests) {
            jobs.push_back({m.name(), name, "bonafide", t.gather(m.bona_fide_ids())});
            for (const auto& attack : m.attack_types())
                jobs.push_back({m.name(), name, attack, t.gather(m.attack_ids(attack))});
        }
    }
    std::vector<report::NamedCurve> curves(jobs.size());
    parallel_for(jobs.size(), cfg.threads, [&](std::size_t i) {
        curves[i] = {jobs[i].dataset, jobs[i].estimator, jobs[i].population, stats::kde(jobs[i].scores, cfg.grid)};
    });

    const auto comment = header_comment(cfg, registry);
    OutputSet out(cfg.out);
    report::write_kde_long(out.open("kde.csv"), curves, comment);

    auto& summary = out.open("summary.csv");
    detail::write_comment(summary, comment);
    summary << "dataset,estimator,population,count,mean,std\n";
    for (const auto& j : jobs) {
        const auto s = summarize(j.scores);
        summary << csv::escape(j.dataset) << ',' << csv::escape(j.estimator) << ',' << csv::escape(j.population) << ','
                << s.count << ',' << format_double(s.mean) << ',' << format_double(s.std) << '\n';
    }

    for (const auto& name : names) {
        // cross-dataset bona fide panel
        std::vector<report::svg::Series> bona;
        for (const auto& c : curves)
            if (c.estimator == name && c.population == "bonafide") bona.push_back({c.dataset, &c.curve});
        report::svg::curves(out.open("bonafide_" + file_safe(name) + ".svg"), name + ": bona fide by dataset", bona);
        // attack vs bona fide per dataset
        for (const auto& m : in.manifests) {
            std::vector<report::svg::Series> panel;
            for (const auto& c : curves)
                if (c.estimator == name && c.dataset == m.name()) panel.push_back({c.population, &c.curve});
            report::svg::curves(out.open("kde_" + file_safe(m.name()) + "_" + file_safe(name) + ".svg"),
                                name + ": " + m.name(), panel);
        }
    }
    out.flush();
    return kOk;
}

int cmd_overlap(const RunConfig& cfg, const Registry& registry)
{
    const auto in = load_inputs(cfg, registry);
    const auto names = estimator_names(in.tables);
    std::vector<report::OverlapEntry> entries;
    for (const auto& m : in.manifests)
        for (const auto& attack : m.attack_types()) {
            const auto ids = m.attack_ids(attack);
            std::vector<ScoreTable> subsets;
            for (const auto& name : names) subsets.push_back(stats::subset(table_named(in.tables, name), ids));
            for (auto tail : {stats::Tail::Top, stats::Tail::Bottom})
                entries.push_back({m.name(), attack, stats::overlap_matrix(subsets, cfg.fraction, tail, cfg.threads)});
        }
    const auto comment = header_comment(cfg, registry);
    OutputSet out(cfg.out);
    report::write_overlap_long(out.open("overlap.csv"), entries, comment);
    report::write_overlap_wide(out.open("overlap_wide.csv"), entries, comment);
    for (const auto& e : entries) {
        const auto tail = std::string(to_string(e.matrix.tail));
        report::svg::heatmap(out.open("overlap_" + tail + "_" + file_safe(e.dataset) + "_" + file_safe(e.attack_type) +
                                      ".svg"),
                             e.dataset + " / " + e.attack_type + " (" + tail + " " +
                                 report::fixed4(100.0 * cfg.fraction).substr(0, 4) + "%)",
                             e.matrix);
    }
    out.flush();
    return kOk;
}

int cmd_synth(const RunConfig& cfg, const Registry& registry)
{
    if (cfg.spec.empty()) throw UsageError("synth needs --spec <file.json>");
    if (cfg.out.empty()) throw UsageError("synth needs --out <dir>");
    const auto spec = synth::load_fixture_spec(cfg.spec);
    const auto files = synth::write_fixture(spec, registry, cfg.out, header_comment(cfg, registry));
    for (std::size_t i = 0; i < files.manifests.size(); ++i)
        std::cout << files.manifests[i].string() << '\n' << files.scores[i].string() << '\n';
    return kOk;
}

int cmd_validate(const RunConfig& cfg, const Registry& registry)
{
    if (cfg.manifests.empty()) throw UsageError("validate needs --manifest");
    std::vector<ScoreTable> all;
    for (const auto& p : cfg.scores) std::ranges::move(load_scores(p, registry), std::back_inserter(all));
    const auto tables = merge_tables(all);
    std::ostringstream body;
    detail::write_comment(body, header_comment(cfg, registry));
    body << "dataset,estimator,matched,manifest_only,score_only,coverage\n";
    bool ok = true;
    for (const auto& p : cfg.manifests) {
        const auto m = load_manifest(p);
        std::cerr << m.name() << ": " << m.samples().size() << " samples, " << m.bona_fide_ids().size()
                  << " bona fide, " << m.attack_types().size() << " attack types\n";
        for (const auto& t : tables) {
            const auto r = join(m, t);
            body << csv::escape(r.dataset) << ',' << csv::escape(r.estimator) << ',' << r.matched.size() << ','
                 << r.manifest_only.size() << ',' << r.score_only.size() << ',' << format_double(r.coverage()) << '\n';
            if (r.coverage() + 1e-12 < cfg.coverage_floor()) {
                ok = false;
                std::cerr << "  " << r.estimator << ": coverage " << r.coverage() << " below floor\n";
            }
        }
    }
    if (!cfg.out.empty()) {
        OutputSet out(cfg.out);
        out.open("coverage.csv") << body.str();
        out.flush();
    } else {
        std::cout << body.str();
    }
    return ok ? kOk : kInput;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Face-image quality measures as unsupervised morphing-attack detectors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(report::kToolVersion));

    RunConfig cfg;
    std::map<std::string, int (*)(const RunConfig&, const Registry&)> handlers{
        {"score", cmd_score},       {"separability", cmd_separability},
        {"eer", cmd_eer},           {"crosseval", cmd_crosseval},
        {"distributions", cmd_distributions}, {"overlap", cmd_overlap},
        {"synth", cmd_synth},       {"validate", cmd_validate}};
    const std::map<std::string, std::string> help{
        {"score", "BRISQUE-score every image of the manifests into one score file"},
        {"separability", "Fisher discriminant ratio of every attack type against bona fide"},
        {"eer", "intra-dataset equal error rates"},
        {"crosseval", "threshold transfer at a fixed source BPCER"},
        {"distributions", "kernel density estimates and SVG panels"},
        {"overlap", "agreement of the highest / lowest quality tails between estimators"},
        {"synth", "write a synthetic manifest + score fixture from a JSON spec"},
        {"validate", "check manifests and score files and report coverage"}};

    for (const auto& [name, _] : handlers) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", cfg.config_file, "JSON file with default settings")->check(CLI::ExistingFile);
        sub->add_option("--threads", cfg.threads, "worker threads");
        if (name == "synth") {
            sub->add_option("--spec", cfg.spec, "fixture spec (JSON)")->required()->check(CLI::ExistingFile);
            sub->add_option("--out", cfg.out, "output directory")->required();
            continue;
        }
        sub->add_option("--manifest", cfg.manifests, "dataset manifest CSV (one per dataset)")
            ->required()
            ->check(CLI::ExistingFile);
        if (name == "score") {
            sub->add_option("--model", cfg.model, "BRISQUE SVR model file");
            sub->add_option("--out", cfg.out, "output score CSV")->required();
        } else {
            auto* scores = sub->add_option("--scores", cfg.scores, "score CSV")->check(CLI::ExistingFile);
            if (name != "validate") scores->required();
            auto* out = sub->add_option("--out", cfg.out, "output directory");
            if (name != "validate") out->required();
            sub->add_option("--min-coverage", cfg.min_coverage, "fraction of manifest samples that must be scored");
        }
        if (name == "crosseval") sub->add_option("--target-bpcer", cfg.target_bpcer, "source BPCER of the threshold");
        if (name == "overlap") sub->add_option("--fraction", cfg.fraction, "tail fraction");
        if (name == "distributions") sub->add_option("--grid", cfg.grid, "KDE grid points");
        auto* strict = sub->add_flag("--strict", "fail on any unreadable input (default)");
        auto* lenient = sub->add_flag_callback("--lenient", [&cfg] { cfg.strict = false; },
                                               "continue past failures, exit 3 on partial output");
        strict->excludes(lenient);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    for (const auto* sub : app.get_subcommands()) cfg.subcommand = sub->get_name();
    try {
        apply_config_file(cfg, *app.get_subcommand(cfg.subcommand));
        cfg.validate();
        return handlers.at(cfg.subcommand)(cfg, Registry::standard());
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return kInput;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error [io]: " << e.what() << '\n';
        return kInput;
    }
}
