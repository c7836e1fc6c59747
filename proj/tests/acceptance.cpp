// Acceptance suite: one PASS/FAIL line per headline property; exits non-zero if any
// check fails.

#include "qmad/brisque.hpp"
#include "qmad/ingest.hpp"
#include "qmad/madeval.hpp"
#include "qmad/stats.hpp"
#include "qmad/synth.hpp"
#include "support.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

using namespace qmad;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome fdr_oracle()
{
    synth::SynthSpec spec;
    spec.seed = 1;
    spec.populations = {{Label::BonaFide, std::nullopt, synth::Distribution::normal(0.0, std::sqrt(0.5)), 100000},
                        {Label::Attack, "morph", synth::Distribution::normal(1.0, std::sqrt(0.5)), 100000}};
    const auto t0 = Clock::now();
    const auto g = synth::generate(spec);
    const auto r = stats::fdr(g.table.gather(g.manifest.attack_ids("morph")), g.table.gather(g.manifest.bona_fide_ids()));
    const double dt = seconds_since(t0);
    return {std::abs(r.value - 1.0) <= 0.03 && dt < 1.0, fmt("fdr=%.4f (want 1.00+-0.03) in %.3fs (< 1s)", r.value, dt)};
}

Outcome eer_oracle()
{
    synth::SynthSpec spec;
    spec.seed = 2;
    spec.populations = {{Label::BonaFide, std::nullopt, synth::Distribution::normal(2.0, 1.0), 100000},
                        {Label::Attack, "morph", synth::Distribution::normal(0.0, 1.0), 100000}};
    const auto t0 = Clock::now();
    const auto g = synth::generate(spec);
    const auto e = madeval::eer(g.table.gather(g.manifest.bona_fide_ids()), g.table.gather(g.manifest.attack_ids("morph")));
    const double dt = seconds_since(t0);
    return {std::abs(e.eer - 0.1587) <= 0.005 && dt < 2.0,
            fmt("eer=%.4f (want 0.1587+-0.005) in %.3fs (< 2s)", e.eer, dt)};
}

Outcome acer_identity()
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), b = u(rng);
        const double got = madeval::acer(a, b);
        const double want = (a + b) / 2.0;
        if (got != want) worst = std::max(worst, std::nextafter(want, got) == got ? 1 : 2);
    }
    return {worst <= 1, fmt("max deviation %d ulp over 1000 pairs", worst)};
}

Outcome threshold_consistency()
{
    std::mt19937_64 rng(4);
    std::size_t cases = 0, bad = 0;
    for (std::size_t n : {7u, 10u, 33u, 100u, 1000u, 12345u})
        for (double target : {0.01, 0.05, 0.1, 0.2, 0.33, 0.5, 0.9}) {
            std::vector<double> bona(n);
            std::uniform_real_distribution<double> u(-5.0, 5.0);
            std::exponential_distribution<double> ex(1.0);
            for (auto& x : bona) x = (cases % 2) ? u(rng) : ex(rng);
            const auto t = madeval::threshold_at_bpcer(bona, target);
            const double re = madeval::bpcer(bona, t);
            const bool ok = re == t.achieved_bpcer && t.achieved_bpcer <= target &&
                            t.achieved_bpcer + 1.0 / static_cast<double>(n) > target;
            bad += !ok;
            ++cases;
        }
    return {bad == 0, fmt("%zu/%zu (N, target) cases self-consistent", cases - bad, cases)};
}

/// Datasets "d<i>" with a bona fide set and attacks "a<j>", two estimators.
struct Fixture {
    std::vector<DatasetManifest> manifests;
    std::vector<ScoreTable> tables;
};

Fixture make_fixture(int datasets, int attacks, std::uint64_t seed)
{
    const auto reg = Registry::standard();
    Fixture f;
    std::mt19937_64 rng(seed);
    std::map<std::string, double> mag, brisque;
    for (int d = 0; d < datasets; ++d) {
        const auto name = "d" + std::to_string(d);
        std::vector<SampleRecord> samples;
        auto add = [&](const std::string& id, Label label, std::optional<std::string> attack, double shift) {
            samples.push_back({id, label, attack, name, ""});
            mag[id] = std::normal_distribution<double>(20.0 + shift, 3.0)(rng);
            brisque[id] = std::normal_distribution<double>(10.0 - 2.0 * shift, 6.0)(rng);
        };
        for (int i = 0; i < 700; ++i) add(name + "-bf-" + std::to_string(i), Label::BonaFide, std::nullopt, 3.0 + d);
        for (int a = 0; a < attacks; ++a)
            for (int i = 0; i < 500; ++i) {
                const auto type = "a" + std::to_string(a);
                add(name + "-" + type + "-" + std::to_string(i), Label::Attack, type, 0.5 * a);
            }
        f.manifests.emplace_back(name, std::move(samples));
    }
    f.tables.emplace_back(reg.at("MagFace"), mag);
    f.tables.emplace_back(reg.at("BRISQUE"), brisque);
    return f;
}

Outcome polarity_invariance()
{
    const auto f = make_fixture(2, 2, 5); // 2 x (bona fide + 2 attacks) = 6 populations
    std::vector<ScoreTable> flipped;
    for (const auto& t : f.tables) {
        auto desc = t.estimator();
        desc.mad_polarity = desc.mad_polarity == MadPolarity::BonaFideHigh ? MadPolarity::BonaFideLow
                                                                           : MadPolarity::BonaFideHigh;
        std::map<std::string, double> neg;
        for (const auto& [id, s] : t.entries()) neg.emplace(id, -s);
        flipped.emplace_back(desc, neg);
    }
    const bool intra = madeval::intra_eval(f.manifests, f.tables) == madeval::intra_eval(f.manifests, flipped);
    const bool cross = madeval::cross_eval(f.manifests, f.tables) == madeval::cross_eval(f.manifests, flipped);
    return {intra && cross, fmt("intra-dataset report %s, threshold-transfer report %s", intra ? "identical" : "differs",
                                cross ? "identical" : "differs")};
}

Outcome monotone_invariance()
{
    const auto f = make_fixture(2, 1, 6); // 2 x (bona fide + 1 attack) = 4 populations
    std::vector<ScoreTable> warped;
    for (const auto& t : f.tables) {
        std::map<std::string, double> w;
        for (const auto& [id, x] : t.entries()) w.emplace(id, x * x * x + 2.0 * x);
        warped.emplace_back(t.estimator(), w);
    }
    std::size_t compared = 0, differ = 0;
    auto same = [&](const madeval::MetricReport& a, const madeval::MetricReport& b) {
        if (a.rows.size() != b.rows.size() || a.bpcer_rows.size() != b.bpcer_rows.size()) return ++differ, void();
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            ++compared;
            differ += a.rows[i].apcer != b.rows[i].apcer || a.rows[i].bpcer != b.rows[i].bpcer ||
                      a.rows[i].eer != b.rows[i].eer;
        }
        for (std::size_t i = 0; i < a.bpcer_rows.size(); ++i) {
            ++compared;
            differ += a.bpcer_rows[i].bpcer != b.bpcer_rows[i].bpcer;
        }
    };
    same(madeval::intra_eval(f.manifests, f.tables), madeval::intra_eval(f.manifests, warped));
    same(madeval::cross_eval(f.manifests, f.tables), madeval::cross_eval(f.manifests, warped));
    return {differ == 0 && compared > 0, fmt("%zu rows compared, %zu changed under x^3 + 2x", compared, differ)};
}

Outcome ggd_recovery()
{
    std::string detail;
    bool ok = true;
    double worst_eta = 0.0;
    for (double alpha : {0.5, 1.0, 2.0, 4.0}) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(alpha * 1000));
        std::gamma_distribution<double> g(1.0 / alpha, 1.0);
        std::bernoulli_distribution sign(0.5);
        // unit variance, the scale of MSCN coefficients
        const double scale = std::sqrt(std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha));
        std::vector<double> x(1000000);
        for (auto& v : x) v = (sign(rng) ? scale : -scale) * std::pow(g(rng), 1.0 / alpha);
        const auto fit = brisque::fit_ggd(x);
        const auto aggd = brisque::fit_aggd(x);
        ok = ok && std::abs(fit.shape - alpha) <= 0.05 && std::abs(aggd.mean) < 0.02;
        worst_eta = std::max(worst_eta, std::abs(aggd.mean));
        detail += fmt("a=%.1f->%.3f ", alpha, fit.shape);
    }
    return {ok, detail + fmt("max|eta|=%.4f", worst_eta)};
}

GrayImage synthetic_face_sized(std::uint64_t seed)
{
    // smooth random gradient plus noise of random strength
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double gx = u(rng) - 0.5, gy = u(rng) - 0.5, noise = 0.02 + 0.2 * u(rng);
    std::normal_distribution<double> n(0.0, noise);
    std::vector<double> px(224 * 224);
    for (std::size_t r = 0; r < 224; ++r)
        for (std::size_t c = 0; c < 224; ++c) {
            const double base = 0.5 + 0.4 * (gx * (c / 224.0 - 0.5) + gy * (r / 224.0 - 0.5)) +
                                0.1 * std::sin(0.05 * (r + seed % 17) * (1 + seed % 3)) * std::cos(0.07 * c);
            px[r * 224 + c] = std::clamp(base + n(rng), 0.0, 1.0);
        }
    return GrayImage(224, 224, std::move(px));
}

Outcome brisque_oracle()
{
    std::size_t features = 0, mismatched = 0;
    double worst = 0.0;
    for (const auto& row : test::read_rows(test::reference_dir() / "brisque_oracle.csv")) {
        const auto f = brisque::features(load_image(test::reference_dir() / (row[0] + ".png")));
        for (std::size_t i = 0; i < brisque::kFeatureCount; ++i) {
            const double want = test::to_double(row[i + 1]);
            const double rel = std::abs(f.values[i] - want) / std::max(std::abs(want), 1e-300);
            worst = std::max(worst, rel);
            mismatched += rel > 1e-3;
            ++features;
        }
    }
    bool constant_zero = true;
    for (double v : brisque::mscn(GrayImage(224, 224, 0.42)).values) constant_zero = constant_zero && v == 0.0;

    const auto model = brisque::load_svr_model(QMAD_MODEL);
    std::vector<double> single, multi;
    double timed = 0.0;
    for (std::uint64_t batch = 0; batch < 10; ++batch) {
        std::vector<GrayImage> images;
        for (std::uint64_t i = 0; i < 100; ++i) images.push_back(synthetic_face_sized(batch * 100 + i));
        const auto t0 = Clock::now();
        auto s = brisque::score_batch(images, model, {}, 1);
        timed += seconds_since(t0);
        auto m = brisque::score_batch(images, model, {}, 8);
        std::ranges::move(s, std::back_inserter(multi));
        std::ranges::move(m, std::back_inserter(single));
    }
    const bool invariant = single == multi;
    return {mismatched == 0 && features == 180 && constant_zero && timed < 30.0 && invariant,
            fmt("%zu/%zu features within 1e-3 rel (worst %.2e); constant MSCN %s; 1000 images in %.2fs on 1 "
                "thread (< 30s); 1 vs 8 threads %s",
                features - mismatched, features, worst, constant_zero ? "all zero" : "NONZERO", timed,
                invariant ? "identical" : "DIFFER")};
}

Outcome brisque_ordering()
{
    const auto model = brisque::load_svr_model(QMAD_MODEL);
    int ordered = 0;
    std::string detail;
    for (const auto& name : test::reference_names()) {
        const double clean = brisque::score(load_image(test::reference_dir() / (name + ".png")), model);
        const double jpeg = brisque::score(load_image(test::reference_dir() / (name + "_q10.jpg")), model);
        ordered += clean < jpeg;
        detail += fmt("%s %.1f<%.1f ", name.c_str(), clean, jpeg);
    }
    return {ordered == 5, fmt("%d/5 degraded images score worse: ", ordered) + detail};
}

ScoreTable uniform_table(const char* name, std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::map<std::string, double> m;
    for (std::size_t i = 0; i < n; ++i) m.emplace(fmt("s%06zu", i), u(rng));
    return ScoreTable({name, Family::FIQA, NativeOrder::Increasing, MadPolarity::BonaFideHigh}, std::move(m));
}

Outcome overlap_oracle()
{
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
        sum += stats::overlap_ratio(uniform_table("A", 10000, 1000 + seed), uniform_table("B", 10000, 5000 + seed), 0.1,
                                    stats::Tail::Top);
    const double mean = sum / 100.0;
    const auto t = uniform_table("A", 10000, 9);
    const ScoreTable copy({"B", Family::IQA, NativeOrder::Increasing, MadPolarity::BonaFideHigh}, t.entries());
    const double top = stats::overlap_ratio(t, copy, 0.1, stats::Tail::Top);
    const double bottom = stats::overlap_ratio(t, copy, 0.1, stats::Tail::Bottom);
    return {std::abs(mean - 0.1) <= 0.02 && top == 1.0 && bottom == 1.0,
            fmt("mean independent ratio %.4f (want 0.10+-0.02); identical tables %.1f / %.1f", mean, top, bottom)};
}

Outcome kde_normalization()
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double lo = 1e9, hi = -1e9;
    for (int p = 0; p < 20; ++p) {
        synth::Distribution d;
        switch (p % 3) {
        case 0: d = synth::Distribution::normal(50 * u(rng) - 25, 0.1 + 5 * u(rng)); break;
        case 1: d = synth::Distribution::uniform(-3 * u(rng), 0.5 + 4 * u(rng)); break;
        default: d = synth::Distribution::laplace(10 * u(rng), 0.2 + 2 * u(rng)); break;
        }
        const auto n = static_cast<std::size_t>(50 + 5000 * u(rng));
        std::vector<double> x(n);
        for (auto& v : x) v = d.sample(rng);
        const auto c = stats::kde(x);
        const double area = stats::trapezoid(c.grid, c.density);
        lo = std::min(lo, area);
        hi = std::max(hi, area);
    }
    const auto c = stats::kde(test::normal_draws(100000, 0.0, 1.0, 13));
    const double peak = *std::ranges::max_element(c.density);
    const double want = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return {lo >= 0.98 && hi <= 1.02 && std::abs(peak - want) <= 0.05 * want,
            fmt("20 integrals in [%.4f, %.4f]; N(0,1) peak %.4f vs %.4f", lo, hi, peak, want)};
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(QMAD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end()
{
    const auto dir = test::scratch_dir("acceptance_e2e");
    const auto spec = test::data_dir() / "fixtures" / "e2e_spec.json";
    if (run_cli("synth --spec " + spec.string() + " --out " + (dir / "fx").string()) != 0) return {false, "synth failed"};
    std::string in = " --manifest", scores = " --scores";
    for (const char* d : {"alpha", "beta", "gamma"}) {
        in += " " + (dir / "fx" / (std::string(d) + ".manifest.csv")).string();
        scores += " " + (dir / "fx" / (std::string(d) + ".scores.csv")).string();
    }
    in += scores;
    int failures = 0;
    std::size_t files = 0, differing = 0;
    for (const char* cmd : {"separability", "eer", "crosseval", "overlap", "distributions"}) {
        for (const char* pass : {"1", "2"})
            failures += run_cli(std::string(cmd) + in + " --out " + (dir / (std::string(cmd) + pass)).string()) != 0;
        if (!fs::exists(dir / (std::string(cmd) + "1"))) continue;
        for (const auto& e : fs::directory_iterator(dir / (std::string(cmd) + "1"))) {
            ++files;
            differing += test::slurp(e.path()) != test::slurp(dir / (std::string(cmd) + "2") / e.path().filename());
        }
    }
    // diagonal of the transferred-threshold BPCER matrix
    double worst = 0.0;
    std::size_t diag = 0;
    try {
        std::ifstream bp(dir / "crosseval1" / "bpcer.csv");
        csv::Reader reader(bp, "bpcer.csv",
                           {"estimator", "source_dataset", "eval_dataset", "threshold", "target_bpcer",
                            "source_achieved_bpcer", "bpcer"});
        while (auto row = reader.next()) {
            if (row->fields[1] != row->fields[2]) continue;
            ++diag;
            worst = std::max(worst, std::abs(test::to_double(row->fields[6]) - 0.2));
        }
    } catch (const std::exception&) {
        return {false, "cannot read crosseval BPCER output"};
    }
    // smallest bona fide set is 400 samples: achieved BPCER lies within 1/400 below target
    const bool ok = failures == 0 && differing == 0 && files > 0 && diag == 6 && worst <= 1.0 / 400.0;
    return {ok, fmt("%d failed runs; %zu/%zu output files byte-identical on rerun; %zu diagonal cells, max |bpcer-0.2| "
                    "= %.4f",
                    failures, files - differing, files, diag, worst)};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> checks{
        {"fdr-oracle", fdr_oracle},
        {"eer-oracle", eer_oracle},
        {"acer-identity", acer_identity},
        {"threshold-self-consistency", threshold_consistency},
        {"polarity-invariance", polarity_invariance},
        {"monotone-transform-invariance", monotone_invariance},
        {"ggd-aggd-recovery", ggd_recovery},
        {"brisque-oracle", brisque_oracle},
        {"brisque-ordering", brisque_ordering},
        {"overlap-oracle", overlap_oracle},
        {"kde-normalization", kde_normalization},
        {"end-to-end", end_to_end},
    };
    int failed = 0;
    for (const auto& [name, check] : checks) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (checks.size() - failed) << '/' << checks.size() << " acceptance criteria met" << std::endl;
    return failed ? 1 : 0;
}
