#include "qmad/madeval.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace qmad;
using namespace qmad::madeval;

namespace {

EstimatorDescriptor high(std::string name)
{
    return {std::move(name), Family::FIQA, NativeOrder::Increasing, MadPolarity::BonaFideHigh};
}

struct Fixture {
    std::vector<DatasetManifest> manifests;
    std::vector<ScoreTable> tables;
};

/// Datasets x (bona fide + attacks) drawn from normals; scores live in raw space.
Fixture make_fixture(const std::vector<std::string>& datasets, const std::vector<std::string>& attacks,
                     std::size_t n, double bona_mean, std::uint64_t seed)
{
    Fixture f;
    std::mt19937_64 rng(seed);
    std::map<std::string, double> scores;
    for (const auto& d : datasets) {
        std::vector<SampleRecord> samples;
        std::normal_distribution<double> bona(bona_mean, 1.0), attack(0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto id = d + "-b" + std::to_string(i);
            samples.push_back({id, Label::BonaFide, std::nullopt, d, ""});
            scores[id] = bona(rng);
        }
        for (const auto& a : attacks)
            for (std::size_t i = 0; i < n; ++i) {
                const auto id = d + "-" + a + std::to_string(i);
                samples.push_back({id, Label::Attack, a, d, ""});
                scores[id] = attack(rng);
            }
        f.manifests.emplace_back(d, std::move(samples));
    }
    f.tables.emplace_back(high("MagFace"), scores);
    return f;
}

} // namespace

TEST(Classify, Boundary)
{
    EXPECT_EQ(classify(1.0, 1.0), Label::BonaFide);
    EXPECT_EQ(classify(std::nextafter(1.0, 0.0), 1.0), Label::Attack);
    const std::vector<double> below{0.1, 0.2};
    EXPECT_EQ(apcer(below, 0.5), 0.0);
    EXPECT_EQ(bpcer(below, 0.5), 1.0);
}

TEST(ErrorRates, Basics)
{
    const std::vector<double> s{1.0, 2.0, 3.0, 4.0};
    EXPECT_EQ(bpcer(s, 0.0), 0.0);
    EXPECT_EQ(bpcer(s, 2.5), 0.5);
    EXPECT_EQ(apcer(s, 0.0), 1.0);
    EXPECT_EQ(apcer(s, 5.0), 0.0);
    EXPECT_EQ(apcer(s, 4.0), 0.25);
    try {
        bpcer(std::vector<double>{}, 0.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyPopulation);
    }
    EXPECT_THROW(apcer(std::vector<double>{}, 0.0), Error);
}

TEST(ErrorRates, Acer)
{
    EXPECT_EQ(acer(0.2, 0.2), 0.2);
    EXPECT_EQ(acer(0.0, 1.0), 0.5);
    EXPECT_NEAR(acer(0.0123, 0.2), 0.10615, 1e-15);
}

TEST(Threshold, QuantizationIsReported)
{
    std::vector<double> s;
    for (int i = 0; i < 10; ++i) s.push_back(i);
    const auto t = threshold_at_bpcer(s, 0.05);
    EXPECT_EQ(t.achieved_bpcer, 0.0);
    EXPECT_EQ(bpcer(s, t), 0.0);
    const auto t2 = threshold_at_bpcer(s, 0.2, "src");
    EXPECT_EQ(t2.achieved_bpcer, 0.2);
    EXPECT_EQ(t2.value, 2.0);
    EXPECT_EQ(t2.source_dataset, "src");
}

TEST(Threshold, NormalQuantile)
{
    const auto s = test::normal_draws(100000, 0.0, 1.0, 8);
    const auto t = threshold_at_bpcer(s, 0.2);
    EXPECT_NEAR(t.value, -0.8416, 0.02);
    EXPECT_EQ(bpcer(s, t), t.achieved_bpcer);
    EXPECT_LE(t.achieved_bpcer, 0.2);
    EXPECT_GT(t.achieved_bpcer + 1.0 / 100000, 0.2);
}

TEST(Threshold, TiesNeverOvershoot)
{
    const std::vector<double> s{1, 1, 1, 2, 2, 3, 3, 3, 3, 3};
    const auto t = threshold_at_bpcer(s, 0.4);
    EXPECT_EQ(t.achieved_bpcer, 0.3);
    EXPECT_EQ(bpcer(s, t), 0.3);
    EXPECT_THROW(threshold_at_bpcer(s, 0.0), Error);
    EXPECT_THROW(threshold_at_bpcer(s, 1.0), Error);
    EXPECT_THROW(threshold_at_bpcer(std::vector<double>{}, 0.2), Error);
}

TEST(Eer, PerfectSeparation)
{
    const std::vector<double> bona{5, 6, 7};
    const std::vector<double> att{1, 2, 3};
    const auto e = eer(bona, att);
    EXPECT_EQ(e.eer, 0.0);
    EXPECT_EQ(e.apcer, 0.0);
    EXPECT_EQ(e.bpcer, 0.0);
}

TEST(Eer, ReversedSeparationIsTotalError)
{
    // the only balanced operating point misclassifies everything
    const std::vector<double> bona{1, 2, 3};
    const std::vector<double> att{5, 6, 7};
    EXPECT_EQ(eer(bona, att).eer, 1.0);
}

TEST(Eer, NormalOracle)
{
    const auto b = test::normal_draws(100000, 2.0, 1.0, 1);
    const auto a = test::normal_draws(100000, 0.0, 1.0, 2);
    EXPECT_NEAR(eer(b, a).eer, 0.1587, 0.005);
}

TEST(Eer, IdenticalPopulations)
{
    const auto b = test::normal_draws(100000, 0.0, 1.0, 3);
    const auto a = test::normal_draws(100000, 0.0, 1.0, 4);
    EXPECT_NEAR(eer(b, a).eer, 0.5, 0.005);
}

TEST(IntraEval, RowsAndMeans)
{
    const auto f = make_fixture({"X", "Y"}, {"opencv", "stylegan"}, 2000, 2.0, 5);
    const auto r = intra_eval(f.manifests, f.tables);
    ASSERT_EQ(r.rows.size(), 4u);
    double sum = 0.0;
    for (const auto& row : r.rows) {
        ASSERT_TRUE(row.eer);
        EXPECT_NEAR(*row.eer, 0.1587, 0.02);
        sum += *row.eer;
    }
    ASSERT_EQ(r.means.size(), 1u);
    EXPECT_EQ(r.means[0].source_dataset, "*");
    EXPECT_DOUBLE_EQ(r.means[0].value, sum / 4.0);
    EXPECT_EQ(intra_eval(f.manifests, f.tables, 4), r);
}

TEST(CrossEval, DiagonalAndOffDiagonal)
{
    constexpr std::size_t n = 4000;
    const auto f = make_fixture({"X", "Y"}, {"opencv"}, n, 2.0, 6);
    const auto r = cross_eval(f.manifests, f.tables, 0.2, 2);
    ASSERT_EQ(r.bpcer_rows.size(), 4u);
    for (const auto& b : r.bpcer_rows) {
        if (b.source_dataset == b.eval_dataset) EXPECT_EQ(b.bpcer, b.source_achieved_bpcer);
        // identical bona fide distributions: sampling error only
        EXPECT_NEAR(b.bpcer, 0.2, 2.0 / std::sqrt(static_cast<double>(n)));
    }
    ASSERT_EQ(r.rows.size(), 4u);
    for (const auto& row : r.rows) EXPECT_EQ(row.acer, (row.apcer + row.bpcer) / 2.0);
    ASSERT_EQ(r.means.size(), 2u);
    EXPECT_EQ(cross_eval(f.manifests, f.tables, 0.2, 1), r);
}

TEST(CrossEval, Errors)
{
    const auto f = make_fixture({"X"}, {"opencv"}, 10, 2.0, 7);
    EXPECT_THROW(cross_eval(f.manifests, f.tables, 1.2), Error);
    EXPECT_THROW(cross_eval(std::vector<DatasetManifest>{}, f.tables), Error);
    auto entries = f.tables[0].entries();
    entries.erase(entries.begin());
    const std::vector<ScoreTable> partial{ScoreTable(f.tables[0].estimator(), entries)};
    try {
        cross_eval(f.manifests, partial);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SampleSetMismatch);
    }
}
