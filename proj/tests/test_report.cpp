#include "qmad/report.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace qmad;
using namespace qmad::report;

namespace {

madeval::MetricReport sample_report()
{
    madeval::MetricReport r;
    r.rows = {{"A", "X", "X", "opencv", 0.5, 0.1, 0.1, 0.1, 0.1},
              {"B", "X", "X", "opencv", 1.5, 0.3, 0.3, 0.3, 0.3},
              {"A", "X", "X", "stylegan", 0.5, 0.4, 0.4, 0.4, 0.4},
              {"B", "X", "X", "stylegan", 1.5, 0.2, 0.2, 0.2, 0.2}};
    r.means = {{"A", "*", 0.25}, {"B", "*", 0.25}};
    return r;
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

} // namespace

TEST(Provenance, Format)
{
    EXPECT_EQ(provenance("eer", 1, 255), "qmad 0.1.0 command=eer config=0000000000000001 registry=00000000000000ff");
}

TEST(Eer, MinPerRowMarker)
{
    std::ostringstream out;
    write_eer_long(out, sample_report(), "hdr");
    const auto l = lines(out.str());
    ASSERT_EQ(l.size(), 8u);
    EXPECT_EQ(l[0], "# hdr");
    EXPECT_EQ(l[1], "estimator,dataset,attack_type,eer,threshold,apcer,bpcer,min_per_row");
    EXPECT_EQ(l[2], "A,X,opencv,0.1,0.5,0.1,0.1,1");
    EXPECT_EQ(l[3], "B,X,opencv,0.3,1.5,0.3,0.3,0");
    EXPECT_EQ(l[4], "A,X,stylegan,0.4,0.5,0.4,0.4,0");
    EXPECT_EQ(l[6], "A,mean,mean,0.25,,,,");
}

TEST(Eer, WideLayout)
{
    std::ostringstream out;
    const std::vector<std::string> names{"A", "B"};
    write_eer_wide(out, sample_report(), names, "");
    const auto l = lines(out.str());
    ASSERT_EQ(l.size(), 4u);
    EXPECT_EQ(l[0], "dataset,attack_type,A,B,min_per_row");
    EXPECT_EQ(l[1], "X,opencv,0.1000,0.3000,A");
    EXPECT_EQ(l[2], "X,stylegan,0.4000,0.2000,B");
    EXPECT_EQ(l[3], "mean,,0.2500,0.2500,A");
}

TEST(Fdr, InfiniteIsSpelledOut)
{
    std::vector<FdrRow> rows{{"X", "opencv", "A", {std::numeric_limits<double>::infinity(), true}},
                             {"X", "opencv", "B", {1.25, false}}};
    std::ostringstream out;
    write_fdr_long(out, rows, "");
    EXPECT_EQ(lines(out.str())[1], "X,opencv,A,inf");
    std::ostringstream wide;
    const std::vector<std::string> names{"A", "B"};
    write_fdr_wide(wide, rows, names, "");
    EXPECT_EQ(lines(wide.str())[1], "X,opencv,inf,1.2500");
}

TEST(Json, InfinityAsString)
{
    auto r = sample_report();
    r.rows[0].threshold = std::numeric_limits<double>::infinity();
    const auto j = to_json(r);
    EXPECT_EQ(j["rows"][0]["threshold"], "inf");
    EXPECT_EQ(j["rows"][1]["eer"], 0.3);
}

TEST(Svg, Deterministic)
{
    stats::KdeCurve c{{0.0, 1.0, 2.0}, {0.1, 0.5, 0.1}, 0.3, false};
    std::vector<svg::Series> s{{"bonafide", &c}, {"a<b", &c}};
    std::ostringstream a, b;
    svg::curves(a, "T & U", s);
    svg::curves(b, "T & U", s);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_NE(a.str().find("T &amp; U"), std::string::npos);
    EXPECT_NE(a.str().find("a&lt;b"), std::string::npos);

    stats::OverlapMatrix m{{"A", "B"}, {{1.0, 0.2}, {0.2, 1.0}}, stats::Tail::Top, 0.1};
    std::ostringstream h;
    svg::heatmap(h, "overlap", m);
    EXPECT_EQ(h.str().rfind("<svg", 0), 0u);
    EXPECT_NE(h.str().find(">0.20<"), std::string::npos);
}
