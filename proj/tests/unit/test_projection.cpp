//*****************************************************************************
// Copyright 2026 The ALEX Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "alex/projection.hpp"
#include "alex/random.hpp"
#include "test_util.hpp"

using namespace alex;

namespace {

struct Clusters {
    std::vector<std::vector<double>> x;
    std::vector<int> labels;
};

/// Two isotropic unit-variance clusters whose centres are `gap` apart.
Clusters two_clusters(std::size_t per_cluster, std::size_t dim, double gap, std::uint64_t seed)
{
    Clusters c;
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int label = 0; label < 2; ++label)
        for (std::size_t i = 0; i < per_cluster; ++i) {
            std::vector<double> row(dim);
            for (auto& v : row)
                v = z(gen);
            row[0] += label * gap;
            c.x.push_back(std::move(row));
            c.labels.push_back(label);
        }
    return c;
}

/// Mean silhouette width over all points, Euclidean distance.
double silhouette(const std::vector<Point2>& y, const std::vector<int>& labels)
{
    const std::size_t n = y.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<int, std::pair<double, std::size_t>> by_label;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            const double d = std::hypot(y[i][0] - y[j][0], y[i][1] - y[j][1]);
            auto& [sum, count] = by_label[labels[j]];
            sum += d;
            ++count;
        }
        const auto own = by_label[labels[i]];
        const double a = own.second ? own.first / static_cast<double>(own.second) : 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [label, sc] : by_label)
            if (label != labels[i] && sc.second)
                b = std::min(b, sc.first / static_cast<double>(sc.second));
        const double s = std::max(a, b) > 0.0 ? (b - a) / std::max(a, b) : 0.0;
        total += s;
    }
    return total / static_cast<double>(n);
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_of(const std::string& haystack, const std::string& needle)
{
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1))
        ++n;
    return n;
}

} // namespace

TEST(Silhouette, OracleOnHandLayout)
{
    const std::vector<Point2> y = {{0, 0}, {1, 0}, {10, 0}, {11, 0}};
    const double s = silhouette(y, {0, 0, 1, 1});
    // point 0: a=1, b=10.5 ; point 1: a=1, b=9.5
    const double expected = ((1 - 1 / 10.5) + (1 - 1 / 9.5)) / 2.0;
    EXPECT_NEAR(s, expected, 1e-12);
}

TEST(Tsne, SeparatesGaussianClusters)
{
    const auto c = two_clusters(50, 16, 10.0, 4);
    ProjectionConfig cfg;
    cfg.seed = 7;
    const auto r = tsne(c.x, cfg);
    ASSERT_EQ(r.coords.size(), 100u);
    for (const auto& pt : r.coords) {
        EXPECT_TRUE(std::isfinite(pt[0]));
        EXPECT_TRUE(std::isfinite(pt[1]));
    }
    EXPECT_GT(silhouette(r.coords, c.labels), 0.5);
    EXPECT_LE(r.kl_final, r.kl_initial);
    EXPECT_DOUBLE_EQ(r.perplexity_used, 30.0);
}

TEST(Tsne, BitIdenticalPerSeed)
{
    const auto c = two_clusters(20, 8, 6.0, 2);
    ProjectionConfig cfg;
    cfg.iterations = 300;
    cfg.seed = 11;
    const auto a = tsne(c.x, cfg);
    const auto b = tsne(c.x, cfg);
    ASSERT_EQ(a.coords.size(), b.coords.size());
    EXPECT_EQ(std::memcmp(a.coords.data(), b.coords.data(), a.coords.size() * sizeof(Point2)), 0);
    EXPECT_EQ(a.kl_final, b.kl_final);
    cfg.seed = 12;
    const auto d = tsne(c.x, cfg);
    EXPECT_NE(std::memcmp(a.coords.data(), d.coords.data(), a.coords.size() * sizeof(Point2)), 0);
}

TEST(Tsne, SinglePointAtOrigin)
{
    const auto r = tsne(std::vector<std::vector<double>>{{1.0, 2.0, 3.0}}, ProjectionConfig{});
    ASSERT_EQ(r.coords.size(), 1u);
    EXPECT_EQ(r.coords[0][0], 0.0);
    EXPECT_EQ(r.coords[0][1], 0.0);
    EXPECT_EQ(r.kl_final, 0.0);
}

TEST(Tsne, PerplexityCappedByPointCount)
{
    const auto c = two_clusters(5, 3, 5.0, 1);
    ProjectionConfig cfg;
    cfg.iterations = 50;
    const auto r = tsne(c.x, cfg);
    EXPECT_DOUBLE_EQ(r.perplexity_used, 3.0);
    EXPECT_ALEX_ERROR(tsne(std::vector<std::vector<double>>{{0.0}, {1.0}, {2.0}}, cfg), PerplexityTooLarge);
}

TEST(Tsne, RejectsRaggedInput)
{
    EXPECT_ALEX_ERROR(tsne(std::vector<std::vector<double>>{{0.0, 1.0}, {1.0}}, ProjectionConfig{}), DimensionMismatch);
    EXPECT_ALEX_ERROR(tsne(std::vector<std::vector<double>>{}, ProjectionConfig{}), EmptyDataset);
}

TEST(Tsne, DuplicatePointsStayFinite)
{
    std::vector<std::vector<double>> x(30, std::vector<double>{1.0, 1.0});
    for (std::size_t i = 15; i < 30; ++i)
        x[i] = {5.0, 5.0};
    ProjectionConfig cfg;
    cfg.iterations = 200;
    const auto r = tsne(x, cfg);
    for (const auto& pt : r.coords) {
        EXPECT_TRUE(std::isfinite(pt[0]));
        EXPECT_TRUE(std::isfinite(pt[1]));
    }
    EXPECT_TRUE(std::isfinite(r.kl_final));
}

TEST(Tsne, PermutedInputKeepsStructure)
{
    const auto c = two_clusters(30, 10, 10.0, 9);
    std::vector<std::size_t> order(c.x.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 gen(3);
    std::shuffle(order.begin(), order.end(), gen);
    Clusters p;
    for (auto i : order) {
        p.x.push_back(c.x[i]);
        p.labels.push_back(c.labels[i]);
    }
    ProjectionConfig cfg;
    cfg.perplexity = 10;
    std::vector<double> kl_a, kl_b;
    for (std::uint64_t seed = 0; seed < 9; ++seed) {
        cfg.seed = seed;
        const auto a = tsne(c.x, cfg);
        const auto b = tsne(p.x, cfg);
        EXPECT_GT(silhouette(a.coords, c.labels), 0.5) << "seed " << seed;
        EXPECT_GT(silhouette(b.coords, p.labels), 0.5) << "seed " << seed;
        kl_a.push_back(a.kl_final);
        kl_b.push_back(b.kl_final);
    }
    std::nth_element(kl_a.begin(), kl_a.begin() + 4, kl_a.end());
    std::nth_element(kl_b.begin(), kl_b.begin() + 4, kl_b.end());
    EXPECT_NEAR(kl_b[4], kl_a[4], 0.15 * kl_a[4]);
}

TEST(Affinities, SymmetricNormalisedAndOnTarget)
{
    const auto c = two_clusters(40, 6, 4.0, 5);
    const double perplexity = 12.0;
    const auto a = input_affinities(c.x, perplexity);
    const std::size_t n = a.n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(a.p[i * n + i], 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_GE(a.p[i * n + j], 0.0);
            EXPECT_EQ(a.p[i * n + j], a.p[j * n + i]);
            sum += a.p[i * n + j];
        }
        EXPECT_NEAR(std::log(a.row_perplexity[i]), std::log(perplexity), 1e-3);
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

/// Row entropy from first principles: P(j|i) proportional to exp(-d_ij^2 / 2s^2).
TEST(Affinities, RowPerplexityMatchesDirectEntropy)
{
    const auto c = two_clusters(15, 4, 3.0, 8);
    const auto a = input_affinities(c.x, 5.0);
    const auto& x = c.x;
    auto entropy_at = [&](double beta) {
        std::vector<double> w;
        double z = 0.0;
        for (std::size_t j = 1; j < x.size(); ++j) {
            double d = 0.0;
            for (std::size_t k = 0; k < x[0].size(); ++k)
                d += (x[0][k] - x[j][k]) * (x[0][k] - x[j][k]);
            w.push_back(std::exp(-beta * d));
            z += w.back();
        }
        double h = 0.0;
        for (double v : w)
            if (v > 0)
                h -= (v / z) * std::log(v / z);
        return h;
    };
    double lo = 1e-8, hi = 1e4;
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);
        (entropy_at(mid) > std::log(5.0) ? lo : hi) = mid;
    }
    EXPECT_NEAR(std::exp(entropy_at(lo)), 5.0, 1e-6);
    EXPECT_NEAR(a.row_perplexity[0], 5.0, 5e-3);
}

TEST(ExportScatter, LabeledPointsAndLegend)
{
    alex::test::TempDir dir;
    const std::vector<Point2> coords = {{0, 0}, {1, 1}, {2, 0.5}};
    const auto files = export_scatter(coords, std::vector<int>{0, 1, 0}, dir / "fig", {"a", "b", "c"},
                                      {{0, "neg"}, {1, "pos"}}, "Test <plot>");
    const auto j = json::parse(slurp(files.json));
    ASSERT_EQ(j["points"].size(), 3u);
    EXPECT_EQ(j["points"][1]["id"], "b");
    EXPECT_EQ(j["points"][1]["label"], 1);
    EXPECT_EQ(j["points"][2]["x"], 2.0);
    const auto svg = slurp(files.svg);
    EXPECT_EQ(count_of(svg, "class=\"legend\""), 1u);
    EXPECT_EQ(count_of(svg, "<text x=\"510\""), 2u);
    EXPECT_NE(svg.find(">pos<"), std::string::npos);
    EXPECT_NE(svg.find("Test &lt;plot&gt;"), std::string::npos);
    EXPECT_EQ(count_of(svg, "r=\"3\""), 3u);
}

TEST(ExportScatter, UnlabeledHasNoLegend)
{
    alex::test::TempDir dir;
    const auto files = export_scatter({{0, 0}, {1, 1}}, std::nullopt, dir / "plain");
    const auto svg = slurp(files.svg);
    EXPECT_EQ(svg.find("legend"), std::string::npos);
    EXPECT_EQ(count_of(svg, "#1f77b4"), 2u);
    EXPECT_TRUE(json::parse(slurp(files.json))["points"][0]["label"].is_null());
}

TEST(ExportScatter, NonFiniteRejectedBeforeWrite)
{
    alex::test::TempDir dir;
    EXPECT_ALEX_ERROR(export_scatter({{0, 0}, {std::nan(""), 1}}, std::nullopt, dir / "bad"), MalformedRecord);
    EXPECT_FALSE(std::filesystem::exists(dir / "bad.json"));
    EXPECT_FALSE(std::filesystem::exists(dir / "bad.svg"));
}
