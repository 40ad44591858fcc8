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

#include "alex/metrics.hpp"
#include "alex/random.hpp"
#include "alex/synthetic.hpp"
#include "test_util.hpp"

using namespace alex;

namespace {

struct Oracle {
    std::map<int, std::int64_t> tp, fp, fn;
    std::int64_t correct = 0;
    std::map<std::pair<int, int>, std::int64_t> cells;
};

/// Independent tally: one pass per label over all examples.
Oracle brute_force(const std::vector<int>& gold, const std::vector<int>& pred, const std::vector<int>& labels)
{
    Oracle o;
    for (int c : labels)
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if (gold[i] == c && pred[i] == c)
                ++o.tp[c];
            if (gold[i] != c && pred[i] == c)
                ++o.fp[c];
            if (gold[i] == c && pred[i] != c)
                ++o.fn[c];
        }
    for (std::size_t i = 0; i < gold.size(); ++i) {
        o.correct += gold[i] == pred[i];
        for (int g : labels)
            for (int p : labels)
                if (gold[i] == g && pred[i] == p)
                    ++o.cells[{g, p}];
    }
    return o;
}

double ratio(std::int64_t a, std::int64_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }

} // namespace

TEST(Evaluate, PerfectPrediction)
{
    const auto task = synthetic::three_class_task();
    const std::vector<int> y{0, 1, 2, 2, 1};
    const auto r = evaluate(y, y, task);
    EXPECT_EQ(r.accuracy, 1.0);
    for (const auto& [label, s] : r.per_label)
        EXPECT_EQ(s.f1, 1.0);
    EXPECT_EQ(r.macro_f1, 1.0);
    EXPECT_EQ(r.micro_f1, 1.0);
}

TEST(Evaluate, HandCountedBinary)
{
    const auto r = evaluate(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 0, 0}, synthetic::binary_task());
    EXPECT_NEAR(r.per_label.at(1).precision, 1.0, 1e-12);
    EXPECT_NEAR(r.per_label.at(1).recall, 0.5, 1e-12);
    EXPECT_NEAR(r.f1(1), 2.0 / 3.0, 1e-12);
    EXPECT_EQ(r.cell(1, 0), 1);
    EXPECT_EQ(r.n, 4);
    EXPECT_EQ(r.accuracy, 0.75);
}

TEST(Evaluate, Errors)
{
    const auto task = synthetic::binary_task();
    EXPECT_ALEX_ERROR(evaluate(std::vector<int>{1}, std::vector<int>{1, 0}, task), LengthMismatch);
    EXPECT_ALEX_ERROR(evaluate(std::vector<int>{1}, std::vector<int>{3}, task), UnknownLabel);
    EXPECT_ALEX_ERROR(evaluate(std::vector<int>{4}, std::vector<int>{1}, task), UnknownLabel);
    EXPECT_ALEX_ERROR(evaluate(std::vector<int>{}, std::vector<int>{}, task), EmptyDataset);
}

TEST(Evaluate, ZeroDivisionIsZeroAndFlagged)
{
    const auto task = synthetic::binary_task();
    const auto r = evaluate(std::vector<int>{0, 0}, std::vector<int>{0, 0}, task);
    EXPECT_EQ(r.f1(1), 0.0);
    EXPECT_EQ(r.per_label.at(1).precision, 0.0);
    EXPECT_NE(std::find(r.degenerate.begin(), r.degenerate.end(), "f1(1)"), r.degenerate.end());
    EXPECT_NE(std::find(r.degenerate.begin(), r.degenerate.end(), "precision(1)"), r.degenerate.end());
    // Macro-F1 covers only labels that occur.
    EXPECT_EQ(r.macro_f1, 1.0);
    const auto [name, value] = headline(r, task);
    EXPECT_EQ(name, "F1(1)");
    EXPECT_EQ(value, 0.0);
}

TEST(Evaluate, MatchesBruteForceOracle)
{
    Rng rng(100);
    for (int t = 0; t < 1000; ++t) {
        const bool three = t % 2 == 1;
        const auto task = three ? synthetic::three_class_task() : synthetic::binary_task();
        std::vector<int> labels;
        for (const auto& l : task.labels)
            labels.push_back(l.id);
        const auto n = 1 + rng.below(60);
        std::vector<int> gold(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = labels[rng.below(labels.size())];
            pred[i] = rng.bernoulli(0.6) ? gold[i] : labels[rng.below(labels.size())];
        }
        const auto r = evaluate(gold, pred, task);
        const auto o = brute_force(gold, pred, labels);
        double macro = 0;
        int defined = 0;
        for (int c : labels) {
            for (int p : labels)
                ASSERT_EQ(r.cell(c, p), o.cells.count({c, p}) ? o.cells.at({c, p}) : 0);
            const auto tp = o.tp.count(c) ? o.tp.at(c) : 0;
            const auto fp = o.fp.count(c) ? o.fp.at(c) : 0;
            const auto fn = o.fn.count(c) ? o.fn.at(c) : 0;
            ASSERT_EQ(r.per_label.at(c).precision, ratio(tp, tp + fp));
            ASSERT_EQ(r.per_label.at(c).recall, ratio(tp, tp + fn));
            ASSERT_EQ(r.per_label.at(c).f1, ratio(2 * tp, 2 * tp + fp + fn));
            if (2 * tp + fp + fn > 0) {
                macro += ratio(2 * tp, 2 * tp + fp + fn);
                ++defined;
            }
        }
        ASSERT_EQ(r.accuracy, ratio(o.correct, static_cast<std::int64_t>(n)));
        ASSERT_EQ(r.macro_f1, macro / defined);
        ASSERT_EQ(r.n, static_cast<std::int64_t>(n));
        if (three) {
            ASSERT_EQ(r.micro_f1, r.accuracy);
        }
    }
}

TEST(Evaluate, MacroInvariantUnderJointRelabeling)
{
    const auto task = synthetic::three_class_task();
    Rng rng(12);
    const std::vector<int> perm{2, 0, 1};
    for (int t = 0; t < 100; ++t) {
        std::vector<int> gold(30), pred(30), pg(30), pp(30);
        for (std::size_t i = 0; i < 30; ++i) {
            gold[i] = static_cast<int>(rng.below(3));
            pred[i] = static_cast<int>(rng.below(3));
            pg[i] = perm[static_cast<std::size_t>(gold[i])];
            pp[i] = perm[static_cast<std::size_t>(pred[i])];
        }
        EXPECT_NEAR(evaluate(gold, pred, task).macro_f1, evaluate(pg, pp, task).macro_f1, 1e-12);
    }
}

TEST(Evaluate, AccuracyInvariantUnderExampleOrder)
{
    const auto task = synthetic::three_class_task();
    Rng rng(13);
    std::vector<std::pair<int, int>> rows(50);
    for (auto& [g, p] : rows) {
        g = static_cast<int>(rng.below(3));
        p = static_cast<int>(rng.below(3));
    }
    auto acc = [&] {
        std::vector<int> g, p;
        for (auto [a, b] : rows) {
            g.push_back(a);
            p.push_back(b);
        }
        return evaluate(g, p, task);
    };
    const auto before = acc();
    rng.shuffle(std::span<std::pair<int, int>>(rows));
    const auto after = acc();
    EXPECT_EQ(before.accuracy, after.accuracy);
    EXPECT_EQ(before.confusion, after.confusion);
}

TEST(Headline, BinaryAndMulticlass)
{
    ExpectedEvalReport r = report_from_confusion<double>({0, 1}, {{0.5, 0.0}, {0.05, 0.45}});
    EXPECT_EQ(headline(r, synthetic::binary_task()).first, "F1(1)");
    EXPECT_NEAR(headline(r, synthetic::binary_task()).second, 0.9 / 0.95, 1e-12);
    const auto task = synthetic::three_class_task();
    const auto m = evaluate(std::vector<int>{0, 1, 2, 1}, std::vector<int>{0, 1, 1, 1}, task);
    EXPECT_EQ(headline(m, task), (std::pair<std::string, double>{"micro_f1", m.accuracy}));
}

TEST(Headline, FourDigitF1FromConfusion)
{
    // A confusion with F1(1) = 0.9497: 2TP / (2TP + FP + FN) with TP = 9497, FP + FN = 1006.
    const auto r = report_from_confusion<std::int64_t>({0, 1}, {{5000, 503}, {503, 9497}});
    EXPECT_EQ(headline(r, synthetic::binary_task()).first, "F1(1)");
    EXPECT_NEAR(headline(r, synthetic::binary_task()).second, 0.9497, 1e-12);
}

TEST(Report, JsonAndTables)
{
    const auto task = synthetic::binary_task();
    const auto r = evaluate(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 0, 0, 0}, task);
    const auto j = to_json(r);
    EXPECT_EQ(j["confusion"], ordered_json::parse("[[2,0],[1,1]]"));
    EXPECT_EQ(j["n"], 4);
    EXPECT_TRUE(j.contains("macro_f1"));
    const auto table = render_table<std::int64_t>({{"base", r}, {"corrected", r}}, task);
    EXPECT_NE(table.find("F1(1)"), std::string::npos);
    EXPECT_NE(table.find("Macro-F1"), std::string::npos);
    EXPECT_NE(table.find("   66.67"), std::string::npos);
    EXPECT_NE(table.find("   75.00"), std::string::npos);
    EXPECT_NE(render_per_label(r, task).find("self_report"), std::string::npos);
    EXPECT_ALEX_ERROR(report_from_confusion<std::int64_t>({0, 1}, {{1, 2}}), DimensionMismatch);
}
