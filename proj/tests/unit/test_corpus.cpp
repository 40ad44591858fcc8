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

#include <fstream>
#include <set>
#include <sstream>

#include "alex/corpus.hpp"
#include "test_util.hpp"

using namespace alex;

namespace {

TaskSpec binary()
{
    TaskSpec t;
    t.task_id = "t";
    t.labels = {{0, "neg"}, {1, "pos"}};
    t.report_label = 1;
    t.verify_scope = {1};
    return t;
}

Dataset parse(const std::string& s, const TaskSpec& task = binary())
{
    std::istringstream in(s);
    return parse_dataset_jsonl(in, task);
}

Dataset random_dataset(std::size_t n, const std::vector<int>& labels, std::uint64_t seed)
{
    Dataset d;
    d.task = binary();
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i)
        d.examples.push_back({{"e" + std::to_string(i), "text " + std::to_string(i), Source::other, {}},
                              labels[rng.below(labels.size())]});
    return d;
}

Dataset with_counts(std::map<int, std::size_t> counts)
{
    Dataset d;
    d.task = binary();
    for (auto [label, c] : counts)
        for (std::size_t i = 0; i < c; ++i)
            d.examples.push_back({{std::to_string(label) + "-" + std::to_string(i), "x", Source::other, {}}, label});
    return d;
}

} // namespace

TEST(TaskSpec, Invariants)
{
    auto t = binary();
    EXPECT_NO_THROW(t.validate());
    t.report_label = 3;
    EXPECT_ALEX_ERROR(t.validate(), InvalidTask);
    t = binary();
    t.verify_scope = {0, 5};
    EXPECT_ALEX_ERROR(t.validate(), InvalidTask);
    t = binary();
    t.labels.push_back({2, "x"});
    EXPECT_ALEX_ERROR(t.validate(), InvalidTask);
    t.correction_mode = CorrectionMode::to_majority;
    EXPECT_ALEX_ERROR(t.validate(), InvalidTask);
    t.majority_label = 1;
    EXPECT_ALEX_ERROR(t.validate(), InvalidTask); // 1 is in scope
    t.verify_scope = {0};
    EXPECT_NO_THROW(t.validate());
}

TEST(TaskSpec, JsonRoundTrip)
{
    auto t = binary();
    const auto back = task_from_json(to_json(t));
    EXPECT_EQ(to_json(back), to_json(t));
}

TEST(LoadDataset, SingleJsonlLine)
{
    const auto d = parse(R"({"id":"1","text":"I tested positive","label":1})");
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d.examples[0].label, 1);
    EXPECT_EQ(d.examples[0].post.text, "I tested positive");
}

TEST(LoadDataset, UnknownLabelNamesLine)
{
    try {
        parse(R"({"id":"1","text":"x","label":5})");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnknownLabel);
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}

TEST(LoadDataset, RecordErrors)
{
    EXPECT_ALEX_ERROR(parse("{\"id\":\"1\",\"text\":\"a\"}\n{\"id\":\"1\",\"text\":\"b\"}"), DuplicateId);
    EXPECT_ALEX_ERROR(parse(R"({"id":"1","text":"   "})"), MalformedRecord);
    EXPECT_ALEX_ERROR(parse(R"({"id":"","text":"a"})"), MalformedRecord);
    EXPECT_ALEX_ERROR(parse(R"({"text":"a"})"), MalformedRecord);
    EXPECT_ALEX_ERROR(parse(R"({"id":"1","text":"a","label":"x"})"), MalformedRecord);
}

TEST(LoadDataset, UnlabeledForInference)
{
    const auto d = parse(R"({"id":"1","text":"a"})");
    EXPECT_FALSE(d.examples[0].label);
    EXPECT_FALSE(d.labeled());
    EXPECT_ALEX_ERROR(class_histogram(d), UnlabeledDataset);
}

TEST(LoadDataset, TsvMatchesIndependentLineCount)
{
    const auto path = test::data_path("three_rows.tsv");
    std::ifstream in(path);
    std::string line;
    std::getline(in, line); // header
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, '\t'))
            cols.push_back(c);
        rows.push_back(cols);
    }
    const auto d = load_dataset(path, binary());
    ASSERT_EQ(d.size(), rows.size());
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(d.examples[i].post.id, rows[i][0]);
        EXPECT_EQ(d.examples[i].post.text, rows[i][1]);
        EXPECT_EQ(d.examples[i].label, std::stoi(rows[i][2]));
        EXPECT_EQ(to_string(d.examples[i].post.source), rows[i][3]);
    }
}

TEST(LoadDataset, CsvQuotedMultilineField)
{
    test::TempDir dir;
    write_file(dir / "x.csv", "id,text,label\r\na,\"hello, \"\"world\"\"\nsecond line\",1\r\nb,plain,0\n");
    const auto d = load_dataset(dir / "x.csv", binary());
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d.examples[0].post.text, "hello, \"world\"\nsecond line");
    EXPECT_EQ(d.examples[1].post.id, "b");
    EXPECT_EQ(d.examples[1].label, 0);
}

TEST(LoadDataset, CsvErrors)
{
    test::TempDir dir;
    write_file(dir / "a.csv", "id,body\n1,x\n");
    EXPECT_ALEX_ERROR(load_dataset(dir / "a.csv", binary()), MalformedRecord);
    write_file(dir / "b.csv", "id,text,label\n1,x,7\n");
    EXPECT_ALEX_ERROR(load_dataset(dir / "b.csv", binary()), UnknownLabel);
    write_file(dir / "c.csv", "id,text,label\n1,\"open,0\n");
    EXPECT_ALEX_ERROR(load_dataset(dir / "c.csv", binary()), MalformedRecord);
}

TEST(LoadDataset, RoundTripPreservesTriplesAndUnicode)
{
    test::TempDir dir;
    auto d = parse("{\"id\":\"a\",\"text\":\"café \U0001F637 http://x.y\",\"label\":1,\"source\":\"reddit\",\"meta\":{\"k\":\"v\"}}\n"
                   "{\"id\":\"b\",\"text\":\"  Spaces  kept \",\"label\":0}\n");
    save_dataset(d, dir / "d.jsonl");
    const auto back = load_dataset(dir / "d.jsonl", binary());
    ASSERT_EQ(back.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(back.examples[i].post.id, d.examples[i].post.id);
        EXPECT_EQ(back.examples[i].post.text, d.examples[i].post.text);
        EXPECT_EQ(back.examples[i].label, d.examples[i].label);
        EXPECT_EQ(back.examples[i].post.meta, d.examples[i].post.meta);
    }
    EXPECT_EQ(to_jsonl(back), to_jsonl(d));
}

TEST(ClassHistogram, Examples)
{
    EXPECT_EQ(class_histogram(with_counts({{0, 2}, {1, 1}})), (std::map<int, std::size_t>{{0, 2}, {1, 1}}));
    EXPECT_TRUE(class_histogram(Dataset{binary(), Split::unsplit, {}}).empty());
}

TEST(ClassHistogram, MatchesBruteForceTally)
{
    const auto d = random_dataset(1000, {0, 1}, 9);
    std::size_t zeros = 0, ones = 0;
    for (const auto& ex : d.examples)
        (*ex.label == 0 ? zeros : ones) += 1;
    const auto h = class_histogram(d);
    EXPECT_EQ(h.at(0), zeros);
    EXPECT_EQ(h.at(1), ones);
    EXPECT_EQ(zeros + ones, d.size());
}

TEST(StratifiedSplit, SizesAndDisjoint)
{
    const auto d = random_dataset(10, {0, 1}, 1);
    const auto parts = stratified_split(d, {0.8, 0.2}, 3);
    ASSERT_EQ(parts.size(), 2u);
    EXPECT_EQ(parts[0].size(), 8u);
    EXPECT_EQ(parts[1].size(), 2u);
    std::set<std::string> ids;
    for (const auto& p : parts)
        for (const auto& ex : p.examples)
            EXPECT_TRUE(ids.insert(ex.post.id).second);
    EXPECT_EQ(ids.size(), 10u);
}

TEST(StratifiedSplit, PreservesClassProportions)
{
    const auto d = with_counts({{0, 50}, {1, 10}});
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto parts = stratified_split(d, {0.5, 0.5}, seed);
        for (const auto& p : parts) {
            const auto h = class_histogram(p);
            EXPECT_NEAR(static_cast<double>(h.at(0)), 25.0, 1.0);
            EXPECT_NEAR(static_cast<double>(h.at(1)), 5.0, 1.0);
        }
    }
}

TEST(StratifiedSplit, BadRatios)
{
    const auto d = with_counts({{0, 3}});
    EXPECT_ALEX_ERROR(stratified_split(d, {0.5, 0.6}, 1), BadRatios);
    EXPECT_ALEX_ERROR(stratified_split(d, {1.2, -0.2}, 1), BadRatios);
    EXPECT_ALEX_ERROR(stratified_split(d, {}, 1), BadRatios);
}

TEST(StratifiedSplit, PropertyOverRandomDatasets)
{
    Rng meta(77);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + meta.below(200);
        const auto d = random_dataset(n, {0, 1}, meta.next());
        const double a = 0.1 + 0.8 * meta.uniform();
        const std::vector<double> ratios{a, (1 - a) / 2, (1 - a) / 2};
        const auto seed = meta.next();
        const auto parts = stratified_split(d, ratios, seed);
        const auto again = stratified_split(d, ratios, seed);
        const auto full = class_histogram(d);
        std::multiset<std::string> ids;
        for (std::size_t j = 0; j < parts.size(); ++j) {
            EXPECT_EQ(to_jsonl(parts[j]), to_jsonl(again[j]));
            for (const auto& ex : parts[j].examples)
                ids.insert(ex.post.id);
            std::map<int, std::size_t> h;
            for (const auto& ex : parts[j].examples)
                ++h[*ex.label];
            for (auto [label, c] : full)
                EXPECT_LE(std::abs(static_cast<double>(h[label]) - ratios[j] * static_cast<double>(c)), 1.0 + 1e-9);
        }
        EXPECT_EQ(ids.size(), n);
        EXPECT_EQ(std::set<std::string>(ids.begin(), ids.end()).size(), n);
    }
}

TEST(StratifiedSplit, DifferentSeedsPermuteMembership)
{
    const auto d = with_counts({{0, 40}, {1, 40}});
    const auto a = stratified_split(d, {0.5, 0.5}, 1);
    const auto b = stratified_split(d, {0.5, 0.5}, 2);
    EXPECT_NE(to_jsonl(a[0]), to_jsonl(b[0]));
    EXPECT_EQ(class_histogram(a[0]), class_histogram(b[0]));
}
