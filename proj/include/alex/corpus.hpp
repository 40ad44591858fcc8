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
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "alex/error.hpp"
#include "alex/jsonl.hpp"
#include "alex/random.hpp"

namespace alex {

enum class Source { twitter, reddit, other };

inline std::string_view to_string(Source s) noexcept
{
    switch (s) {
    case Source::twitter: return "twitter";
    case Source::reddit: return "reddit";
    case Source::other: return "other";
    }
    return "other";
}

inline Source source_from_string(std::string_view s) noexcept
{
    if (s == "twitter")
        return Source::twitter;
    if (s == "reddit")
        return Source::reddit;
    return Source::other;
}

struct Post {
    std::string id;
    std::string text;
    Source source = Source::other;
    std::map<std::string, std::string> meta;
};

enum class CorrectionMode { flip_binary, to_majority };

struct LabelDef {
    int id = 0;
    std::string name;
};

/// Label set plus the verifier's scope and correction rule for one task.
struct TaskSpec {
    std::string task_id;
    std::vector<LabelDef> labels;
    int report_label = 1;
    std::set<int> verify_scope;
    CorrectionMode correction_mode = CorrectionMode::flip_binary;
    std::optional<int> majority_label;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }

    [[nodiscard]] bool contains(int label) const noexcept
    {
        return std::any_of(labels.begin(), labels.end(), [&](const LabelDef& d) { return d.id == label; });
    }

    /// Position of `label` in the ordered label list; also the classifier output index.
    [[nodiscard]] std::size_t index_of(int label) const
    {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i].id == label)
                return i;
        throw Error(ErrorKind::UnknownLabel, "label " + std::to_string(label) + " not in task " + task_id);
    }

    [[nodiscard]] const std::string& name_of(int label) const { return labels[index_of(label)].name; }

    [[nodiscard]] bool in_scope(int label) const noexcept { return verify_scope.count(label) != 0; }

    void validate() const
    {
        auto fail = [&](const std::string& why) { throw Error(ErrorKind::InvalidTask, task_id + ": " + why); };
        if (labels.empty())
            fail("label set is empty");
        std::set<int> seen;
        for (const auto& l : labels)
            if (!seen.insert(l.id).second)
                fail("duplicate label id " + std::to_string(l.id));
        if (!contains(report_label))
            fail("report_label not in labels");
        for (int l : verify_scope)
            if (!contains(l))
                fail("verify_scope label " + std::to_string(l) + " not in labels");
        if (correction_mode == CorrectionMode::flip_binary && labels.size() != 2)
            fail("flip_binary requires exactly two labels");
        if (correction_mode == CorrectionMode::to_majority) {
            if (!majority_label)
                fail("to_majority requires majority_label");
            if (!contains(*majority_label))
                fail("majority_label not in labels");
            if (in_scope(*majority_label))
                fail("majority_label must not be in verify_scope");
        }
    }
};

inline json to_json(const TaskSpec& task)
{
    json labels = json::array();
    for (const auto& l : task.labels)
        labels.push_back({{"id", l.id}, {"name", l.name}});
    json j = {
        {"task_id", task.task_id},
        {"labels", labels},
        {"report_label", task.report_label},
        {"verify_scope", std::vector<int>(task.verify_scope.begin(), task.verify_scope.end())},
        {"correction_mode", task.correction_mode == CorrectionMode::flip_binary ? "flip_binary" : "to_majority"},
    };
    if (task.majority_label)
        j["majority_label"] = *task.majority_label;
    return j;
}

inline TaskSpec task_from_json(const json& j)
{
    TaskSpec t;
    try {
        t.task_id = j.at("task_id").get<std::string>();
        for (const auto& l : j.at("labels")) {
            if (l.is_object())
                t.labels.push_back({l.at("id").get<int>(), l.value("name", std::to_string(l.at("id").get<int>()))});
            else
                t.labels.push_back({l.get<int>(), std::to_string(l.get<int>())});
        }
        t.report_label = j.value("report_label", 1);
        for (int l : j.value("verify_scope", std::vector<int>{}))
            t.verify_scope.insert(l);
        const auto mode = j.value("correction_mode", std::string("flip_binary"));
        if (mode == "flip_binary")
            t.correction_mode = CorrectionMode::flip_binary;
        else if (mode == "to_majority")
            t.correction_mode = CorrectionMode::to_majority;
        else
            throw Error(ErrorKind::InvalidTask, "unknown correction_mode '" + mode + "'");
        if (j.contains("majority_label") && !j["majority_label"].is_null())
            t.majority_label = j["majority_label"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidTask, e.what());
    }
    t.validate();
    return t;
}

inline TaskSpec load_task(const std::filesystem::path& path)
{
    return task_from_json(read_json_file(path));
}

/// A post and its class; `label` is absent for inference-only data.
struct LabeledExample {
    Post post;
    std::optional<int> label;
};

enum class Split { train, validation, test, unsplit };

inline std::string_view to_string(Split s) noexcept
{
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    case Split::unsplit: return "unsplit";
    }
    return "unsplit";
}

inline Split split_from_string(std::string_view s)
{
    if (s == "train")
        return Split::train;
    if (s == "validation")
        return Split::validation;
    if (s == "test")
        return Split::test;
    if (s == "unsplit")
        return Split::unsplit;
    throw Error(ErrorKind::ConfigError, "unknown split '" + std::string(s) + "'");
}

struct Dataset {
    TaskSpec task;
    Split split = Split::unsplit;
    std::vector<LabeledExample> examples;

    [[nodiscard]] std::size_t size() const noexcept { return examples.size(); }

    [[nodiscard]] bool labeled() const noexcept
    {
        return std::all_of(examples.begin(), examples.end(), [](const auto& e) { return e.label.has_value(); });
    }
};

enum class DataFormat { jsonl, csv, tsv };

inline DataFormat format_from_path(const std::filesystem::path& path)
{
    const auto ext = path.extension().string();
    if (ext == ".csv")
        return DataFormat::csv;
    if (ext == ".tsv" || ext == ".tab")
        return DataFormat::tsv;
    return DataFormat::jsonl;
}

namespace detail {

inline bool is_blank(std::string_view s) noexcept
{
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; });
}

class DatasetBuilder {
public:
    explicit DatasetBuilder(const TaskSpec& task) { dataset_.task = task; }

    void add(std::size_t line, Post post, std::optional<int> label)
    {
        const auto where = "line " + std::to_string(line);
        if (post.id.empty())
            throw Error(ErrorKind::MalformedRecord, where + ": empty id");
        if (is_blank(post.text))
            throw Error(ErrorKind::MalformedRecord, where + ": empty text");
        if (label && !dataset_.task.contains(*label))
            throw Error(ErrorKind::UnknownLabel,
                        where + ": label " + std::to_string(*label) + " not in task " + dataset_.task.task_id);
        if (!ids_.insert(post.id).second)
            throw Error(ErrorKind::DuplicateId, where + ": duplicate id '" + post.id + "'");
        dataset_.examples.push_back({std::move(post), label});
    }

    Dataset finish() && { return std::move(dataset_); }

private:
    Dataset dataset_;
    std::unordered_set<std::string> ids_;
};

inline std::optional<int> parse_int(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        return std::nullopt;
    return v;
}

/// Reads one delimited record; quoted fields may span lines. Returns false at EOF.
inline bool read_delimited_record(std::istream& in, char delim, std::vector<std::string>& fields, std::size_t& line_no)
{
    fields.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    bool field_was_quoted = false;
    int ch;
    while ((ch = in.get()) != EOF) {
        any = true;
        const char c = static_cast<char>(ch);
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line_no;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty() && !field_was_quoted) {
            in_quotes = true;
            field_was_quoted = true;
        } else if (c == delim) {
            fields.push_back(std::move(field));
            field.clear();
            field_was_quoted = false;
        } else if (c == '\n') {
            ++line_no;
            if (!field.empty() && field.back() == '\r')
                field.pop_back();
            fields.push_back(std::move(field));
            return true;
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes)
        throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no + 1) + ": unterminated quote");
    if (!any)
        return false;
    ++line_no;
    if (!field.empty() && field.back() == '\r')
        field.pop_back();
    fields.push_back(std::move(field));
    return true;
}

inline Dataset parse_delimited(std::istream& in, char delim, const TaskSpec& task)
{
    DatasetBuilder builder(task);
    std::vector<std::string> fields;
    std::size_t line_no = 0;
    if (!read_delimited_record(in, delim, fields, line_no))
        throw Error(ErrorKind::MalformedRecord, "line 1: missing header row");
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < fields.size(); ++i)
        col[fields[i]] = i;
    if (!col.count("id") || !col.count("text"))
        throw Error(ErrorKind::MalformedRecord, "line 1: header must contain id and text columns");
    const bool has_label = col.count("label") != 0;
    const bool has_source = col.count("source") != 0;
    while (true) {
        const std::size_t start = line_no + 1;
        if (!read_delimited_record(in, delim, fields, line_no))
            break;
        if (fields.size() == 1 && fields[0].empty())
            continue;
        const auto where = "line " + std::to_string(start);
        if (fields.size() < col.size())
            throw Error(ErrorKind::MalformedRecord, where + ": expected " + std::to_string(col.size()) + " columns");
        Post post{fields[col["id"]], fields[col["text"]], Source::other, {}};
        if (has_source)
            post.source = source_from_string(fields[col["source"]]);
        std::optional<int> label;
        if (has_label && !fields[col["label"]].empty()) {
            label = parse_int(fields[col["label"]]);
            if (!label)
                throw Error(ErrorKind::MalformedRecord, where + ": label is not an integer");
        }
        builder.add(start, std::move(post), label);
    }
    return std::move(builder).finish();
}

} // namespace detail

inline Dataset parse_dataset_jsonl(std::istream& in, const TaskSpec& task)
{
    detail::DatasetBuilder builder(task);
    for_each_jsonl<json>(in, [&](std::size_t line, const json& j) {
        const auto where = "line " + std::to_string(line);
        Post post;
        std::optional<int> label;
        try {
            if (!j.contains("id") || !j.contains("text"))
                throw Error(ErrorKind::MalformedRecord, where + ": missing id or text");
            const auto& id = j["id"];
            post.id = id.is_string() ? id.get<std::string>() : id.dump();
            post.text = j["text"].get<std::string>();
            if (j.contains("source") && j["source"].is_string())
                post.source = source_from_string(j["source"].get<std::string>());
            if (j.contains("meta") && j["meta"].is_object())
                for (const auto& [k, v] : j["meta"].items())
                    post.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
            if (j.contains("label") && !j["label"].is_null()) {
                if (!j["label"].is_number_integer())
                    throw Error(ErrorKind::MalformedRecord, where + ": label must be an integer");
                label = j["label"].get<int>();
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, where + ": " + e.what());
        }
        builder.add(line, std::move(post), label);
    });
    return std::move(builder).finish();
}

inline Dataset load_dataset(const std::filesystem::path& path, DataFormat format, const TaskSpec& task)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    switch (format) {
    case DataFormat::csv: return detail::parse_delimited(in, ',', task);
    case DataFormat::tsv: return detail::parse_delimited(in, '\t', task);
    case DataFormat::jsonl: break;
    }
    return parse_dataset_jsonl(in, task);
}

inline Dataset load_dataset(const std::filesystem::path& path, const TaskSpec& task)
{
    return load_dataset(path, format_from_path(path), task);
}

inline json to_json(const LabeledExample& ex)
{
    json j = {{"id", ex.post.id}, {"text", ex.post.text}};
    if (ex.label)
        j["label"] = *ex.label;
    if (ex.post.source != Source::other)
        j["source"] = to_string(ex.post.source);
    if (!ex.post.meta.empty())
        j["meta"] = ex.post.meta;
    return j;
}

inline std::string to_jsonl(const Dataset& dataset)
{
    std::string out;
    for (const auto& ex : dataset.examples) {
        out += dump_line(to_json(ex));
        out += '\n';
    }
    return out;
}

inline void save_dataset(const Dataset& dataset, const std::filesystem::path& path)
{
    write_file(path, to_jsonl(dataset));
}

/// Count per label. Only labels that occur appear as keys.
inline std::map<int, std::size_t> class_histogram(const Dataset& dataset)
{
    std::map<int, std::size_t> counts;
    for (const auto& ex : dataset.examples) {
        if (!ex.label)
            throw Error(ErrorKind::UnlabeledDataset, "example '" + ex.post.id + "' has no label");
        ++counts[*ex.label];
    }
    return counts;
}

/// Partition into `ratios.size()` datasets, stratified by label. Each class is
/// shuffled with its own seeded stream and apportioned by largest remainder;
/// leftover units are steered toward the splits furthest below their global size.
inline std::vector<Dataset> stratified_split(const Dataset& dataset, const std::vector<double>& ratios, std::uint64_t seed)
{
    if (ratios.empty())
        throw Error(ErrorKind::BadRatios, "no ratios given");
    double sum = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0) || !std::isfinite(r))
            throw Error(ErrorKind::BadRatios, "ratios must be positive");
        sum += r;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorKind::BadRatios, "ratios sum to " + std::to_string(sum) + ", expected 1");

    const std::size_t k = ratios.size();
    const std::size_t n = dataset.size();

    // Group by label; unlabeled examples form their own stratum.
    std::map<std::optional<int>, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < n; ++i)
        strata[dataset.examples[i].label].push_back(i);

    auto floor_alloc = [&](std::size_t count, std::vector<std::size_t>& alloc, std::vector<double>& frac) {
        alloc.assign(k, 0);
        frac.assign(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            const double exact = ratios[j] * static_cast<double>(count);
            alloc[j] = static_cast<std::size_t>(std::floor(exact + 1e-9));
            frac[j] = exact - static_cast<double>(alloc[j]);
        }
    };

    // Global targets by largest remainder.
    std::vector<std::size_t> target;
    std::vector<double> target_frac;
    floor_alloc(n, target, target_frac);
    {
        std::size_t assigned = 0;
        for (auto t : target)
            assigned += t;
        std::vector<std::size_t> order(k);
        for (std::size_t j = 0; j < k; ++j)
            order[j] = j;
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return target_frac[a] > target_frac[b]; });
        for (std::size_t u = 0; assigned < n; ++u, ++assigned)
            ++target[order[u % k]];
    }

    std::vector<std::vector<std::size_t>> alloc_per_stratum;
    std::vector<std::vector<double>> frac_per_stratum;
    std::vector<std::size_t> current(k, 0);
    for (const auto& [label, idx] : strata) {
        std::vector<std::size_t> a;
        std::vector<double> f;
        floor_alloc(idx.size(), a, f);
        for (std::size_t j = 0; j < k; ++j)
            current[j] += a[j];
        alloc_per_stratum.push_back(std::move(a));
        frac_per_stratum.push_back(std::move(f));
    }
    // Hand out remainder units, at most one extra per split per stratum.
    std::size_t s = 0;
    for (const auto& [label, idx] : strata) {
        auto& a = alloc_per_stratum[s];
        const auto& f = frac_per_stratum[s];
        std::size_t given = 0;
        for (auto v : a)
            given += v;
        std::size_t remaining = idx.size() - given;
        std::vector<std::size_t> order(k);
        for (std::size_t j = 0; j < k; ++j)
            order[j] = j;
        std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
            const bool dx = current[x] < target[x];
            const bool dy = current[y] < target[y];
            if (dx != dy)
                return dx;
            return f[x] > f[y];
        });
        for (std::size_t u = 0; remaining > 0 && u < k; ++u, --remaining) {
            ++a[order[u]];
            ++current[order[u]];
        }
        ++s;
    }

    std::vector<std::vector<std::size_t>> members(k);
    s = 0;
    for (const auto& [label, idx] : strata) {
        std::vector<std::size_t> shuffled = idx;
        const std::string key = label ? std::to_string(*label) : std::string("unlabeled");
        Rng rng(derive_seed(seed, key, 0x5117));
        rng.shuffle(std::span<std::size_t>(shuffled));
        std::size_t pos = 0;
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t c = 0; c < alloc_per_stratum[s][j]; ++c)
                members[j].push_back(shuffled[pos++]);
        ++s;
    }

    std::vector<Dataset> out(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::sort(members[j].begin(), members[j].end());
        out[j].task = dataset.task;
        out[j].split = Split::unsplit;
        out[j].examples.reserve(members[j].size());
        for (auto i : members[j])
            out[j].examples.push_back(dataset.examples[i]);
    }
    return out;
}

} // namespace alex
