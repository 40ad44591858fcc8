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

#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alex/corpus.hpp"
#include "alex/jsonl.hpp"

namespace alex {

struct LabelScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double support = 0.0;
};

/// Confusion-matrix evaluation. `Count` is an integer type for observed data
/// and `double` for expected (population-level) confusion matrices.
template <class Count>
struct BasicEvalReport {
    std::vector<int> labels;
    /// confusion[gold][pred], indexed by position in `labels`.
    std::vector<std::vector<Count>> confusion;
    std::map<int, LabelScores> per_label;
    double accuracy = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    Count n{};
    /// Cells whose denominator was zero and were reported as 0, e.g. "precision(1)".
    std::vector<std::string> degenerate;

    [[nodiscard]] double f1(int label) const
    {
        auto it = per_label.find(label);
        return it == per_label.end() ? 0.0 : it->second.f1;
    }

    [[nodiscard]] Count cell(int gold, int pred) const
    {
        return confusion[position(gold)][position(pred)];
    }

    [[nodiscard]] std::size_t position(int label) const
    {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label)
                return i;
        throw Error(ErrorKind::UnknownLabel, "label " + std::to_string(label) + " not in report");
    }
};

using EvalReport = BasicEvalReport<std::int64_t>;
using ExpectedEvalReport = BasicEvalReport<double>;

/// Fills every derived score from `report.labels` and `report.confusion`.
/// Zero denominators yield 0 and are listed in `degenerate`. Macro-F1 averages
/// over labels that occur in gold or predictions.
template <class Count>
void finalize_report(BasicEvalReport<Count>& report)
{
    const std::size_t k = report.labels.size();
    report.per_label.clear();
    report.degenerate.clear();
    Count n{};
    Count trace{};
    for (std::size_t g = 0; g < k; ++g)
        for (std::size_t p = 0; p < k; ++p) {
            n += report.confusion[g][p];
            if (g == p)
                trace += report.confusion[g][p];
        }
    report.n = n;

    double macro_sum = 0.0;
    std::size_t macro_count = 0;
    for (std::size_t c = 0; c < k; ++c) {
        Count tp = report.confusion[c][c];
        Count col{};
        Count row{};
        for (std::size_t j = 0; j < k; ++j) {
            col += report.confusion[j][c];
            row += report.confusion[c][j];
        }
        const double dtp = static_cast<double>(tp);
        const double fp = static_cast<double>(col - tp);
        const double fn = static_cast<double>(row - tp);
        LabelScores s;
        s.support = static_cast<double>(row);
        const auto name = std::to_string(report.labels[c]);
        if (dtp + fp > 0.0)
            s.precision = dtp / (dtp + fp);
        else
            report.degenerate.push_back("precision(" + name + ")");
        if (dtp + fn > 0.0)
            s.recall = dtp / (dtp + fn);
        else
            report.degenerate.push_back("recall(" + name + ")");
        if (2.0 * dtp + fp + fn > 0.0) {
            s.f1 = 2.0 * dtp / (2.0 * dtp + fp + fn);
            macro_sum += s.f1;
            ++macro_count;
        } else {
            report.degenerate.push_back("f1(" + name + ")");
        }
        report.per_label[report.labels[c]] = s;
    }
    const double dn = static_cast<double>(n);
    const double dtr = static_cast<double>(trace);
    report.accuracy = dn > 0.0 ? dtr / dn : 0.0;
    // Pooled over classes every error is one FP and one FN, so this equals accuracy.
    const double pooled_fp = dn - dtr;
    const double pooled_fn = dn - dtr;
    report.micro_f1 = dn > 0.0 ? 2.0 * dtr / (2.0 * dtr + pooled_fp + pooled_fn) : 0.0;
    report.macro_f1 = macro_count ? macro_sum / static_cast<double>(macro_count) : 0.0;
}

template <class Count>
BasicEvalReport<Count> report_from_confusion(std::vector<int> labels, std::vector<std::vector<Count>> confusion)
{
    BasicEvalReport<Count> r;
    r.labels = std::move(labels);
    r.confusion = std::move(confusion);
    if (r.confusion.size() != r.labels.size())
        throw Error(ErrorKind::DimensionMismatch, "confusion matrix rows differ from label count");
    for (const auto& row : r.confusion)
        if (row.size() != r.labels.size())
            throw Error(ErrorKind::DimensionMismatch, "confusion matrix is not square");
    finalize_report(r);
    return r;
}

inline EvalReport evaluate(std::span<const int> gold, std::span<const int> pred, const TaskSpec& task)
{
    if (gold.size() != pred.size())
        throw Error(ErrorKind::LengthMismatch,
                    std::to_string(gold.size()) + " gold labels vs " + std::to_string(pred.size()) + " predictions");
    if (gold.empty())
        throw Error(ErrorKind::EmptyDataset, "nothing to evaluate");
    const std::size_t k = task.size();
    std::vector<std::vector<std::int64_t>> confusion(k, std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (!task.contains(gold[i]))
            throw Error(ErrorKind::UnknownLabel, "gold label " + std::to_string(gold[i]) + " at position " + std::to_string(i));
        if (!task.contains(pred[i]))
            throw Error(ErrorKind::UnknownLabel, "predicted label " + std::to_string(pred[i]) + " at position " + std::to_string(i));
        ++confusion[task.index_of(gold[i])][task.index_of(pred[i])];
    }
    std::vector<int> labels;
    for (const auto& l : task.labels)
        labels.push_back(l.id);
    return report_from_confusion(std::move(labels), std::move(confusion));
}

/// Binary tasks report F1 of the report label; multi-class tasks report micro-F1.
template <class Count>
std::pair<std::string, double> headline(const BasicEvalReport<Count>& report, const TaskSpec& task)
{
    if (task.size() == 2)
        return {"F1(" + std::to_string(task.report_label) + ")", report.f1(task.report_label)};
    return {"micro_f1", report.micro_f1};
}

template <class Count>
ordered_json to_json(const BasicEvalReport<Count>& r)
{
    ordered_json per_label = ordered_json::object();
    for (const auto& [label, s] : r.per_label)
        per_label[std::to_string(label)] = {
            {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    return {
        {"labels", r.labels},     {"confusion", r.confusion}, {"per_label", per_label},
        {"accuracy", r.accuracy}, {"micro_f1", r.micro_f1},   {"macro_f1", r.macro_f1},
        {"n", r.n},               {"degenerate", r.degenerate},
    };
}

/// Text table with one row per run: headline F1, accuracy, micro-F1, macro-F1.
template <class Count>
std::string render_table(const std::vector<std::pair<std::string, BasicEvalReport<Count>>>& rows, const TaskSpec& task)
{
    std::size_t width = 5;
    for (const auto& [name, _] : rows)
        width = std::max(width, name.size());
    const std::string f1_name = "F1(" + std::to_string(task.report_label) + ")";
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(s.size(), w), ' ');
        return s;
    };
    auto pct = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%8.2f", 100.0 * v);
        return std::string(buf);
    };
    std::string out = pad("Run", width) + " | " + pad(f1_name, 8) + " | Accuracy | Micro-F1 | Macro-F1\n";
    out += std::string(width, '-') + "-+-" + std::string(std::max<std::size_t>(8, f1_name.size()), '-') +
           "-+----------+----------+---------\n";
    for (const auto& [name, r] : rows)
        out += pad(name, width) + " | " + pad(pct(r.f1(task.report_label)), std::max<std::size_t>(8, f1_name.size())) +
               " | " + pct(r.accuracy) + " | " + pct(r.micro_f1) + " | " + pct(r.macro_f1) + "\n";
    return out;
}

template <class Count>
std::string render_per_label(const BasicEvalReport<Count>& r, const TaskSpec& task)
{
    std::string out = "label            precision   recall       f1   support\n";
    for (const auto& l : task.labels) {
        const auto& s = r.per_label.at(l.id);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-3d %-12.12s %9.4f %8.4f %8.4f %9.1f\n", l.id, l.name.c_str(), s.precision,
                      s.recall, s.f1, s.support);
        out += buf;
    }
    return out;
}

} // namespace alex
