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
#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "alex/corpus.hpp"
#include "alex/model.hpp"
#include "alex/verifier.hpp"

namespace alex {

enum class PendingFallback { automatic, strict };

inline PendingFallback fallback_from_string(std::string_view s)
{
    if (s == "auto")
        return PendingFallback::automatic;
    if (s == "strict")
        return PendingFallback::strict;
    throw Error(ErrorKind::ConfigError, "fallback must be auto or strict, got '" + std::string(s) + "'");
}

struct CorrectionPolicy {
    TaskSpec task;
    PendingFallback pending_fallback = PendingFallback::automatic;
};

/// Label a refuted in-scope prediction is converted to.
inline int correction_target(int predicted_label, const TaskSpec& task)
{
    switch (task.correction_mode) {
    case CorrectionMode::flip_binary:
        if (task.size() != 2)
            throw Error(ErrorKind::PolicyMismatch, "flip_binary needs a two-label task, " + task.task_id + " has " +
                                                       std::to_string(task.size()));
        return task.labels[0].id == predicted_label ? task.labels[1].id : task.labels[0].id;
    case CorrectionMode::to_majority:
        if (!task.majority_label)
            throw Error(ErrorKind::PolicyMismatch, "to_majority without a majority label");
        return *task.majority_label;
    }
    return predicted_label;
}

enum class Provenance { kept, auto_flip, auto_majority, human };

inline std::string_view to_string(Provenance p) noexcept
{
    switch (p) {
    case Provenance::kept: return "kept";
    case Provenance::auto_flip: return "auto_flip";
    case Provenance::auto_majority: return "auto_majority";
    case Provenance::human: return "human";
    }
    return "kept";
}

struct CorrectedLabel {
    int label = 0;
    Provenance provenance = Provenance::kept;
};

/// Out-of-scope predictions and supported/inconclusive verdicts keep the label;
/// a refuted in-scope prediction is flipped or sent to the majority class.
inline CorrectedLabel correct_label(int predicted_label, const Verdict& verdict, const CorrectionPolicy& policy)
{
    const auto& task = policy.task;
    if (!task.contains(predicted_label))
        throw Error(ErrorKind::LabelOutOfTask, "prediction " + std::to_string(predicted_label) + " not in task");
    if (task.correction_mode == CorrectionMode::flip_binary && task.size() != 2)
        throw Error(ErrorKind::PolicyMismatch, "flip_binary needs a two-label task");
    if (!task.in_scope(predicted_label) || verdict.supported != Support::refuted)
        return {predicted_label, Provenance::kept};
    return {correction_target(predicted_label, task),
            task.correction_mode == CorrectionMode::flip_binary ? Provenance::auto_flip : Provenance::auto_majority};
}

inline int apply_correction(int predicted_label, const Verdict& verdict, const CorrectionPolicy& policy)
{
    return correct_label(predicted_label, verdict, policy).label;
}

enum class DecisionKind { pending, keep, set_label };

struct Decision {
    DecisionKind kind = DecisionKind::pending;
    int label = 0;

    static Decision pending() { return {}; }
    static Decision keep() { return {DecisionKind::keep, 0}; }
    static Decision set_label(int k) { return {DecisionKind::set_label, k}; }
};

inline std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// A refuted in-scope prediction awaiting (or carrying) a human decision.
struct ReviewItem {
    std::string example_id;
    std::string text;
    int predicted_label = 0;
    Verdict verdict;
    Decision decision;
    std::optional<std::string> reviewer;
    std::optional<std::string> decided_at;

    [[nodiscard]] bool pending() const noexcept { return decision.kind == DecisionKind::pending; }

    /// pending -> keep | set_label, exactly once.
    void decide(const Decision& d, const TaskSpec& task, std::optional<std::string> who = std::nullopt,
                std::optional<std::string> when = std::nullopt)
    {
        if (!pending())
            throw Error(ErrorKind::AlreadyDecided, "item '" + example_id + "' is already decided");
        if (d.kind == DecisionKind::pending)
            throw Error(ErrorKind::ConfigError, "a decision must be keep or set_label");
        if (d.kind == DecisionKind::set_label && !task.contains(d.label))
            throw Error(ErrorKind::LabelOutOfTask, "label " + std::to_string(d.label) + " not in task");
        decision = d;
        reviewer = std::move(who);
        decided_at = when ? std::move(when) : std::optional<std::string>(utc_timestamp());
    }
};

inline ordered_json to_json(const ReviewItem& item)
{
    ordered_json j = {
        {"id", item.example_id},
        {"text", item.text},
        {"predicted", item.predicted_label},
        {"verdict",
         {{"supported", std::string(to_string(item.verdict.supported))},
          {"explanation", item.verdict.explanation},
          {"attempts", item.verdict.attempts}}},
    };
    switch (item.decision.kind) {
    case DecisionKind::pending: j["decision"] = "pending"; break;
    case DecisionKind::keep: j["decision"] = "keep"; break;
    case DecisionKind::set_label:
        j["decision"] = "set_label";
        j["label"] = item.decision.label;
        break;
    }
    if (item.reviewer)
        j["reviewer"] = *item.reviewer;
    if (item.decided_at)
        j["decided_at"] = *item.decided_at;
    return j;
}

inline ReviewItem review_item_from_json(const json& j)
{
    ReviewItem item;
    item.example_id = j.at("id").get<std::string>();
    item.text = j.value("text", std::string());
    item.predicted_label = j.at("predicted").get<int>();
    if (j.contains("verdict")) {
        const auto& v = j["verdict"];
        item.verdict.example_id = item.example_id;
        item.verdict.supported = support_from_string(v.value("supported", std::string("false")));
        item.verdict.explanation = v.value("explanation", std::string());
        item.verdict.attempts = v.value("attempts", 0);
    }
    const auto decision = j.value("decision", std::string("pending"));
    if (decision == "keep")
        item.decision = Decision::keep();
    else if (decision == "set_label")
        item.decision = Decision::set_label(j.at("label").get<int>());
    else if (decision != "pending")
        throw Error(ErrorKind::MalformedRecord, "unknown decision '" + decision + "'");
    if (j.contains("reviewer") && j["reviewer"].is_string())
        item.reviewer = j["reviewer"].get<std::string>();
    if (j.contains("decided_at") && j["decided_at"].is_string())
        item.decided_at = j["decided_at"].get<std::string>();
    return item;
}

inline std::string review_queue_to_jsonl(const std::vector<ReviewItem>& queue)
{
    std::string out;
    for (const auto& item : queue) {
        out += dump_line(to_json(item));
        out += '\n';
    }
    return out;
}

inline std::vector<ReviewItem> load_review_queue(const std::filesystem::path& path)
{
    std::vector<ReviewItem> out;
    for_each_jsonl<json>(path, [&](std::size_t line, const json& j) {
        try {
            out.push_back(review_item_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

/// One pending item per in-scope prediction whose verdict is "false", sorted by id.
inline std::vector<ReviewItem> build_review_queue(const std::vector<Prediction>& predictions,
                                                  const std::vector<Verdict>& verdicts,
                                                  const std::unordered_map<std::string, std::string>& texts,
                                                  const TaskSpec& task)
{
    std::unordered_map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions)
        by_id[p.id] = &p;
    std::vector<ReviewItem> queue;
    for (const auto& v : verdicts) {
        auto it = by_id.find(v.example_id);
        if (it == by_id.end())
            throw Error(ErrorKind::IdMismatch, "verdict for unknown prediction '" + v.example_id + "'");
        const auto& p = *it->second;
        if (v.supported != Support::refuted || !task.in_scope(p.pred))
            continue;
        auto text = texts.find(p.id);
        if (text == texts.end())
            throw Error(ErrorKind::IdMismatch, "no text for flagged prediction '" + p.id + "'");
        ReviewItem item;
        item.example_id = p.id;
        item.text = text->second;
        item.predicted_label = p.pred;
        item.verdict = v;
        queue.push_back(std::move(item));
    }
    std::sort(queue.begin(), queue.end(), [](const auto& a, const auto& b) { return a.example_id < b.example_id; });
    return queue;
}

struct FinalLabel {
    std::string id;
    int final_label = 0;
    Provenance provenance = Provenance::kept;

    bool operator==(const FinalLabel&) const = default;
};

/// Final labels in prediction order. Human decisions win; pending items follow
/// the automatic rule under the `automatic` fallback and are an error under
/// `strict`. Predictions without a queue item keep their label.
inline std::vector<FinalLabel> merge_decisions(const std::vector<Prediction>& predictions,
                                               const std::vector<ReviewItem>& queue, const CorrectionPolicy& policy)
{
    std::unordered_map<std::string, const ReviewItem*> items;
    std::unordered_map<std::string, bool> known;
    for (const auto& p : predictions)
        known[p.id] = true;
    std::vector<std::string> pending;
    for (const auto& item : queue) {
        if (!known.count(item.example_id))
            throw Error(ErrorKind::IdMismatch, "review item for unknown prediction '" + item.example_id + "'");
        items[item.example_id] = &item;
        if (item.pending())
            pending.push_back(item.example_id);
    }
    if (!pending.empty() && policy.pending_fallback == PendingFallback::strict) {
        std::string ids;
        for (const auto& id : pending)
            ids += (ids.empty() ? "" : ", ") + id;
        throw Error(ErrorKind::PendingDecisions, std::to_string(pending.size()) + " pending: " + ids);
    }

    std::vector<FinalLabel> out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) {
        auto it = items.find(p.id);
        if (it == items.end()) {
            out.push_back({p.id, p.pred, Provenance::kept});
            continue;
        }
        const auto& item = *it->second;
        switch (item.decision.kind) {
        case DecisionKind::keep: out.push_back({p.id, p.pred, Provenance::human}); break;
        case DecisionKind::set_label: out.push_back({p.id, item.decision.label, Provenance::human}); break;
        case DecisionKind::pending: {
            const auto c = correct_label(p.pred, item.verdict, policy);
            out.push_back({p.id, c.label, c.provenance});
            break;
        }
        }
    }
    return out;
}

/// Automatic correction of every prediction from its verdict (missing verdict = keep).
inline std::vector<FinalLabel> correct_all(const std::vector<Prediction>& predictions,
                                           const std::vector<Verdict>& verdicts, const CorrectionPolicy& policy)
{
    std::unordered_map<std::string, const Verdict*> by_id;
    for (const auto& v : verdicts)
        by_id[v.example_id] = &v;
    std::vector<FinalLabel> out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) {
        auto it = by_id.find(p.id);
        if (it == by_id.end()) {
            out.push_back({p.id, p.pred, Provenance::kept});
            continue;
        }
        const auto c = correct_label(p.pred, *it->second, policy);
        out.push_back({p.id, c.label, c.provenance});
    }
    return out;
}

inline std::string final_labels_to_jsonl(const std::vector<FinalLabel>& labels)
{
    std::string out;
    for (const auto& f : labels) {
        out += dump_line(ordered_json{{"id", f.id}, {"final", f.final_label}, {"provenance", std::string(to_string(f.provenance))}});
        out += '\n';
    }
    return out;
}

} // namespace alex
