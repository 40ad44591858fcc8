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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "alex/balance.hpp"
#include "alex/corpus.hpp"
#include "alex/random.hpp"

namespace alex::synthetic {

// Keyword corpora for tests and demos: label-1 posts self-report a diagnosis,
// label-0 posts talk around the topic.

inline constexpr std::array<std::string_view, 40> kFiller = {
    "today", "really",  "just",    "feeling", "week",   "home",    "work",   "family", "people", "still",
    "again", "finally", "morning", "night",   "kinda",  "honestly", "lol",   "ugh",    "so",     "very",
    "think", "maybe",   "going",   "back",    "stay",   "safe",    "update", "news",   "long",   "day",
    "after", "before",  "with",    "about",   "little", "tired",   "worse",  "better", "since",  "anyway"};

inline constexpr std::array<std::string_view, 10> kPositiveCues = {
    "tested positive", "diagnosed",       "my test came back positive", "i have covid",  "got my positive result",
    "confirmed case",  "caught the virus", "positive pcr",              "i got covid",   "my diagnosis"};

inline constexpr std::array<std::string_view, 10> kNegativeCues = {
    "wear a mask",      "vaccine appointment", "lockdown rules",  "tested negative", "stay home advice",
    "news about cases", "booster shot",        "social distance", "case numbers",    "travel restrictions"};

/// Third-party reports: contain positive cue words but describe someone else.
inline constexpr std::array<std::string_view, 6> kHardNegatives = {
    "my neighbour tested positive",  "her cousin was diagnosed", "a coworker got his positive result",
    "his roommate caught the virus", "their aunt has a positive pcr", "our landlord is a confirmed case"};

struct CorpusSpec {
    std::size_t size = 200;
    /// Fraction of label-1 posts.
    double positive_rate = 0.5;
    /// Probability a label-1 post carries no positive cue (only filler and a negative cue).
    double positive_cue_dropout = 0.0;
    /// Probability a label-0 post is a third-party report (hard negative).
    double hard_negative_rate = 0.0;
    /// Probability a label-0 post also carries a stray positive cue word.
    double negative_cue_leak = 0.0;
    std::uint64_t seed = 1;
    std::string id_prefix = "s";
};

inline TaskSpec binary_task(std::string task_id = "synthetic-binary")
{
    TaskSpec t;
    t.task_id = std::move(task_id);
    t.labels = {{0, "not_self_report"}, {1, "self_report"}};
    t.report_label = 1;
    t.verify_scope = {1};
    t.correction_mode = CorrectionMode::flip_binary;
    t.validate();
    return t;
}

/// Label 1 is the majority class; only label-0 predictions are verified.
inline TaskSpec three_class_task(std::string task_id = "synthetic-3class")
{
    TaskSpec t;
    t.task_id = std::move(task_id);
    t.labels = {{0, "negative"}, {1, "neutral"}, {2, "positive"}};
    t.report_label = 1;
    t.verify_scope = {0};
    t.correction_mode = CorrectionMode::to_majority;
    t.majority_label = 1;
    t.validate();
    return t;
}

namespace detail {

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, Rng& rng)
{
    return words[rng.below(N)];
}

inline std::string compose(std::vector<std::string> phrases, Rng& rng)
{
    const std::size_t filler = 4 + rng.below(6);
    for (std::size_t i = 0; i < filler; ++i)
        phrases.emplace_back(pick(kFiller, rng));
    rng.shuffle(std::span<std::string>(phrases));
    std::string out;
    for (const auto& p : phrases) {
        if (!out.empty())
            out.push_back(' ');
        out += p;
    }
    return out;
}

} // namespace detail

inline Dataset generate(const CorpusSpec& spec, const TaskSpec& task = binary_task())
{
    Dataset d;
    d.task = task;
    d.split = Split::unsplit;
    Rng rng(derive_seed(spec.seed, "synthetic:" + spec.id_prefix));
    const auto n_pos = static_cast<std::size_t>(static_cast<double>(spec.size) * spec.positive_rate + 0.5);
    std::vector<int> labels(spec.size, 0);
    for (std::size_t i = 0; i < n_pos && i < spec.size; ++i)
        labels[i] = 1;
    rng.shuffle(std::span<int>(labels));

    for (std::size_t i = 0; i < spec.size; ++i) {
        std::vector<std::string> phrases;
        const int label = labels[i];
        if (label == 1) {
            if (rng.bernoulli(spec.positive_cue_dropout))
                phrases.emplace_back(detail::pick(kNegativeCues, rng));
            else
                phrases.emplace_back(detail::pick(kPositiveCues, rng));
        } else if (rng.bernoulli(spec.hard_negative_rate)) {
            phrases.emplace_back(detail::pick(kHardNegatives, rng));
        } else {
            phrases.emplace_back(detail::pick(kNegativeCues, rng));
            if (rng.bernoulli(spec.negative_cue_leak))
                phrases.emplace_back(detail::pick(kPositiveCues, rng));
        }
        Post post;
        post.id = spec.id_prefix + std::to_string(i + 1);
        post.text = detail::compose(std::move(phrases), rng);
        post.source = Source::twitter;
        d.examples.push_back({std::move(post), label});
    }
    return d;
}

/// Linearly separable: every post carries exactly one cue from its own class.
inline CorpusSpec keyword_train() { return {200, 0.5, 0.0, 0.0, 0.0, 11, "kw-train-"}; }
inline CorpusSpec keyword_test() { return {100, 0.5, 0.0, 0.0, 0.0, 12, "kw-test-"}; }

/// Roughly 10:1 negatives to positives with overlapping cues.
inline CorpusSpec imbalanced_train() { return {550, 1.0 / 11.0, 0.25, 0.0, 0.08, 21, "imb-train-"}; }
inline CorpusSpec imbalanced_test() { return {330, 1.0 / 11.0, 0.25, 0.0, 0.08, 22, "imb-test-"}; }

/// Training data has no third-party reports; the 500-post evaluation set does,
/// so a bag-of-words model predicts label 1 for them (false positives).
inline CorpusSpec correction_train() { return {300, 0.35, 0.0, 0.0, 0.0, 31, "cor-train-"}; }
inline CorpusSpec correction_eval() { return {500, 0.35, 0.0, 0.10, 0.0, 32, "cor-eval-"}; }

/// Synonym lexicon covering the filler vocabulary, for augmentation demos.
inline Lexicon lexicon()
{
    return {
        {"today", {"tonight", "now"}},          {"really", {"truly", "seriously"}},
        {"feeling", {"felt", "feel"}},          {"week", {"weekend", "month"}},
        {"home", {"house", "place"}},           {"work", {"job", "office"}},
        {"family", {"folks", "relatives"}},     {"people", {"folks", "everyone"}},
        {"finally", {"eventually", "at_last"}}, {"morning", {"dawn", "am"}},
        {"tired", {"exhausted", "drained"}},    {"worse", {"rougher", "poorer"}},
        {"better", {"improved", "fine"}},       {"long", {"lengthy", "endless"}},
        {"update", {"news", "status"}},         {"safe", {"secure", "careful"}},
        {"little", {"bit", "slightly"}},        {"think", {"reckon", "guess"}},
    };
}

inline std::string lexicon_to_jsonl(const Lexicon& lex)
{
    std::string out;
    for (const auto& [word, syns] : lex) {
        out += dump_line(ordered_json{{"word", word}, {"synonyms", syns}});
        out += '\n';
    }
    return out;
}

} // namespace alex::synthetic
