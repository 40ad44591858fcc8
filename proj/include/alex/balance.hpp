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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "alex/corpus.hpp"
#include "alex/random.hpp"

namespace alex {

enum class AugmentOp { synonym_replace, random_swap, random_delete, random_insert };

inline std::string_view to_string(AugmentOp op) noexcept
{
    switch (op) {
    case AugmentOp::synonym_replace: return "synonym_replace";
    case AugmentOp::random_swap: return "random_swap";
    case AugmentOp::random_delete: return "random_delete";
    case AugmentOp::random_insert: return "random_insert";
    }
    return "";
}

using Lexicon = std::map<std::string, std::vector<std::string>>;

struct AugmentationConfig {
    std::set<AugmentOp> ops{AugmentOp::synonym_replace, AugmentOp::random_swap, AugmentOp::random_delete,
                            AugmentOp::random_insert};
    double per_op_prob = 0.1;
    std::size_t transforms_per_example = 4;
    Lexicon lexicon;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(per_op_prob >= 0.0 && per_op_prob <= 1.0))
            throw Error(ErrorKind::ConfigError, "per_op_prob must lie in [0, 1]");
        if (transforms_per_example < 1)
            throw Error(ErrorKind::ConfigError, "transforms_per_example must be >= 1");
        if ((ops.count(AugmentOp::synonym_replace) || ops.count(AugmentOp::random_insert)) && lexicon.empty())
            throw Error(ErrorKind::ConfigError, "synonym_replace/random_insert need a nonempty lexicon");
    }
};

/// Lexicon file: one {"word": str, "synonyms": [str]} object per line.
/// Multi-word synonyms are dropped so that every op stays token-aligned.
inline Lexicon load_lexicon(const std::filesystem::path& path)
{
    Lexicon lex;
    for_each_jsonl<json>(path, [&](std::size_t line, const json& j) {
        try {
            auto& out = lex[j.at("word").get<std::string>()];
            for (const auto& s : j.at("synonyms")) {
                auto syn = s.get<std::string>();
                if (!syn.empty() && syn.find_first_of(" \t\n\r") == std::string::npos)
                    out.push_back(std::move(syn));
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": " + e.what());
        }
    });
    for (auto it = lex.begin(); it != lex.end();)
        it = it->second.empty() ? lex.erase(it) : std::next(it);
    return lex;
}

inline std::vector<std::string> whitespace_tokens(std::string_view text)
{
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && detail::is_blank(text.substr(i, 1)))
            ++i;
        const std::size_t start = i;
        while (i < text.size() && !detail::is_blank(text.substr(i, 1)))
            ++i;
        if (i > start)
            tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

namespace detail {

inline std::string join_tokens(const std::vector<std::string>& tokens)
{
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i)
            out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

inline const std::vector<std::string>* synonyms_of(const Lexicon& lex, const std::string& token)
{
    auto it = lex.find(token);
    return it == lex.end() ? nullptr : &it->second;
}

/// Applies one op with a budget of `budget` edited token positions.
inline std::vector<std::string> apply_op(AugmentOp op, std::vector<std::string> tokens, std::size_t budget,
                                         const Lexicon& lex, Rng& rng)
{
    const std::size_t n = tokens.size();
    switch (op) {
    case AugmentOp::synonym_replace: {
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < n; ++i)
            if (synonyms_of(lex, tokens[i]))
                eligible.push_back(i);
        rng.shuffle(std::span<std::size_t>(eligible));
        for (std::size_t k = 0; k < std::min(budget, eligible.size()); ++k) {
            const auto& syn = *synonyms_of(lex, tokens[eligible[k]]);
            tokens[eligible[k]] = syn[rng.below(syn.size())];
        }
        break;
    }
    case AugmentOp::random_swap: {
        // A swap edits two positions; keep within budget + 1.
        if (n < 2)
            break;
        const std::size_t swaps = std::max<std::size_t>(1, (budget + 1) / 2);
        for (std::size_t k = 0; k < swaps; ++k) {
            const auto a = rng.below(n);
            auto b = rng.below(n - 1);
            if (b >= a)
                ++b;
            std::swap(tokens[a], tokens[b]);
        }
        break;
    }
    case AugmentOp::random_delete: {
        if (n < 2)
            break;
        const std::size_t drop = std::min(budget, n - 1);
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i)
            idx[i] = i;
        rng.shuffle(std::span<std::size_t>(idx));
        std::vector<bool> gone(n, false);
        for (std::size_t k = 0; k < drop; ++k)
            gone[idx[k]] = true;
        std::vector<std::string> kept;
        for (std::size_t i = 0; i < n; ++i)
            if (!gone[i])
                kept.push_back(std::move(tokens[i]));
        tokens = std::move(kept);
        break;
    }
    case AugmentOp::random_insert: {
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < n; ++i)
            if (synonyms_of(lex, tokens[i]))
                eligible.push_back(i);
        if (eligible.empty())
            break;
        for (std::size_t k = 0; k < budget; ++k) {
            const auto& source = tokens[eligible[rng.below(eligible.size())]];
            const auto* syn = synonyms_of(lex, source);
            if (!syn)
                continue;
            std::string word = (*syn)[rng.below(syn->size())];
            const auto pos = rng.below(tokens.size() + 1);
            tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), std::move(word));
            // Positions shift after an insert; re-resolve eligibility by value.
            eligible.clear();
            for (std::size_t i = 0; i < tokens.size(); ++i)
                if (synonyms_of(lex, tokens[i]))
                    eligible.push_back(i);
        }
        break;
    }
    }
    return tokens;
}

inline std::vector<std::string> augment_with_rng(const std::string& text, const AugmentationConfig& config, Rng& rng)
{
    const auto tokens = whitespace_tokens(text);
    const auto budget = static_cast<std::size_t>(std::ceil(config.per_op_prob * static_cast<double>(tokens.size()) - 1e-12));
    const std::vector<AugmentOp> ops(config.ops.begin(), config.ops.end());
    std::vector<std::string> variants;
    variants.reserve(config.transforms_per_example);
    for (std::size_t v = 0; v < config.transforms_per_example; ++v) {
        if (budget == 0 || ops.empty()) {
            variants.push_back(text);
            continue;
        }
        const auto op = ops[rng.below(ops.size())];
        auto edited = apply_op(op, tokens, budget, config.lexicon, rng);
        variants.push_back(edited == tokens ? text : join_tokens(edited));
    }
    return variants;
}

} // namespace detail

/// EDA-style perturbations: each variant applies one enabled op chosen uniformly,
/// editing at most ceil(per_op_prob * token_count) positions (+1 for a swap pair).
inline std::vector<std::string> augment_text(const std::string& text, const AugmentationConfig& config)
{
    if (detail::is_blank(text))
        throw Error(ErrorKind::EmptyText, "cannot augment empty text");
    config.validate();
    Rng rng(derive_seed(config.seed, text, 0xa46));
    return detail::augment_with_rng(text, config, rng);
}

enum class TargetKind { max_class, min_class, fixed };

struct BalanceTarget {
    TargetKind kind = TargetKind::max_class;
    std::size_t n = 0;

    static BalanceTarget max_class() { return {TargetKind::max_class, 0}; }
    static BalanceTarget min_class() { return {TargetKind::min_class, 0}; }
    static BalanceTarget fixed(std::size_t n) { return {TargetKind::fixed, n}; }
};

struct BalanceConfig {
    BalanceTarget target = BalanceTarget::max_class();
    AugmentationConfig augmentation;
    bool augment = true;
    bool allow_duplication = true;
    std::uint64_t seed = 0;
    /// Permit balancing a validation/test split.
    bool force = false;
};

struct BalanceSummary {
    std::map<int, std::size_t> before;
    std::map<int, std::size_t> after;
    std::map<int, std::size_t> augmented;
    std::map<int, std::size_t> duplicated;
    std::map<int, std::size_t> undersampled;
    std::size_t target = 0;
};

inline std::size_t resolve_target(const std::map<int, std::size_t>& hist, const BalanceTarget& target)
{
    switch (target.kind) {
    case TargetKind::max_class: {
        std::size_t m = 0;
        for (const auto& [_, c] : hist)
            m = std::max(m, c);
        return m;
    }
    case TargetKind::min_class: {
        std::size_t m = SIZE_MAX;
        for (const auto& [_, c] : hist)
            m = std::min(m, c);
        return hist.empty() ? 0 : m;
    }
    case TargetKind::fixed:
        if (target.n < 1)
            throw Error(ErrorKind::ConfigError, "fixed target must be >= 1");
        return target.n;
    }
    return 0;
}

/// Equalise class counts: undersample classes above the target, fill classes
/// below it with augmented variants and then, if allowed, verbatim copies.
/// Synthetic examples get ids "<orig_id>#aug<k>".
inline Dataset balance(const Dataset& dataset, const BalanceConfig& config, BalanceSummary* summary = nullptr)
{
    if (!config.force && (dataset.split == Split::validation || dataset.split == Split::test))
        throw Error(ErrorKind::ConfigError,
                    "refusing to balance a " + std::string(to_string(dataset.split)) + " split (use force)");
    if (config.augment && !config.augmentation.ops.empty())
        config.augmentation.validate();

    const auto hist = class_histogram(dataset);
    for (const auto& l : dataset.task.labels)
        if (!hist.count(l.id))
            throw Error(ErrorKind::EmptyClass, "class " + std::to_string(l.id) + " has no examples");
    const std::size_t target = resolve_target(hist, config.target);

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        by_class[*dataset.examples[i].label].push_back(i);

    BalanceSummary sum;
    sum.before = hist;
    sum.target = target;

    std::vector<bool> keep(dataset.size(), true);
    std::map<int, std::vector<LabeledExample>> synthetic;

    for (const auto& [label, idx] : by_class) {
        if (idx.size() > target) {
            std::vector<std::size_t> order = idx;
            Rng rng(derive_seed(config.seed, std::to_string(label), 0x0dd));
            rng.shuffle(std::span<std::size_t>(order));
            for (std::size_t k = target; k < order.size(); ++k)
                keep[order[k]] = false;
            sum.undersampled[label] = idx.size() - target;
            continue;
        }
        std::size_t need = target - idx.size();
        if (need == 0)
            continue;

        std::unordered_set<std::string> seen;
        for (auto i : idx)
            seen.insert(dataset.examples[i].post.text);
        std::unordered_map<std::string, std::size_t> next_k;
        auto make_id = [&](const std::string& orig) { return orig + "#aug" + std::to_string(++next_k[orig]); };
        auto& out = synthetic[label];

        const bool can_augment = config.augment && !config.augmentation.ops.empty() &&
                                 config.augmentation.per_op_prob > 0.0;
        if (can_augment) {
            const std::size_t per_round = idx.size() * config.augmentation.transforms_per_example;
            const std::size_t max_rounds = 2 * ((need + per_round - 1) / per_round) + 1;
            for (std::size_t round = 0; round < max_rounds && need > 0; ++round) {
                // Variants per example, then taken round-robin so every source contributes.
                std::vector<std::vector<std::string>> variants;
                variants.reserve(idx.size());
                for (auto i : idx) {
                    const auto& ex = dataset.examples[i];
                    Rng rng(derive_seed(config.augmentation.seed ^ config.seed, ex.post.id, round + 1));
                    variants.push_back(detail::augment_with_rng(ex.post.text, config.augmentation, rng));
                }
                std::size_t accepted = 0;
                for (std::size_t v = 0; v < config.augmentation.transforms_per_example && need > 0; ++v) {
                    for (std::size_t e = 0; e < idx.size() && need > 0; ++e) {
                        auto& text = variants[e][v];
                        if (detail::is_blank(text) || !seen.insert(text).second)
                            continue;
                        const auto& src = dataset.examples[idx[e]];
                        LabeledExample ex{src.post, label};
                        ex.post.id = make_id(src.post.id);
                        ex.post.text = text;
                        ex.post.meta["augmented_from"] = src.post.id;
                        out.push_back(std::move(ex));
                        ++sum.augmented[label];
                        ++accepted;
                        --need;
                    }
                }
                if (accepted == 0)
                    break;
            }
        }
        if (need > 0 && !config.allow_duplication)
            throw Error(ErrorKind::InsufficientAugmentation,
                        "class " + std::to_string(label) + " is " + std::to_string(need) +
                            " examples short of " + std::to_string(target) + " and duplication is disabled");
        for (std::size_t r = 0; need > 0; ++r, --need) {
            const auto& src = dataset.examples[idx[r % idx.size()]];
            LabeledExample ex{src.post, label};
            ex.post.id = make_id(src.post.id);
            ex.post.meta["duplicated_from"] = src.post.id;
            out.push_back(std::move(ex));
            ++sum.duplicated[label];
        }
    }

    Dataset result;
    result.task = dataset.task;
    result.split = dataset.split;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (keep[i])
            result.examples.push_back(dataset.examples[i]);
    for (auto& [label, items] : synthetic)
        for (auto& ex : items)
            result.examples.push_back(std::move(ex));

    sum.after = class_histogram(result);
    if (summary)
        *summary = std::move(sum);
    return result;
}

} // namespace alex
