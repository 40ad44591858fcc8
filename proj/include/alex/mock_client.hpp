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
#include <atomic>
#include <cctype>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "alex/random.hpp"
#include "alex/verifier.hpp"

namespace alex {

/// Offline verifier that supports a label iff the post contains one of that
/// label's keywords (case-insensitive substring match).
class KeywordMockClient final : public LLMClient {
public:
    explicit KeywordMockClient(std::map<int, std::vector<std::string>> keywords) : keywords_(std::move(keywords))
    {
        for (auto& [_, words] : keywords_)
            for (auto& w : words)
                w = lower(w);
    }

    std::string complete(const VerifierRequest& request) override
    {
        ++calls_;
        const auto text = lower(request.text);
        auto it = keywords_.find(request.predicted_label);
        if (it != keywords_.end())
            for (const auto& w : it->second)
                if (text.find(w) != std::string::npos)
                    return "True. The post contains \"" + w + "\", which supports label " +
                           std::to_string(request.predicted_label) + ".";
        return "False. Step 1: none of the cue words for label " + std::to_string(request.predicted_label) +
               " occur in the post. Step 2: without such evidence the label is not supported.";
    }

    [[nodiscard]] std::string identifier() const override { return "mock-keyword"; }
    [[nodiscard]] std::size_t calls() const noexcept { return calls_; }

private:
    static std::string lower(std::string s)
    {
        std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return s;
    }

    std::map<int, std::vector<std::string>> keywords_;
    std::atomic<std::size_t> calls_{0};
};

/// Simulated verifier with gold-label access. It answers correctly ("True" iff
/// the prediction matches gold) with probability `accuracy` for the gold class,
/// drawn from a stream keyed by (seed, example id) so answers do not depend on
/// call order. Unknown ids get an unparseable reply.
class OracleMockClient final : public LLMClient {
public:
    OracleMockClient(std::unordered_map<std::string, int> gold, double accuracy = 1.0, std::uint64_t seed = 0)
        : gold_(std::move(gold)), default_accuracy_(accuracy), seed_(seed)
    {
    }

    void set_class_accuracy(int gold_label, double accuracy) { per_class_[gold_label] = accuracy; }

    std::string complete(const VerifierRequest& request) override
    {
        ++calls_;
        auto it = gold_.find(request.example_id);
        if (it == gold_.end())
            return "I cannot judge this post without more context.";
        const int gold = it->second;
        const auto acc_it = per_class_.find(gold);
        const double accuracy = acc_it == per_class_.end() ? default_accuracy_ : acc_it->second;
        Rng rng(derive_seed(seed_, request.example_id, 0x0AC1E));
        const bool honest = rng.uniform() < accuracy;
        const bool correct = request.predicted_label == gold;
        if (correct == honest)
            return "True. The post provides evidence for label " + std::to_string(request.predicted_label) + ".";
        return "False. Step 1: the post was checked against the labeling rules. Step 2: the evidence does not "
               "support label " +
               std::to_string(request.predicted_label) + ".";
    }

    [[nodiscard]] std::string identifier() const override { return "mock-oracle"; }
    [[nodiscard]] std::size_t calls() const noexcept { return calls_; }

private:
    std::unordered_map<std::string, int> gold_;
    std::map<int, double> per_class_;
    double default_accuracy_;
    std::uint64_t seed_;
    std::atomic<std::size_t> calls_{0};
};

/// Wraps a client and throws on the first `failures` calls for each example id.
class FaultInjectingClient final : public LLMClient {
public:
    FaultInjectingClient(LLMClient& inner, int failures) : inner_(inner), failures_(failures) {}

    std::string complete(const VerifierRequest& request) override
    {
        {
            std::lock_guard lock(mutex_);
            if (seen_[request.example_id]++ < failures_)
                throw std::runtime_error("injected failure for " + request.example_id);
        }
        return inner_.complete(request);
    }

    [[nodiscard]] std::string identifier() const override { return "fault(" + inner_.identifier() + ")"; }

    [[nodiscard]] int calls_for(const std::string& id) const
    {
        std::lock_guard lock(mutex_);
        auto it = seen_.find(id);
        return it == seen_.end() ? 0 : it->second;
    }

private:
    LLMClient& inner_;
    int failures_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, int> seen_;
};

} // namespace alex
