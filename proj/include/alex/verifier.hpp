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
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "alex/corpus.hpp"
#include "alex/detail/hash.hpp"
#include "alex/jsonl.hpp"

namespace alex {

struct FewShotExample {
    std::string text;
    int label = 0;
    bool supported = true;
    std::string explanation;
};

inline constexpr std::string_view kDefaultLayout =
    "{instructions}\n"
    "\n"
    "Labeling rules:\n"
    "{rules}\n"
    "\n"
    "{examples}\n"
    "Post: {text}\n"
    "Predicted label: {label}\n"
    "Answer:";

/// Instructions, labeling rules and few-shot examples, laid out through a
/// text layout with the slots {instructions} {rules} {examples} {text} {label}.
struct PromptTemplate {
    std::string instructions;
    std::string labeling_rules;
    std::vector<FewShotExample> fewshot;
    std::string layout{kDefaultLayout};

    /// Content hash; keys the response cache.
    [[nodiscard]] std::string hash() const
    {
        detail::Sha256 h;
        h.update(instructions).update(std::string_view("\x1e", 1)).update(labeling_rules);
        for (const auto& ex : fewshot) {
            h.update(std::string_view("\x1e", 1)).update(ex.text).update(std::to_string(ex.label));
            h.update(ex.supported ? "T" : "F").update(ex.explanation);
        }
        h.update(std::string_view("\x1e", 1)).update(layout);
        return h.hex();
    }

    /// Slots must appear in section order, with {text} and {label} exactly once.
    void validate() const
    {
        auto count = [&](std::string_view slot) {
            std::size_t n = 0;
            for (auto pos = layout.find(slot); pos != std::string::npos; pos = layout.find(slot, pos + slot.size()))
                ++n;
            return n;
        };
        if (count("{text}") != 1 || count("{label}") != 1)
            throw Error(ErrorKind::ConfigError, "template layout must contain {text} and {label} exactly once");
        for (auto slot : {"{instructions}", "{rules}", "{examples}"})
            if (count(slot) > 1)
                throw Error(ErrorKind::ConfigError, std::string("template slot ") + slot + " appears more than once");
        std::size_t last = 0;
        for (auto slot : {"{instructions}", "{rules}", "{examples}", "{text}"}) {
            const auto pos = layout.find(slot);
            if (pos == std::string::npos)
                continue;
            if (pos < last)
                throw Error(ErrorKind::ConfigError, "template sections must be ordered instructions, rules, examples, query");
            last = pos;
        }
    }
};

namespace detail {

inline std::string rtrim(std::string s)
{
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
        s.pop_back();
    return s;
}

inline std::string trim(std::string_view s)
{
    std::size_t b = 0;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    std::size_t e = s.size();
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

} // namespace detail

/// Template file format. Free text before the first section header is ignored
/// (used for provenance notes). Sections:
///
///   [instructions]   free text
///   [rules]          free text
///   [example]        "text:", "label:", "verdict:", "explanation:" lines; the
///                    explanation may continue on following lines
///   [layout]         optional; overrides the default layout
inline PromptTemplate parse_template(std::string_view contents)
{
    PromptTemplate t;
    enum class Section { none, instructions, rules, example, layout } section = Section::none;
    std::string instructions, rules, layout;
    bool has_layout = false;
    FewShotExample* ex = nullptr;
    std::string* continuation = nullptr;
    std::size_t line_no = 0;

    std::istringstream in{std::string(contents)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        const auto header = detail::trim(line);
        if (header == "[instructions]" || header == "[rules]" || header == "[example]" || header == "[layout]") {
            continuation = nullptr;
            if (header == "[instructions]")
                section = Section::instructions;
            else if (header == "[rules]")
                section = Section::rules;
            else if (header == "[layout]") {
                section = Section::layout;
                has_layout = true;
            } else {
                section = Section::example;
                t.fewshot.emplace_back();
                ex = &t.fewshot.back();
            }
            continue;
        }
        switch (section) {
        case Section::none: break;
        case Section::instructions: instructions += line + "\n"; break;
        case Section::rules: rules += line + "\n"; break;
        case Section::layout: layout += line + "\n"; break;
        case Section::example: {
            auto colon = line.find(':');
            const auto key = colon == std::string::npos ? std::string() : detail::trim(line.substr(0, colon));
            const auto value = colon == std::string::npos ? std::string() : detail::trim(line.substr(colon + 1));
            if (key == "text") {
                ex->text = value;
                continuation = &ex->text;
            } else if (key == "label") {
                auto v = detail::parse_int(value);
                if (!v)
                    throw Error(ErrorKind::MalformedRecord, "template line " + std::to_string(line_no) + ": bad label");
                ex->label = *v;
                continuation = nullptr;
            } else if (key == "verdict") {
                std::string lower = value;
                std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
                if (lower != "true" && lower != "false")
                    throw Error(ErrorKind::MalformedRecord,
                                "template line " + std::to_string(line_no) + ": verdict must be True or False");
                ex->supported = lower == "true";
                continuation = nullptr;
            } else if (key == "explanation") {
                ex->explanation = value;
                continuation = &ex->explanation;
            } else if (continuation && !detail::trim(line).empty()) {
                *continuation += "\n" + line;
            }
            break;
        }
        }
    }
    t.instructions = detail::rtrim(instructions);
    t.labeling_rules = detail::rtrim(rules);
    if (has_layout)
        t.layout = detail::rtrim(layout);
    for (const auto& f : t.fewshot)
        if (f.text.empty())
            throw Error(ErrorKind::MalformedRecord, "template few-shot example without text");
    t.validate();
    return t;
}

inline PromptTemplate load_template(const std::filesystem::path& path)
{
    return parse_template(read_file(path));
}

inline std::string render_examples(const PromptTemplate& tpl, const TaskSpec& task)
{
    if (tpl.fewshot.empty())
        return {};
    std::string out = "Examples:\n";
    for (const auto& ex : tpl.fewshot) {
        if (!task.contains(ex.label))
            throw Error(ErrorKind::LabelOutOfTask, "few-shot label " + std::to_string(ex.label) + " not in task");
        out += "\nPost: " + ex.text + "\n";
        out += "Predicted label: " + task.name_of(ex.label) + "\n";
        out += std::string("Answer: ") + (ex.supported ? "True" : "False");
        if (!ex.explanation.empty())
            out += ". " + ex.explanation;
        out += "\n";
    }
    return out;
}

/// Renders the verifier prompt for one post and its predicted label. Slots are
/// substituted in one left-to-right pass, so slot-like text inside the post or
/// the rules is emitted literally. An empty few-shot list drops the line that
/// holds {examples}.
inline std::string build_prompt(const PromptTemplate& tpl, std::string_view text, int predicted_label, const TaskSpec& task)
{
    if (!task.contains(predicted_label))
        throw Error(ErrorKind::LabelOutOfTask, "label " + std::to_string(predicted_label) + " not in task " + task.task_id);
    const std::string examples = render_examples(tpl, task);
    const std::string& layout = tpl.layout;

    std::string out;
    out.reserve(layout.size() + text.size() + tpl.instructions.size() + tpl.labeling_rules.size() + examples.size());
    std::size_t i = 0;
    while (i < layout.size()) {
        if (layout[i] != '{') {
            out.push_back(layout[i++]);
            continue;
        }
        const auto close = layout.find('}', i);
        if (close == std::string::npos) {
            out.append(layout, i, std::string::npos);
            break;
        }
        const std::string_view slot(layout.data() + i, close - i + 1);
        if (slot == "{instructions}")
            out += tpl.instructions;
        else if (slot == "{rules}")
            out += tpl.labeling_rules;
        else if (slot == "{text}")
            out += text;
        else if (slot == "{label}")
            out += task.name_of(predicted_label);
        else if (slot == "{examples}") {
            const bool own_line = (i == 0 || layout[i - 1] == '\n') && (close + 1 >= layout.size() || layout[close + 1] == '\n');
            if (examples.empty() && own_line) {
                i = close + 2;
                continue;
            }
            out += examples;
        } else {
            out.push_back(layout[i++]);
            continue;
        }
        i = close + 1;
    }
    return out;
}

enum class Support { supported, refuted, inconclusive };

inline std::string_view to_string(Support s) noexcept
{
    switch (s) {
    case Support::supported: return "true";
    case Support::refuted: return "false";
    case Support::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

inline Support support_from_string(std::string_view s)
{
    if (s == "true")
        return Support::supported;
    if (s == "false")
        return Support::refuted;
    if (s == "inconclusive")
        return Support::inconclusive;
    throw Error(ErrorKind::MalformedRecord, "unknown verdict '" + std::string(s) + "'");
}

struct Verdict {
    std::string example_id;
    Support supported = Support::inconclusive;
    std::string explanation;
    std::string raw_response;
    int attempts = 0;
};

namespace detail {

inline bool is_word_byte(unsigned char c) noexcept { return c < 0x80 && std::isalnum(c); }

inline bool is_leading_noise(unsigned char c) noexcept
{
    return c >= 0x80 || !std::isalnum(c);
}

inline bool is_separator(unsigned char c) noexcept
{
    return std::isspace(c) || c == '.' || c == ',' || c == ':' || c == ';' || c == '!' || c == '*' || c == '_' ||
           c == '`' || c == ')' || c == ']' || c == '-' || c == '"' || c == '\'' || c == '|';
}

} // namespace detail

/// Reads the first word of the response, skipping markdown and punctuation and
/// an optional "Verdict:"/"Answer:" lead-in. "true"/"false" (any case) decide
/// the verdict and the rest is the explanation; anything else is inconclusive.
/// Total over arbitrary bytes.
inline Verdict parse_verdict(std::string_view raw, std::string_view example_id)
{
    Verdict v;
    v.example_id = std::string(example_id);
    v.raw_response = std::string(raw);

    auto next_word = [&](std::size_t& pos) {
        while (pos < raw.size() && detail::is_leading_noise(static_cast<unsigned char>(raw[pos])))
            ++pos;
        std::string word;
        while (pos < raw.size() && detail::is_word_byte(static_cast<unsigned char>(raw[pos])))
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(raw[pos++]))));
        return word;
    };

    std::size_t pos = 0;
    auto word = next_word(pos);
    if (word == "verdict" || word == "answer" || word == "label" || word == "result" || word == "judgment" ||
        word == "judgement")
        word = next_word(pos);

    if (word == "true" || word == "false") {
        v.supported = word == "true" ? Support::supported : Support::refuted;
        while (pos < raw.size() && detail::is_separator(static_cast<unsigned char>(raw[pos])))
            ++pos;
        v.explanation = detail::trim(raw.substr(pos));
        if (v.explanation.empty())
            v.explanation = detail::trim(raw);
    } else {
        v.supported = Support::inconclusive;
        v.explanation = std::string(raw);
    }
    return v;
}

inline ordered_json to_json(const Verdict& v)
{
    return {{"id", v.example_id},
            {"supported", std::string(to_string(v.supported))},
            {"explanation", v.explanation},
            {"attempts", v.attempts}};
}

inline std::string verdicts_to_jsonl(const std::vector<Verdict>& verdicts)
{
    std::string out;
    for (const auto& v : verdicts) {
        out += dump_line(to_json(v));
        out += '\n';
    }
    return out;
}

inline Verdict verdict_from_json(const json& j)
{
    Verdict v;
    v.example_id = j.at("id").get<std::string>();
    v.supported = support_from_string(j.at("supported").get<std::string>());
    v.explanation = j.value("explanation", std::string());
    v.raw_response = j.value("raw", std::string());
    v.attempts = j.value("attempts", 0);
    return v;
}

inline std::vector<Verdict> load_verdicts(const std::filesystem::path& path)
{
    std::vector<Verdict> out;
    for_each_jsonl<json>(path, [&](std::size_t line, const json& j) {
        try {
            out.push_back(verdict_from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

struct VerifierRequest {
    std::string example_id;
    std::string text;
    int predicted_label = 0;
    std::string rendered_prompt;
    std::string template_hash;
};

inline VerifierRequest make_request(const PromptTemplate& tpl, const TaskSpec& task, std::string example_id,
                                    std::string text, int predicted_label)
{
    VerifierRequest r{std::move(example_id), std::move(text), predicted_label, {}, tpl.hash()};
    r.rendered_prompt = build_prompt(tpl, r.text, predicted_label, task);
    return r;
}

/// An LLM endpoint. Networked clients send only `rendered_prompt`; the other
/// request fields exist so offline test doubles can answer without parsing it.
/// Implementations must tolerate concurrent calls and signal failure by throwing.
class LLMClient {
public:
    virtual ~LLMClient() = default;
    virtual std::string complete(const VerifierRequest& request) = 0;
    [[nodiscard]] virtual std::string identifier() const = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{0};
    double backoff_multiplier = 2.0;
};

/// Append-only JSONL response cache keyed by (template hash, text, label).
/// Safe for concurrent lookups and inserts.
class VerdictCache {
public:
    VerdictCache() = default;

    explicit VerdictCache(std::filesystem::path path) : path_(std::move(path))
    {
        if (!std::filesystem::exists(path_))
            return;
        std::ifstream in(path_, std::ios::binary);
        std::string line;
        while (std::getline(in, line)) {
            // A torn final line from an interrupted run is skipped.
            try {
                const auto j = json::parse(line);
                entries_[j.at("key").get<std::string>()] = {j.at("response").get<std::string>(), j.value("attempts", 1)};
            } catch (const nlohmann::json::exception&) {
                continue;
            }
        }
    }

    static std::string key(const VerifierRequest& r)
    {
        detail::Sha256 h;
        h.update(r.template_hash).update(std::string_view("\x1f", 1)).update(r.text);
        h.update(std::string_view("\x1f", 1)).update(std::to_string(r.predicted_label));
        return h.hex();
    }

    struct Entry {
        std::string response;
        int attempts = 1;
    };

    [[nodiscard]] std::optional<Entry> find(const VerifierRequest& r) const
    {
        std::shared_lock lock(mutex_);
        auto it = entries_.find(key(r));
        if (it == entries_.end())
            return std::nullopt;
        return it->second;
    }

    void insert(const VerifierRequest& r, const std::string& response, int attempts)
    {
        const auto k = key(r);
        std::unique_lock lock(mutex_);
        if (!entries_.emplace(k, Entry{response, attempts}).second)
            return;
        if (path_.empty())
            return;
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        out << dump_line(ordered_json{{"key", k}, {"label", r.predicted_label}, {"response", response}, {"attempts", attempts}})
            << '\n';
    }

    [[nodiscard]] std::size_t size() const
    {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

private:
    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, Entry> entries_;
};

/// Queries the client for every request with at most `max_parallel` calls in
/// flight. Output order matches input order. Failed calls are retried per the
/// policy; exhausted retries become inconclusive verdicts.
inline std::vector<Verdict> verify_batch(const std::vector<VerifierRequest>& requests, LLMClient& client,
                                         std::size_t max_parallel, const RetryPolicy& policy = {},
                                         VerdictCache* cache = nullptr)
{
    if (max_parallel < 1)
        throw Error(ErrorKind::ConfigError, "max_parallel must be >= 1");
    if (policy.max_attempts < 1)
        throw Error(ErrorKind::ConfigError, "max_attempts must be >= 1");

    std::vector<Verdict> out(requests.size());
    auto run_one = [&](std::size_t i) {
        const auto& req = requests[i];
        if (cache) {
            if (auto hit = cache->find(req)) {
                out[i] = parse_verdict(hit->response, req.example_id);
                out[i].attempts = hit->attempts;
                return;
            }
        }
        auto backoff = policy.initial_backoff;
        std::string last_error;
        for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
            try {
                auto response = client.complete(req);
                out[i] = parse_verdict(response, req.example_id);
                out[i].attempts = attempt;
                if (cache)
                    cache->insert(req, response, attempt);
                return;
            } catch (const std::exception& e) {
                last_error = e.what();
            }
            if (attempt < policy.max_attempts && backoff.count() > 0) {
                std::this_thread::sleep_for(backoff);
                backoff = std::chrono::milliseconds(
                    static_cast<long long>(static_cast<double>(backoff.count()) * policy.backoff_multiplier));
            }
        }
        Verdict v;
        v.example_id = req.example_id;
        v.supported = Support::inconclusive;
        v.attempts = policy.max_attempts;
        v.explanation = "verifier call failed after " + std::to_string(policy.max_attempts) + " attempts: " + last_error;
        out[i] = std::move(v);
    };

    const std::size_t workers = std::min(max_parallel, requests.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < requests.size(); ++i)
            run_one(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < requests.size(); i = next++)
                run_one(i);
        });
    pool.clear();
    return out;
}

} // namespace alex
