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

#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "alex/detail/hash.hpp"
#include "alex/error.hpp"
#include "alex/jsonl.hpp"

namespace alex {

/// Sentence-level embedding (the [CLS] vector for transformer backends).
struct Embedding {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    bool operator==(const Embedding&) const = default;
};

/// Text encoder interface. Implementations must be deterministic for fixed
/// weights and safe to call concurrently once constructed.
class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;

    [[nodiscard]] virtual Embedding encode(std::string_view text) const = 0;
    [[nodiscard]] virtual std::size_t dim() const noexcept = 0;
    [[nodiscard]] virtual std::string identifier() const = 0;
    /// Everything needed to rebuild an identical encoder through `make_encoder`.
    [[nodiscard]] virtual json config() const = 0;
};

/// Checked entry point: wraps backend faults and validates the output shape.
inline Embedding encode(const EncoderBackend& backend, std::string_view text)
{
    Embedding e;
    try {
        e = backend.encode(text);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& ex) {
        throw Error(ErrorKind::BackendFailure, backend.identifier() + ": " + ex.what());
    }
    if (e.size() != backend.dim())
        throw Error(ErrorKind::BackendFailure, backend.identifier() + " returned " + std::to_string(e.size()) +
                                                   " values, expected " + std::to_string(backend.dim()));
    for (double v : e.values)
        if (!std::isfinite(v))
            throw Error(ErrorKind::BackendFailure, backend.identifier() + " returned a non-finite value");
    return e;
}

/// Feature-hashed bag of words: lowercased word tokens (optionally adjacent
/// bigrams) hashed into `dim` buckets with a hash-derived sign, L2-normalised.
class HashingEncoder final : public EncoderBackend {
public:
    static constexpr std::string_view kIdentifier = "hashing-bow";

    explicit HashingEncoder(std::size_t dim = 1024, std::uint64_t seed = 0, bool bigrams = false)
        : dim_(dim), seed_(seed), bigrams_(bigrams)
    {
        if (dim_ == 0)
            throw Error(ErrorKind::ConfigError, "encoder dimension must be positive");
    }

    [[nodiscard]] Embedding encode(std::string_view text) const override
    {
        Embedding e{std::vector<double>(dim_, 0.0)};
        const auto tokens = tokenize(text);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            add(e, tokens[i]);
            if (bigrams_ && i + 1 < tokens.size())
                add(e, tokens[i] + '\x1f' + tokens[i + 1]);
        }
        double norm = 0.0;
        for (double v : e.values)
            norm += v * v;
        if (norm > 0.0) {
            norm = std::sqrt(norm);
            for (double& v : e.values)
                v /= norm;
        }
        return e;
    }

    [[nodiscard]] std::size_t dim() const noexcept override { return dim_; }
    [[nodiscard]] std::string identifier() const override { return std::string(kIdentifier); }
    [[nodiscard]] json config() const override { return {{"dim", dim_}, {"seed", seed_}, {"bigrams", bigrams_}}; }

    /// Word characters: ASCII alphanumerics, apostrophes inside words, and any
    /// non-ASCII byte (keeps emoji and accented words intact).
    static std::vector<std::string> tokenize(std::string_view text)
    {
        std::vector<std::string> tokens;
        std::string cur;
        auto flush = [&] {
            while (!cur.empty() && cur.back() == '\'')
                cur.pop_back();
            if (!cur.empty())
                tokens.push_back(std::move(cur));
            cur.clear();
        };
        for (char ch : text) {
            const auto c = static_cast<unsigned char>(ch);
            if (c >= 0x80 || std::isalnum(c)) {
                cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
            } else if (c == '\'' && !cur.empty()) {
                cur.push_back('\'');
            } else {
                flush();
            }
        }
        flush();
        return tokens;
    }

private:
    void add(Embedding& e, std::string_view token) const
    {
        const std::uint64_t h = detail::splitmix64(detail::fnv1a64(token) ^ seed_);
        const auto bucket = static_cast<std::size_t>(h % dim_);
        e.values[bucket] += (h >> 63) ? -1.0 : 1.0;
    }

    std::size_t dim_;
    std::uint64_t seed_;
    bool bigrams_;
};

using EncoderFactory = std::function<std::unique_ptr<EncoderBackend>(const json& config)>;

namespace detail {

inline std::map<std::string, EncoderFactory>& encoder_registry()
{
    static std::map<std::string, EncoderFactory> registry{
        {std::string(HashingEncoder::kIdentifier), [](const json& c) -> std::unique_ptr<EncoderBackend> {
             return std::make_unique<HashingEncoder>(c.value("dim", std::size_t{1024}), c.value("seed", std::uint64_t{0}),
                                                     c.value("bigrams", false));
         }},
    };
    return registry;
}

inline std::mutex& encoder_registry_mutex()
{
    static std::mutex m;
    return m;
}

} // namespace detail

/// Transformer or other backends register here so checkpoints can name them.
inline void register_encoder(const std::string& identifier, EncoderFactory factory)
{
    std::lock_guard lock(detail::encoder_registry_mutex());
    detail::encoder_registry()[identifier] = std::move(factory);
}

inline std::unique_ptr<EncoderBackend> make_encoder(const std::string& identifier, const json& config)
{
    EncoderFactory factory;
    {
        std::lock_guard lock(detail::encoder_registry_mutex());
        auto it = detail::encoder_registry().find(identifier);
        if (it == detail::encoder_registry().end())
            throw Error(ErrorKind::BackendFailure, "unknown encoder '" + identifier + "'");
        factory = it->second;
    }
    return factory(config);
}

} // namespace alex
