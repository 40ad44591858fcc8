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

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>

#include "alex/verifier.hpp"

namespace alex {

/// Environment variable holding the API key for live verification.
inline constexpr const char* kApiKeyEnv = "ALEX_LLM_API_KEY";

struct ChatClientConfig {
    std::string endpoint = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-3.5-turbo";
    double temperature = 0.0;
    std::chrono::seconds timeout{60};
};

/// Chat-completions client for OpenAI-compatible endpoints. The key is read
/// once from the environment and never logged or echoed in errors.
class ChatCompletionsClient final : public LLMClient {
public:
    explicit ChatCompletionsClient(ChatClientConfig config) : config_(std::move(config))
    {
        const char* key = std::getenv(kApiKeyEnv);
        if (key == nullptr || *key == '\0')
            throw Error(ErrorKind::ClientFailure, std::string(kApiKeyEnv) + " is not set");
        api_key_ = key;
    }

    std::string complete(const VerifierRequest& request) override
    {
        httplib::Client cli(config_.endpoint);
        cli.set_connection_timeout(config_.timeout);
        cli.set_read_timeout(config_.timeout);
        cli.set_write_timeout(config_.timeout);
        const json body = {
            {"model", config_.model},
            {"temperature", config_.temperature},
            {"messages", json::array({{{"role", "user"}, {"content", request.rendered_prompt}}})},
        };
        httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
        auto res = cli.Post(config_.path, headers, dump_line(body), "application/json");
        if (!res)
            throw Error(ErrorKind::ClientFailure, "request failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(ErrorKind::ClientFailure, "endpoint returned HTTP " + std::to_string(res->status));
        try {
            const auto reply = json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ClientFailure, std::string("unexpected response shape: ") + e.what());
        }
    }

    [[nodiscard]] std::string identifier() const override { return "chat:" + config_.model; }

private:
    ChatClientConfig config_;
    std::string api_key_;
};

} // namespace alex
