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

#include <filesystem>
#include <optional>
#include <string>

#include <httplib.h>

#include "alex/review_session.hpp"

namespace alex {

inline constexpr std::size_t kExplanationSnippet = 160;

/// Queue entry as served to the review UI.
inline ordered_json review_summary(const ReviewItem& item, const TaskSpec& task)
{
    auto j = to_json(item);
    j["predicted_name"] = task.contains(item.predicted_label) ? task.name_of(item.predicted_label) : std::string();
    auto snippet = item.verdict.explanation;
    if (snippet.size() > kExplanationSnippet) {
        snippet.resize(kExplanationSnippet);
        // Do not cut inside a UTF-8 sequence.
        while (!snippet.empty() && (static_cast<unsigned char>(snippet.back()) & 0xC0) == 0x80)
            snippet.pop_back();
        if (!snippet.empty() && static_cast<unsigned char>(snippet.back()) >= 0xC0)
            snippet.pop_back();
        snippet += "...";
    }
    j["explanation_snippet"] = snippet;
    return j;
}

/// HTTP/JSON front end for a ReviewSession:
///
///   GET  /api/queue?status=pending|decided|all
///   POST /api/items/{id}/decision   {"action": "keep"|"set_label", "label"?: int, "reviewer"?: str}
///   GET  /api/progress
///   GET  /api/export?fallback=auto|strict
///
/// Static files from `ui_dir` are served at / when the directory exists.
class ReviewService {
public:
    explicit ReviewService(ReviewSession& session, std::optional<std::filesystem::path> ui_dir = std::nullopt)
        : session_(session)
    {
        routes();
        if (ui_dir && std::filesystem::is_directory(*ui_dir))
            server_.set_mount_point("/", ui_dir->string());
    }

    /// Binds and serves until `stop()`; returns false if the address is unavailable.
    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

    /// Binds to an ephemeral port and returns it (or -1); then call `serve()`.
    int bind_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
    bool serve() { return server_.listen_after_bind(); }

    void stop() { server_.stop(); }
    void wait_until_ready() const { server_.wait_until_ready(); }
    [[nodiscard]] bool running() const { return server_.is_running(); }

private:
    static void send_json(httplib::Response& res, int status, const ordered_json& body)
    {
        res.status = status;
        res.set_content(dump_line(body), "application/json");
    }

    static void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message)
    {
        send_json(res, status, ordered_json{{"error", message}, {"kind", kind}});
    }

    void routes()
    {
        server_.Get("/api/queue", [this](const httplib::Request& req, httplib::Response& res) {
            const auto status = req.has_param("status") ? req.get_param_value("status") : std::string("pending");
            StatusFilter filter;
            try {
                filter = status_from_string(status);
            } catch (const Error& e) {
                return send_error(res, 400, "BadRequest", e.what());
            }
            ordered_json out = ordered_json::array();
            for (const auto& item : session_.items(filter))
                out.push_back(review_summary(item, session_.task()));
            send_json(res, 200, out);
        });

        server_.Post(R"(/api/items/(.+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            json body;
            try {
                body = json::parse(req.body);
            } catch (const nlohmann::json::exception&) {
                return send_error(res, 400, "BadRequest", "body must be a JSON object");
            }
            if (!body.is_object())
                return send_error(res, 400, "BadRequest", "body must be a JSON object");
            const auto action = body.value("action", std::string());
            Decision decision;
            if (action == "keep") {
                decision = Decision::keep();
            } else if (action == "set_label") {
                if (!body.contains("label") || !body["label"].is_number_integer())
                    return send_error(res, 422, "InvalidLabel", "set_label requires an integer label");
                const int label = body["label"].get<int>();
                if (!session_.task().contains(label))
                    return send_error(res, 422, "InvalidLabel", "label " + std::to_string(label) + " is not in the task");
                decision = Decision::set_label(label);
            } else {
                return send_error(res, 422, "InvalidAction", "action must be keep or set_label");
            }
            std::optional<std::string> reviewer;
            if (body.contains("reviewer") && body["reviewer"].is_string())
                reviewer = body["reviewer"].get<std::string>();
            try {
                const auto item = session_.decide(id, decision, reviewer);
                send_json(res, 200, review_summary(item, session_.task()));
            } catch (const Error& e) {
                switch (e.kind()) {
                case ErrorKind::UnknownItem: return send_error(res, 404, "NotFound", e.what());
                case ErrorKind::AlreadyDecided: return send_error(res, 409, "AlreadyDecided", e.what());
                case ErrorKind::LabelOutOfTask: return send_error(res, 422, "InvalidLabel", e.what());
                default: return send_error(res, 500, std::string(to_string(e.kind())), e.what());
                }
            }
        });

        server_.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
            const auto p = session_.progress();
            send_json(res, 200, ordered_json{{"total", p.total}, {"decided", p.decided}, {"pending", p.pending}});
        });

        server_.Get("/api/export", [this](const httplib::Request& req, httplib::Response& res) {
            PendingFallback fallback;
            try {
                fallback = fallback_from_string(req.has_param("fallback") ? req.get_param_value("fallback") : "auto");
            } catch (const Error& e) {
                return send_error(res, 400, "BadRequest", e.what());
            }
            try {
                res.status = 200;
                res.set_content(session_.export_jsonl(fallback), "application/x-ndjson");
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::PendingDecisions)
                    return send_error(res, 500, std::string(to_string(e.kind())), e.what());
                send_json(res, 409,
                          ordered_json{{"error", e.what()}, {"kind", "PendingDecisions"}, {"pending", session_.pending_ids()}});
            }
        });
    }

    ReviewSession& session_;
    httplib::Server server_;
};

} // namespace alex
