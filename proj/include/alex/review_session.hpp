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

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "alex/correction.hpp"
#include "alex/detail/hash.hpp"
#include "alex/model.hpp"

namespace alex {

namespace detail {

/// Append-only file whose writes are flushed to stable storage before returning.
class DurableLog {
public:
    DurableLog() = default;
    explicit DurableLog(const std::filesystem::path& path)
    {
        if (path.has_parent_path())
            std::filesystem::create_directories(path.parent_path());
        fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
        if (fd_ < 0)
            throw Error(ErrorKind::IoError, "cannot open " + path.string() + ": " + std::strerror(errno));
    }
    ~DurableLog()
    {
        if (fd_ >= 0)
            ::close(fd_);
    }
    DurableLog(DurableLog&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    DurableLog& operator=(DurableLog&& other) noexcept
    {
        if (this != &other) {
            if (fd_ >= 0)
                ::close(fd_);
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }

    void append(const std::string& line)
    {
        std::size_t off = 0;
        while (off < line.size()) {
            const auto n = ::write(fd_, line.data() + off, line.size() - off);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw Error(ErrorKind::IoError, std::string("decision log write failed: ") + std::strerror(errno));
            }
            off += static_cast<std::size_t>(n);
        }
        if (::fsync(fd_) != 0)
            throw Error(ErrorKind::IoError, std::string("decision log fsync failed: ") + std::strerror(errno));
    }

private:
    int fd_ = -1;
};

} // namespace detail

enum class StatusFilter { pending, decided, all };

inline StatusFilter status_from_string(std::string_view s)
{
    if (s == "pending")
        return StatusFilter::pending;
    if (s == "decided")
        return StatusFilter::decided;
    if (s == "all")
        return StatusFilter::all;
    throw Error(ErrorKind::ConfigError, "status must be pending, decided or all, got '" + std::string(s) + "'");
}

struct ReviewProgress {
    std::size_t total = 0;
    std::size_t decided = 0;
    std::size_t pending = 0;
};

inline std::filesystem::path default_decisions_log(const std::filesystem::path& queue)
{
    auto p = queue;
    p += ".decisions.jsonl";
    return p;
}

/// One review workflow: the flagged queue snapshot, the predictions it came
/// from, and an append-only decisions log that is replayed on open. Reads run
/// concurrently; decisions are serialised and each is durable before `decide`
/// returns. A decided item can never be decided again.
class ReviewSession {
public:
    ReviewSession(TaskSpec task, std::vector<ReviewItem> queue, std::vector<Prediction> predictions,
                  const std::filesystem::path& decisions_log)
        : task_(std::move(task)), queue_(std::move(queue)), predictions_(std::move(predictions)),
          created_at_(utc_timestamp())
    {
        std::sort(queue_.begin(), queue_.end(), [](const auto& a, const auto& b) { return a.example_id < b.example_id; });
        session_id_ = detail::sha256_hex(task_.task_id + "\n" + review_queue_to_jsonl(queue_)).substr(0, 16);
        for (std::size_t i = 0; i < queue_.size(); ++i)
            if (!index_.emplace(queue_[i].example_id, i).second)
                throw Error(ErrorKind::DuplicateId, "queue lists '" + queue_[i].example_id + "' twice");
        if (std::filesystem::exists(decisions_log))
            replay(decisions_log);
        log_ = detail::DurableLog(decisions_log);
    }

    static ReviewSession open(const std::filesystem::path& task_path, const std::filesystem::path& queue_path,
                              const std::filesystem::path& predictions_path,
                              std::optional<std::filesystem::path> decisions_log = std::nullopt)
    {
        return ReviewSession(load_task(task_path), load_review_queue(queue_path), load_predictions(predictions_path),
                             decisions_log ? *decisions_log : default_decisions_log(queue_path));
    }

    ReviewSession(ReviewSession&&) = delete;

    [[nodiscard]] const TaskSpec& task() const noexcept { return task_; }
    [[nodiscard]] const std::string& created_at() const noexcept { return created_at_; }
    /// Stable for a given task and queue snapshot.
    [[nodiscard]] const std::string& session_id() const noexcept { return session_id_; }

    [[nodiscard]] std::vector<ReviewItem> items(StatusFilter status) const
    {
        std::shared_lock lock(mutex_);
        std::vector<ReviewItem> out;
        for (const auto& item : queue_) {
            if (status == StatusFilter::pending && !item.pending())
                continue;
            if (status == StatusFilter::decided && item.pending())
                continue;
            out.push_back(item);
        }
        return out;
    }

    [[nodiscard]] std::optional<ReviewItem> item(const std::string& id) const
    {
        std::shared_lock lock(mutex_);
        auto it = index_.find(id);
        if (it == index_.end())
            return std::nullopt;
        return queue_[it->second];
    }

    ReviewItem decide(const std::string& id, const Decision& decision, std::optional<std::string> reviewer = std::nullopt)
    {
        std::unique_lock lock(mutex_);
        auto it = index_.find(id);
        if (it == index_.end())
            throw Error(ErrorKind::UnknownItem, "no review item '" + id + "'");
        ReviewItem updated = queue_[it->second];
        updated.decide(decision, task_, std::move(reviewer));
        log_.append(dump_line(log_entry(updated)) + "\n");
        queue_[it->second] = updated;
        return updated;
    }

    [[nodiscard]] ReviewProgress progress() const
    {
        std::shared_lock lock(mutex_);
        ReviewProgress p;
        p.total = queue_.size();
        for (const auto& item : queue_)
            item.pending() ? ++p.pending : ++p.decided;
        return p;
    }

    [[nodiscard]] std::vector<std::string> pending_ids() const
    {
        std::shared_lock lock(mutex_);
        std::vector<std::string> ids;
        for (const auto& item : queue_)
            if (item.pending())
                ids.push_back(item.example_id);
        return ids;
    }

    [[nodiscard]] std::vector<FinalLabel> merged(PendingFallback fallback) const
    {
        std::shared_lock lock(mutex_);
        return merge_decisions(predictions_, queue_, CorrectionPolicy{task_, fallback});
    }

    [[nodiscard]] std::string export_jsonl(PendingFallback fallback) const
    {
        return final_labels_to_jsonl(merged(fallback));
    }

    static ordered_json log_entry(const ReviewItem& item)
    {
        ordered_json j = {{"id", item.example_id}};
        if (item.decision.kind == DecisionKind::keep) {
            j["action"] = "keep";
        } else {
            j["action"] = "set_label";
            j["label"] = item.decision.label;
        }
        if (item.reviewer)
            j["reviewer"] = *item.reviewer;
        if (item.decided_at)
            j["decided_at"] = *item.decided_at;
        return j;
    }

private:
    /// Drops an unterminated last line (a write torn by a crash, never acknowledged)
    /// so the next append starts on a fresh line.
    static void truncate_torn_tail(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        if (content.empty() || content.back() == '\n')
            return;
        const auto last = content.rfind('\n');
        std::filesystem::resize_file(path, last == std::string::npos ? 0 : last + 1);
    }

    void replay(const std::filesystem::path& path)
    {
        truncate_torn_tail(path);
        std::ifstream in(path, std::ios::binary);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty())
                continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const nlohmann::json::exception&) {
                throw Error(ErrorKind::MalformedRecord, path.string() + " line " + std::to_string(line_no));
            }
            const auto id = j.value("id", std::string());
            auto it = index_.find(id);
            if (it == index_.end())
                throw Error(ErrorKind::UnknownItem, path.string() + " line " + std::to_string(line_no) +
                                                        ": decision for unknown item '" + id + "'");
            const auto action = j.value("action", std::string());
            Decision d;
            if (action == "keep")
                d = Decision::keep();
            else if (action == "set_label" && j.contains("label"))
                d = Decision::set_label(j["label"].get<int>());
            else
                throw Error(ErrorKind::MalformedRecord, path.string() + " line " + std::to_string(line_no));
            std::optional<std::string> reviewer;
            if (j.contains("reviewer") && j["reviewer"].is_string())
                reviewer = j["reviewer"].get<std::string>();
            queue_[it->second].decide(d, task_, reviewer, j.value("decided_at", std::string()));
        }
    }

    TaskSpec task_;
    std::vector<ReviewItem> queue_;
    std::map<std::string, std::size_t> index_;
    std::vector<Prediction> predictions_;
    std::string created_at_;
    std::string session_id_;
    detail::DurableLog log_;
    mutable std::shared_mutex mutex_;
};

} // namespace alex
