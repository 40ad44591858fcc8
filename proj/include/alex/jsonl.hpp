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

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alex/error.hpp"

namespace alex {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Compact single-line dump; invalid UTF-8 is replaced rather than thrown on.
template <class Json>
std::string dump_line(const Json& value)
{
    return value.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

/// Calls `fn(line_number, object)` for each nonblank line; line numbers are 1-based.
template <class Json = json>
void for_each_jsonl(std::istream& in, const std::function<void(std::size_t, const Json&)>& fn)
{
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        Json value;
        try {
            value = Json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!value.is_object())
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + ": expected a JSON object");
        fn(line_no, value);
    }
}

template <class Json = json>
void for_each_jsonl(const std::filesystem::path& path, const std::function<void(std::size_t, const Json&)>& fn)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    for_each_jsonl<Json>(in, fn);
}

template <class Json>
std::string to_jsonl(const std::vector<Json>& rows)
{
    std::string out;
    for (const auto& row : rows) {
        out += dump_line(row);
        out += '\n';
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& contents)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << contents;
    if (!out)
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

inline json read_json_file(const std::filesystem::path& path)
{
    try {
        return json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedRecord, path.string() + ": " + e.what());
    }
}

} // namespace alex
