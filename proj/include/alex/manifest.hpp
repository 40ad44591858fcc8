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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "alex/detail/hash.hpp"
#include "alex/jsonl.hpp"

namespace alex {

/// Run record written next to every stage's outputs. Contains no timestamps,
/// so identical inputs give an identical manifest.
class Manifest {
public:
    explicit Manifest(std::string stage) : stage_(std::move(stage)) {}

    void set_config(const ordered_json& config) { config_ = config; }
    void add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }
    void add_input(const std::filesystem::path& path) { inputs_[path.string()] = detail::sha256_file(path); }
    void add_output(const std::filesystem::path& path) { outputs_[path.string()] = detail::sha256_file(path); }

    [[nodiscard]] std::string config_hash() const { return detail::sha256_hex(dump_line(config_)); }
    [[nodiscard]] const std::map<std::string, std::string>& inputs() const noexcept { return inputs_; }
    [[nodiscard]] const std::map<std::string, std::string>& outputs() const noexcept { return outputs_; }

    [[nodiscard]] ordered_json to_json() const
    {
        ordered_json j;
        j["format"] = "alex-manifest";
        j["stage"] = stage_;
        j["config_hash"] = config_hash();
        j["config"] = config_;
        j["seeds"] = seeds_;
        j["inputs"] = inputs_;
        j["outputs"] = outputs_;
        return j;
    }

    void write(const std::filesystem::path& path) const { write_file(path, to_json().dump(2) + "\n"); }

private:
    std::string stage_;
    ordered_json config_ = ordered_json::object();
    std::map<std::string, std::uint64_t> seeds_;
    std::map<std::string, std::string> inputs_;
    std::map<std::string, std::string> outputs_;
};

} // namespace alex
