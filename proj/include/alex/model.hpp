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
#include <memory>
#include <string>
#include <vector>

#include "alex/classifier.hpp"
#include "alex/corpus.hpp"
#include "alex/encoder.hpp"

namespace alex {

inline constexpr int kCheckpointVersion = 1;

/// Encoder + trained head + the task it was trained for.
struct Model {
    std::shared_ptr<const EncoderBackend> encoder;
    ClassifierHead head;
    TaskSpec task;
    TrainConfig train_config;

    [[nodiscard]] std::vector<double> proba(std::string_view text) const
    {
        return predict_proba(head, encode(*encoder, text));
    }

    [[nodiscard]] int predict_label(std::string_view text) const
    {
        return task.labels[argmax(proba(text))].id;
    }
};

inline json checkpoint_json(const Model& model)
{
    return {
        {"format", "alex-checkpoint"},
        {"format_version", kCheckpointVersion},
        {"encoder", {{"identifier", model.encoder->identifier()}, {"config", model.encoder->config()}}},
        {"head",
         {{"classes", model.head.classes},
          {"dim", model.head.dim},
          {"weights", model.head.weights},
          {"bias", model.head.bias}}},
        {"task", to_json(model.task)},
        {"train_config", to_json(model.train_config)},
    };
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path)
{
    write_file(path, checkpoint_json(model).dump(1) + "\n");
}

inline Model model_from_json(const json& j)
{
    try {
        if (j.value("format", std::string()) != "alex-checkpoint")
            throw Error(ErrorKind::MalformedRecord, "not an alex checkpoint");
        const int version = j.at("format_version").get<int>();
        if (version != kCheckpointVersion)
            throw Error(ErrorKind::MalformedRecord, "unsupported checkpoint version " + std::to_string(version));
        Model m;
        const auto& enc = j.at("encoder");
        m.encoder = make_encoder(enc.at("identifier").get<std::string>(), enc.value("config", json::object()));
        const auto& h = j.at("head");
        m.head.classes = h.at("classes").get<std::size_t>();
        m.head.dim = h.at("dim").get<std::size_t>();
        m.head.weights = h.at("weights").get<std::vector<double>>();
        m.head.bias = h.at("bias").get<std::vector<double>>();
        if (m.head.weights.size() != m.head.classes * m.head.dim || m.head.bias.size() != m.head.classes)
            throw Error(ErrorKind::MalformedRecord, "head shape does not match its parameters");
        if (m.head.dim != m.encoder->dim())
            throw Error(ErrorKind::DimensionMismatch, "head dim differs from encoder dim");
        m.task = task_from_json(j.at("task"));
        if (m.task.size() != m.head.classes)
            throw Error(ErrorKind::MalformedRecord, "head class count differs from task label count");
        m.train_config = train_config_from_json(j.value("train_config", json::object()));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedRecord, std::string("checkpoint: ") + e.what());
    }
}

inline Model load_checkpoint(const std::filesystem::path& path)
{
    return model_from_json(read_json_file(path));
}

struct Prediction {
    std::string id;
    int pred = 0;
    std::vector<double> proba;
};

inline std::vector<Prediction> predict_dataset(const Model& model, const Dataset& data)
{
    std::vector<Prediction> out;
    out.reserve(data.size());
    for (const auto& ex : data.examples) {
        auto p = model.proba(ex.post.text);
        const int label = model.task.labels[argmax(p)].id;
        out.push_back({ex.post.id, label, std::move(p)});
    }
    return out;
}

inline std::string predictions_to_jsonl(const std::vector<Prediction>& preds)
{
    std::string out;
    for (const auto& p : preds) {
        out += dump_line(ordered_json{{"id", p.id}, {"pred", p.pred}, {"proba", p.proba}});
        out += '\n';
    }
    return out;
}

inline std::vector<Prediction> load_predictions(const std::filesystem::path& path)
{
    std::vector<Prediction> out;
    for_each_jsonl<json>(path, [&](std::size_t line, const json& j) {
        try {
            Prediction p;
            p.id = j.at("id").get<std::string>();
            p.pred = j.at("pred").get<int>();
            if (j.contains("proba"))
                p.proba = j["proba"].get<std::vector<double>>();
            out.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line) + ": " + e.what());
        }
    });
    return out;
}

} // namespace alex
