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
#include <cstdio>
#include <string>
#include <tuple>
#include <vector>

#include "alex/classifier.hpp"
#include "alex/metrics.hpp"

namespace alex {

/// Hyperparameter grid. Defaults span batch {4, 8, 16}, learning rate
/// 2e-5 to 1e-4, weight decay {0.001, 0.005, 0.01} and 2 to 20 epochs.
struct GridSpace {
    std::vector<std::size_t> batch_sizes{4, 8, 16};
    std::vector<double> learning_rates{2e-5, 5e-5, 1e-4};
    std::vector<double> weight_decays{0.001, 0.005, 0.01};
    std::vector<std::size_t> epochs{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};

    [[nodiscard]] std::size_t cells() const noexcept
    {
        return batch_sizes.size() * learning_rates.size() * weight_decays.size() * epochs.size();
    }
};

struct GridCell {
    TrainConfig config;
    EvalReport report;
    std::string metric;
    double headline = 0.0;
};

namespace detail {

inline std::vector<int> gold_labels(const Dataset& data)
{
    std::vector<int> gold;
    gold.reserve(data.size());
    for (const auto& ex : data.examples) {
        if (!ex.label)
            throw Error(ErrorKind::UnlabeledDataset, "example '" + ex.post.id + "' has no label");
        gold.push_back(*ex.label);
    }
    return gold;
}

} // namespace detail

/// Trains one head per grid cell on `train` and scores it on `valid`. Rows come
/// back sorted by headline metric, best first; ties keep grid order.
inline std::vector<GridCell> run_grid(const EncoderBackend& encoder, const Dataset& train, const Dataset& valid,
                                      const GridSpace& space, const TrainConfig& base)
{
    if (space.cells() == 0)
        throw Error(ErrorKind::EmptyGrid, "every grid axis needs at least one value");
    if (train.examples.empty())
        throw Error(ErrorKind::EmptyDataset, "training set is empty");
    if (valid.examples.empty())
        throw Error(ErrorKind::EmptyDataset, "validation set is empty");

    const auto train_x = encode_all(encoder, train);
    const auto valid_x = encode_all(encoder, valid);
    std::vector<std::size_t> targets;
    for (int label : detail::gold_labels(train))
        targets.push_back(train.task.index_of(label));
    const auto valid_gold = detail::gold_labels(valid);

    std::vector<GridCell> cells;
    cells.reserve(space.cells());
    for (auto batch : space.batch_sizes)
        for (double lr : space.learning_rates)
            for (double wd : space.weight_decays)
                for (auto epochs : space.epochs) {
                    GridCell cell;
                    cell.config = base;
                    cell.config.batch_size = batch;
                    cell.config.learning_rate = lr;
                    cell.config.weight_decay = wd;
                    cell.config.epochs = epochs;
                    const auto weights = class_weights(train.task, cell.config);
                    const auto head =
                        fit_embeddings(train_x, targets, train.task.size(), weights, cell.config).head;
                    std::vector<int> pred;
                    pred.reserve(valid_x.size());
                    for (const auto& e : valid_x)
                        pred.push_back(train.task.labels[predict(head, e)].id);
                    cell.report = evaluate(valid_gold, pred, train.task);
                    std::tie(cell.metric, cell.headline) = headline(cell.report, train.task);
                    cells.push_back(std::move(cell));
                }
    std::stable_sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.headline > b.headline; });
    return cells;
}

inline std::string grid_to_csv(const std::vector<GridCell>& cells)
{
    const std::string metric = cells.empty() ? std::string("headline") : cells.front().metric;
    std::string out = "rank,batch_size,learning_rate,weight_decay,epochs,lambda_weight," + metric + ",accuracy,macro_f1\n";
    char buf[256];
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%g,%g,%zu,%g,%.6f,%.6f,%.6f\n", i + 1, c.config.batch_size,
                      c.config.learning_rate, c.config.weight_decay, c.config.epochs, c.config.lambda_weight,
                      c.headline, c.report.accuracy, c.report.macro_f1);
        out += buf;
    }
    return out;
}

} // namespace alex
