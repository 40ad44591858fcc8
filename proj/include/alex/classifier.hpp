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
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "alex/corpus.hpp"
#include "alex/encoder.hpp"
#include "alex/random.hpp"

namespace alex {

/// Probability clamp applied before every log in the loss.
inline constexpr double kProbEpsilon = 1e-7;

/// Linear softmax head over an embedding: K x d weights (row-major) plus bias.
struct ClassifierHead {
    std::size_t classes = 0;
    std::size_t dim = 0;
    std::vector<double> weights;
    std::vector<double> bias;

    ClassifierHead() = default;
    ClassifierHead(std::size_t k, std::size_t d) : classes(k), dim(d), weights(k * d, 0.0), bias(k, 0.0) {}

    [[nodiscard]] double& w(std::size_t k, std::size_t j) { return weights[k * dim + j]; }
    [[nodiscard]] double w(std::size_t k, std::size_t j) const { return weights[k * dim + j]; }

    bool operator==(const ClassifierHead&) const = default;
};

inline std::vector<double> logits(const ClassifierHead& head, std::span<const double> e)
{
    if (e.size() != head.dim)
        throw Error(ErrorKind::DimensionMismatch,
                    "embedding has " + std::to_string(e.size()) + " values, head expects " + std::to_string(head.dim));
    std::vector<double> z(head.bias);
    for (std::size_t k = 0; k < head.classes; ++k) {
        const double* row = head.weights.data() + k * head.dim;
        double acc = 0.0;
        for (std::size_t j = 0; j < head.dim; ++j)
            acc += row[j] * e[j];
        z[k] += acc;
    }
    return z;
}

inline std::vector<double> softmax(std::span<const double> z)
{
    std::vector<double> p(z.begin(), z.end());
    if (p.empty())
        return p;
    const double m = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : p)
        v /= sum;
    return p;
}

/// Smallest index attaining the maximum.
inline std::size_t argmax(std::span<const double> values)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best])
            best = i;
    return best;
}

inline std::vector<double> predict_proba(const ClassifierHead& head, const Embedding& e)
{
    return softmax(logits(head, e.values));
}

/// Output index of the most probable class (ties go to the lowest index).
inline std::size_t predict(const ClassifierHead& head, const Embedding& e)
{
    return argmax(predict_proba(head, e));
}

inline double clamp_prob(double p) noexcept
{
    return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

/// Binary weighted cross-entropy, mean over examples:
///   -1/n * sum( lambda * y * log(p) + (1 - y) * log(1 - p) )
/// where p is the predicted probability of the positive class.
inline double weighted_loss(std::span<const int> y_true, std::span<const double> y_prob, double lambda_weight)
{
    if (y_true.size() != y_prob.size())
        throw Error(ErrorKind::LengthMismatch, std::to_string(y_true.size()) + " labels vs " +
                                                   std::to_string(y_prob.size()) + " probabilities");
    if (y_true.empty())
        return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double p = clamp_prob(y_prob[i]);
        const double y = y_true[i] != 0 ? 1.0 : 0.0;
        total += lambda_weight * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return -total / static_cast<double>(y_true.size());
}

/// Multi-class generalisation: -1/n * sum_i w[y_i] * log p_i[y_i].
/// With K = 2 and w = {1, lambda} this is the binary loss above.
inline double weighted_loss(std::span<const std::size_t> y_index, const std::vector<std::vector<double>>& probs,
                            std::span<const double> class_weights)
{
    if (y_index.size() != probs.size())
        throw Error(ErrorKind::LengthMismatch, std::to_string(y_index.size()) + " labels vs " +
                                                   std::to_string(probs.size()) + " probability rows");
    if (y_index.empty())
        return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < y_index.size(); ++i) {
        if (y_index[i] >= probs[i].size() || probs[i].size() != class_weights.size())
            throw Error(ErrorKind::LengthMismatch, "row " + std::to_string(i) + " does not match the class count");
        total += class_weights[y_index[i]] * std::log(clamp_prob(probs[i][y_index[i]]));
    }
    return -total / static_cast<double>(y_index.size());
}

struct HeadGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

/// Mean weighted loss over a batch and its gradient with respect to the head.
/// The gradient is exact for the clamped loss (zero where the clamp is active).
inline double loss_and_gradient(const ClassifierHead& head, std::span<const Embedding* const> batch,
                                std::span<const std::size_t> targets, std::span<const double> class_weights,
                                HeadGradient* grad)
{
    if (batch.size() != targets.size())
        throw Error(ErrorKind::LengthMismatch, "batch and targets differ in length");
    if (grad) {
        grad->weights.assign(head.weights.size(), 0.0);
        grad->bias.assign(head.bias.size(), 0.0);
    }
    if (batch.empty())
        return 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    std::vector<double> dz(head.classes);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& e = batch[i]->values;
        const auto p = softmax(logits(head, e));
        const std::size_t y = targets[i];
        const double wy = class_weights[y];
        const double py = p[y];
        total -= wy * std::log(clamp_prob(py));
        if (!grad || py < kProbEpsilon || py > 1.0 - kProbEpsilon)
            continue;
        for (std::size_t k = 0; k < head.classes; ++k)
            dz[k] = wy * (p[k] - (k == y ? 1.0 : 0.0)) * inv_n;
        for (std::size_t k = 0; k < head.classes; ++k) {
            if (dz[k] == 0.0)
                continue;
            double* row = grad->weights.data() + k * head.dim;
            for (std::size_t j = 0; j < head.dim; ++j)
                row[j] += dz[k] * e[j];
            grad->bias[k] += dz[k];
        }
    }
    return total * inv_n;
}

struct TrainConfig {
    double lambda_weight = 0.1;
    double learning_rate = 2e-5;
    std::size_t batch_size = 8;
    double weight_decay = 0.01;
    std::size_t epochs = 6;
    std::size_t warmup_steps = 0;
    std::uint64_t seed = 42;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// Apply lambda to the report label in tasks with more than two classes.
    bool multiclass_weighting = false;
    double init_scale = 0.01;

    void validate() const
    {
        if (!(learning_rate > 0.0))
            throw Error(ErrorKind::ConfigError, "learning_rate must be > 0");
        if (batch_size < 1)
            throw Error(ErrorKind::ConfigError, "batch_size must be >= 1");
        if (!(lambda_weight > 0.0))
            throw Error(ErrorKind::ConfigError, "lambda_weight must be > 0");
        if (weight_decay < 0.0)
            throw Error(ErrorKind::ConfigError, "weight_decay must be >= 0");
    }

    /// Baseline setting: batch 8, lr 2e-5, lambda 0.1, 6 epochs, no warm-up.
    static TrainConfig baseline() { return {}; }

    /// Best reported Task-4 profile: lr 2e-5, batch 16, weight decay 0.005, 6 epochs.
    static TrainConfig task4()
    {
        TrainConfig c;
        c.batch_size = 16;
        c.weight_decay = 0.005;
        return c;
    }

    /// The hashing encoder is frozen and the head starts from scratch, so it
    /// needs a far larger step than transformer fine-tuning.
    static TrainConfig reference()
    {
        TrainConfig c;
        c.learning_rate = 0.05;
        c.lambda_weight = 1.0;
        return c;
    }
};

inline json to_json(const TrainConfig& c)
{
    return {{"lambda_weight", c.lambda_weight}, {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"weight_decay", c.weight_decay},   {"epochs", c.epochs},               {"warmup_steps", c.warmup_steps},
            {"seed", c.seed},                   {"beta1", c.beta1},                 {"beta2", c.beta2},
            {"adam_epsilon", c.adam_epsilon},   {"multiclass_weighting", c.multiclass_weighting},
            {"init_scale", c.init_scale}};
}

inline TrainConfig train_config_from_json(const json& j, TrainConfig c = {})
{
    c.lambda_weight = j.value("lambda_weight", c.lambda_weight);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.seed = j.value("seed", c.seed);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.multiclass_weighting = j.value("multiclass_weighting", c.multiclass_weighting);
    c.init_scale = j.value("init_scale", c.init_scale);
    return c;
}

/// Loss weight per output index: lambda on the report label for binary tasks
/// (and for multi-class tasks when enabled), 1 elsewhere.
inline std::vector<double> class_weights(const TaskSpec& task, const TrainConfig& config)
{
    std::vector<double> w(task.size(), 1.0);
    if (task.size() == 2 || config.multiclass_weighting)
        w[task.index_of(task.report_label)] = config.lambda_weight;
    return w;
}

/// Adam with decoupled weight decay.
class AdamW {
public:
    AdamW(std::size_t n_params, const TrainConfig& config)
        : config_(config), m_(n_params, 0.0), v_(n_params, 0.0)
    {
    }

    /// `params` and `grads` are views over the same flattened parameter order on every call.
    void step(std::span<double> params, std::span<const double> grads, double lr)
    {
        ++t_;
        const double b1 = config_.beta1;
        const double b2 = config_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
            v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
            const double mhat = m_[i] / c1;
            const double vhat = v_[i] / c2;
            params[i] -= lr * (mhat / (std::sqrt(vhat) + config_.adam_epsilon) + config_.weight_decay * params[i]);
        }
    }

    [[nodiscard]] std::size_t steps() const noexcept { return t_; }

private:
    TrainConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

inline ClassifierHead init_head(std::size_t classes, std::size_t dim, const TrainConfig& config)
{
    ClassifierHead head(classes, dim);
    Rng rng(derive_seed(config.seed, "head-init"));
    for (double& w : head.weights)
        w = config.init_scale * rng.normal();
    return head;
}

struct FitResult {
    ClassifierHead head;
    std::vector<double> epoch_losses;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains a fresh head on frozen embeddings with mini-batch AdamW. Single-threaded
/// and fully deterministic for a given seed, config and data order.
inline FitResult fit_embeddings(const std::vector<Embedding>& embeddings, const std::vector<std::size_t>& targets,
                                std::size_t classes, std::span<const double> weights, const TrainConfig& config,
                                const EpochCallback& on_epoch = {})
{
    config.validate();
    if (embeddings.empty())
        throw Error(ErrorKind::EmptyDataset, "training set is empty");
    if (embeddings.size() != targets.size())
        throw Error(ErrorKind::LengthMismatch, "embeddings and targets differ in length");
    const std::size_t dim = embeddings.front().size();

    FitResult result{init_head(classes, dim, config), {}};
    auto& head = result.head;
    const std::size_t n_params = head.weights.size() + head.bias.size();
    AdamW opt(n_params, config);
    std::vector<double> flat(n_params);
    std::vector<double> flat_grad(n_params);

    Rng rng(derive_seed(config.seed, "batch-order"));
    std::vector<std::size_t> order(embeddings.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    HeadGradient grad;
    std::vector<const Embedding*> batch;
    std::vector<std::size_t> batch_targets;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            batch_targets.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(&embeddings[order[i]]);
                batch_targets.push_back(targets[order[i]]);
            }
            const double loss = loss_and_gradient(head, batch, batch_targets, weights, &grad);
            if (!std::isfinite(loss))
                throw Error(ErrorKind::DivergedLoss, "non-finite loss in epoch " + std::to_string(epoch + 1));
            epoch_total += loss * static_cast<double>(end - start);

            std::copy(head.weights.begin(), head.weights.end(), flat.begin());
            std::copy(head.bias.begin(), head.bias.end(), flat.begin() + static_cast<std::ptrdiff_t>(head.weights.size()));
            std::copy(grad.weights.begin(), grad.weights.end(), flat_grad.begin());
            std::copy(grad.bias.begin(), grad.bias.end(),
                      flat_grad.begin() + static_cast<std::ptrdiff_t>(head.weights.size()));
            double lr = config.learning_rate;
            if (config.warmup_steps > 0 && opt.steps() < config.warmup_steps)
                lr *= static_cast<double>(opt.steps() + 1) / static_cast<double>(config.warmup_steps);
            opt.step(flat, flat_grad, lr);
            std::copy(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(head.weights.size()), head.weights.begin());
            std::copy(flat.begin() + static_cast<std::ptrdiff_t>(head.weights.size()), flat.end(), head.bias.begin());
        }
        const double mean = epoch_total / static_cast<double>(order.size());
        if (!std::isfinite(mean))
            throw Error(ErrorKind::DivergedLoss, "non-finite mean loss in epoch " + std::to_string(epoch + 1));
        result.epoch_losses.push_back(mean);
        if (on_epoch)
            on_epoch(epoch + 1, mean);
    }
    return result;
}

inline std::vector<Embedding> encode_all(const EncoderBackend& backend, const Dataset& data)
{
    std::vector<Embedding> out;
    out.reserve(data.size());
    for (const auto& ex : data.examples)
        out.push_back(encode(backend, ex.post.text));
    return out;
}

inline FitResult fit(const EncoderBackend& backend, const Dataset& train, const TrainConfig& config,
                     const EpochCallback& on_epoch = {})
{
    if (train.examples.empty())
        throw Error(ErrorKind::EmptyDataset, "training set is empty");
    std::vector<std::size_t> targets;
    targets.reserve(train.size());
    for (const auto& ex : train.examples) {
        if (!ex.label)
            throw Error(ErrorKind::UnlabeledDataset, "training example '" + ex.post.id + "' has no label");
        targets.push_back(train.task.index_of(*ex.label));
    }
    const auto weights = class_weights(train.task, config);
    return fit_embeddings(encode_all(backend, train), targets, train.task.size(), weights, config, on_epoch);
}

} // namespace alex
