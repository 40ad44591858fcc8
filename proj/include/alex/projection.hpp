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
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alex/encoder.hpp"
#include "alex/jsonl.hpp"
#include "alex/random.hpp"

namespace alex {

struct ProjectionConfig {
    double perplexity = 30.0;
    std::size_t iterations = 1000;
    double early_exaggeration = 12.0;
    std::size_t exaggeration_iterations = 250;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    std::size_t momentum_switch = 250;
    std::uint64_t seed = 0;
};

using Point2 = std::array<double, 2>;

struct TsneResult {
    std::vector<Point2> coords;
    double kl_initial = 0.0;
    double kl_final = 0.0;
    double perplexity_used = 0.0;
};

struct Affinities {
    std::size_t n = 0;
    /// Symmetric joint probabilities, row-major n x n, zero diagonal, sum 1.
    std::vector<double> p;
    /// Perplexity exp(H(P_i)) reached by each conditional row.
    std::vector<double> row_perplexity;
};

inline constexpr double kMinAffinity = 1e-12;

namespace detail {

inline std::vector<double> squared_distances(const std::vector<std::vector<double>>& x)
{
    const std::size_t n = x.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < x[i].size(); ++k) {
                const double diff = x[i][k] - x[j][k];
                s += diff * diff;
            }
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    return d;
}

} // namespace detail

/// Gaussian input affinities. Each row's precision is bisected (tolerance 1e-5
/// on the entropy, at most 50 steps) to reach the target perplexity; rows are
/// then symmetrised, floored at 1e-12 off the diagonal and renormalised.
inline Affinities input_affinities(const std::vector<std::vector<double>>& x, double perplexity)
{
    const std::size_t n = x.size();
    Affinities a;
    a.n = n;
    a.p.assign(n * n, 0.0);
    a.row_perplexity.assign(n, 1.0);
    if (n < 2)
        return a;
    const auto d = detail::squared_distances(x);
    const double target = std::log(perplexity);
    std::vector<double> cond(n * n, 0.0);

    for (std::size_t i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                dmin = std::min(dmin, d[i * n + j]);
        double beta = 1.0;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        double entropy = 0.0;
        for (int step = 0; step < 50; ++step) {
            double sum = 0.0;
            double weighted = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i)
                    continue;
                const double shifted = d[i * n + j] - dmin;
                const double v = std::exp(-beta * shifted);
                cond[i * n + j] = v;
                sum += v;
                weighted += shifted * v;
            }
            entropy = std::log(sum) + beta * weighted / sum;
            for (std::size_t j = 0; j < n; ++j)
                cond[i * n + j] /= sum;
            const double diff = entropy - target;
            if (std::abs(diff) < 1e-5)
                break;
            if (diff > 0.0) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = std::isinf(lo) ? beta / 2.0 : (beta + lo) / 2.0;
            }
        }
        a.row_perplexity[i] = std::exp(entropy);
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            const double v = std::max((cond[i * n + j] + cond[j * n + i]) / (2.0 * static_cast<double>(n)), kMinAffinity);
            a.p[i * n + j] = v;
            total += v;
        }
    for (double& v : a.p)
        v /= total;
    return a;
}

namespace detail {

/// KL(P || Q) for the Student-t output affinities of `y`.
inline double kl_divergence(const Affinities& a, const std::vector<Point2>& y)
{
    const std::size_t n = a.n;
    std::vector<double> num(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            const double dx = y[i][0] - y[j][0];
            const double dy = y[i][1] - y[j][1];
            num[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
            z += num[i * n + j];
        }
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            const double p = a.p[i * n + j];
            const double q = std::max(num[i * n + j] / z, kMinAffinity);
            if (p > 0.0)
                kl += p * std::log(p / q);
        }
    return kl;
}

} // namespace detail

/// Exact O(n^2) t-SNE to two dimensions. Deterministic for a given seed: the
/// initial layout is drawn point by point in index order from N(0, 1e-4^2).
inline TsneResult tsne(const std::vector<std::vector<double>>& data, const ProjectionConfig& config)
{
    const std::size_t n = data.size();
    if (n == 0)
        throw Error(ErrorKind::EmptyDataset, "t-SNE needs at least one point");
    for (const auto& row : data)
        if (row.size() != data.front().size())
            throw Error(ErrorKind::DimensionMismatch, "all embeddings must share one dimension");
    TsneResult result;
    if (n == 1) {
        result.coords.push_back({0.0, 0.0});
        return result;
    }
    const double perplexity = std::min(config.perplexity, static_cast<double>(n - 1) / 3.0);
    if (perplexity < 1.0)
        throw Error(ErrorKind::PerplexityTooLarge, "perplexity capped at (n-1)/3 = " + std::to_string(perplexity) +
                                                        " is below 1; need at least 4 points");
    result.perplexity_used = perplexity;
    const auto aff = input_affinities(data, perplexity);

    Rng rng(derive_seed(config.seed, "tsne-init"));
    std::vector<Point2> y(n);
    for (auto& pt : y) {
        pt[0] = 1e-4 * rng.normal();
        pt[1] = 1e-4 * rng.normal();
    }
    result.kl_initial = detail::kl_divergence(aff, y);

    std::vector<Point2> update(n, {0.0, 0.0});
    std::vector<Point2> gains(n, {1.0, 1.0});
    std::vector<Point2> grad(n);
    std::vector<double> num(n * n);
    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        const double exaggeration = iter < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
        const double momentum = iter < config.momentum_switch ? config.initial_momentum : config.final_momentum;

        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double dx = y[i][0] - y[j][0];
                const double dy = y[i][1] - y[j][1];
                const double v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                z += 2.0 * v;
            }
        for (std::size_t i = 0; i < n; ++i) {
            double gx = 0.0;
            double gy = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i)
                    continue;
                const double v = num[i * n + j];
                const double q = std::max(v / z, kMinAffinity);
                const double mult = (exaggeration * aff.p[i * n + j] - q) * v;
                gx += mult * (y[i][0] - y[j][0]);
                gy += mult * (y[i][1] - y[j][1]);
            }
            grad[i] = {4.0 * gx, 4.0 * gy};
        }
        for (std::size_t i = 0; i < n; ++i)
            for (int c = 0; c < 2; ++c) {
                auto& g = gains[i][c];
                g = (grad[i][c] > 0.0) != (update[i][c] > 0.0) ? g + 0.2 : g * 0.8;
                g = std::max(g, 0.01);
                update[i][c] = momentum * update[i][c] - config.learning_rate * g * grad[i][c];
                y[i][c] += update[i][c];
            }
        Point2 mean{0.0, 0.0};
        for (const auto& pt : y) {
            mean[0] += pt[0];
            mean[1] += pt[1];
        }
        for (auto& pt : y) {
            pt[0] -= mean[0] / static_cast<double>(n);
            pt[1] -= mean[1] / static_cast<double>(n);
        }
    }
    for (const auto& pt : y)
        if (!std::isfinite(pt[0]) || !std::isfinite(pt[1]))
            throw Error(ErrorKind::DivergedLoss, "t-SNE produced a non-finite coordinate");
    result.kl_final = detail::kl_divergence(aff, y);
    result.coords = std::move(y);
    return result;
}

inline TsneResult tsne(const std::vector<Embedding>& embeddings, const ProjectionConfig& config)
{
    std::vector<std::vector<double>> data;
    data.reserve(embeddings.size());
    for (const auto& e : embeddings)
        data.push_back(e.values);
    return tsne(data, config);
}

struct ScatterFiles {
    std::filesystem::path json;
    std::filesystem::path svg;
};

namespace detail {

inline std::string svg_escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

inline std::string fmt_num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

} // namespace detail

/// Writes `<stem>.json` ({"points": [{id, x, y, label}]}) and `<stem>.svg`
/// (one colour per label with a legend; single colour and no legend when
/// unlabeled). Non-finite coordinates are rejected before anything is written.
inline ScatterFiles export_scatter(const std::vector<Point2>& coords, const std::optional<std::vector<int>>& labels,
                                   const std::filesystem::path& stem, const std::vector<std::string>& ids = {},
                                   const std::map<int, std::string>& label_names = {}, const std::string& title = {})
{
    for (const auto& pt : coords)
        if (!std::isfinite(pt[0]) || !std::isfinite(pt[1]))
            throw Error(ErrorKind::MalformedRecord, "non-finite coordinate; nothing written");
    if (labels && labels->size() != coords.size())
        throw Error(ErrorKind::LengthMismatch, "labels and coordinates differ in length");
    if (!ids.empty() && ids.size() != coords.size())
        throw Error(ErrorKind::LengthMismatch, "ids and coordinates differ in length");

    ordered_json points = ordered_json::array();
    for (std::size_t i = 0; i < coords.size(); ++i) {
        ordered_json p = {{"id", ids.empty() ? std::to_string(i) : ids[i]}, {"x", coords[i][0]}, {"y", coords[i][1]}};
        p["label"] = labels ? ordered_json((*labels)[i]) : ordered_json(nullptr);
        points.push_back(std::move(p));
    }

    static constexpr std::array<const char*, 10> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::map<int, std::size_t> colour;
    if (labels)
        for (int l : *labels)
            colour.emplace(l, 0);
    {
        std::size_t c = 0;
        for (auto& [_, idx] : colour)
            idx = c++ % palette.size();
    }

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (!coords.empty()) {
        xmin = xmax = coords[0][0];
        ymin = ymax = coords[0][1];
        for (const auto& pt : coords) {
            xmin = std::min(xmin, pt[0]);
            xmax = std::max(xmax, pt[0]);
            ymin = std::min(ymin, pt[1]);
            ymax = std::max(ymax, pt[1]);
        }
    }
    const double size = 600.0;
    const double margin = 30.0;
    auto sx = [&](double v) { return xmax > xmin ? margin + (v - xmin) / (xmax - xmin) * (size - 2 * margin) : size / 2; };
    auto sy = [&](double v) { return ymax > ymin ? size - margin - (v - ymin) / (ymax - ymin) * (size - 2 * margin) : size / 2; };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n";
    svg += "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n";
    if (!title.empty())
        svg += "<text x=\"300\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
               detail::svg_escape(title) + "</text>\n";
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const char* fill = labels ? palette[colour[(*labels)[i]]] : palette[0];
        svg += "<circle cx=\"" + detail::fmt_num(sx(coords[i][0])) + "\" cy=\"" + detail::fmt_num(sy(coords[i][1])) +
               "\" r=\"3\" fill=\"" + fill + "\" fill-opacity=\"0.8\"/>\n";
    }
    if (labels) {
        svg += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
        double ly = 30.0;
        for (const auto& [label, idx] : colour) {
            auto name = label_names.count(label) ? label_names.at(label) : std::to_string(label);
            svg += "<circle cx=\"500\" cy=\"" + detail::fmt_num(ly - 4) + "\" r=\"5\" fill=\"" + palette[idx] + "\"/>";
            svg += "<text x=\"510\" y=\"" + detail::fmt_num(ly) + "\">" + detail::svg_escape(name) + "</text>\n";
            ly += 18.0;
        }
        svg += "</g>\n";
    }
    svg += "</svg>\n";

    ScatterFiles files{stem, stem};
    files.json.replace_extension(".json");
    files.svg.replace_extension(".svg");
    write_file(files.json, dump_line(ordered_json{{"points", points}}) + "\n");
    write_file(files.svg, svg);
    return files;
}

} // namespace alex
