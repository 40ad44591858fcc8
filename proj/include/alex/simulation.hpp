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

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "alex/correction.hpp"
#include "alex/metrics.hpp"
#include "alex/random.hpp"

namespace alex {

/// Verdict behaviour of a simulated verifier.
struct VerifierProfile {
    /// P(verdict = true | prediction correct)
    double p_true_given_correct = 1.0;
    /// P(verdict = false | prediction incorrect)
    double p_false_given_incorrect = 1.0;

    void validate() const
    {
        auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!ok(p_true_given_correct) || !ok(p_false_given_incorrect))
            throw Error(ErrorKind::InvalidDistribution, "verifier profile probabilities must lie in [0, 1]");
    }
};

struct SimulationResult {
    /// Joint (gold, pred) probabilities before and after correction; n = 1.
    ExpectedEvalReport base;
    ExpectedEvalReport expected;
    /// Monte Carlo confusion counts after correction (absent when n_monte_carlo = 0).
    std::optional<EvalReport> empirical;
    /// Delta-method standard error of each label's F1 at the Monte Carlo sample size.
    std::map<int, double> f1_standard_error;
    double accuracy_standard_error = 0.0;
};

namespace detail {

inline void check_distribution(const std::vector<double>& p, const std::string& what)
{
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(ErrorKind::InvalidDistribution, what + " has a negative or non-finite entry");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(ErrorKind::InvalidDistribution, what + " sums to " + std::to_string(sum));
}

/// Standard error of F1(label) estimated from n multinomial draws with cell
/// probabilities `joint`, by the delta method on F1 = 2a / (2a + b + c).
inline double f1_standard_error(const std::vector<std::vector<double>>& joint, std::size_t label_pos, std::size_t n)
{
    const std::size_t k = joint.size();
    const double a = joint[label_pos][label_pos];
    double b = 0.0;
    double c = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        if (j == label_pos)
            continue;
        b += joint[j][label_pos];
        c += joint[label_pos][j];
    }
    const double d = 2.0 * a + b + c;
    if (d <= 0.0 || n == 0)
        return 0.0;
    const double ga = 2.0 * (b + c) / (d * d);
    const double gbc = -2.0 * a / (d * d);
    double mean = 0.0;
    double second = 0.0;
    for (std::size_t g = 0; g < k; ++g)
        for (std::size_t p = 0; p < k; ++p) {
            double grad = 0.0;
            if (g == label_pos && p == label_pos)
                grad = ga;
            else if (g == label_pos || p == label_pos)
                grad = gbc;
            mean += grad * joint[g][p];
            second += grad * grad * joint[g][p];
        }
    return std::sqrt(std::max(0.0, second - mean * mean) / static_cast<double>(n));
}

} // namespace detail

/// Pushes a base confusion (class priors times per-class prediction rates)
/// through a verifier profile and the correction policy. The closed form moves
/// probability mass cell by cell; the Monte Carlo run samples (gold, pred,
/// verdict) triples and tallies the corrected confusion.
inline SimulationResult simulate_correction(const std::vector<double>& class_priors,
                                            const std::vector<std::vector<double>>& base_confusion,
                                            const VerifierProfile& profile, const CorrectionPolicy& policy,
                                            std::size_t n_monte_carlo, std::uint64_t seed)
{
    const auto& task = policy.task;
    const std::size_t k = task.size();
    if (class_priors.size() != k || base_confusion.size() != k)
        throw Error(ErrorKind::InvalidDistribution, "priors and confusion rows must match the task's label count");
    detail::check_distribution(class_priors, "class priors");
    for (std::size_t g = 0; g < k; ++g) {
        if (base_confusion[g].size() != k)
            throw Error(ErrorKind::InvalidDistribution, "confusion row " + std::to_string(g) + " has the wrong length");
        detail::check_distribution(base_confusion[g], "confusion row " + std::to_string(g));
    }
    profile.validate();

    std::vector<int> labels;
    std::vector<std::size_t> target(k);
    std::vector<bool> scoped(k);
    for (std::size_t i = 0; i < k; ++i) {
        labels.push_back(task.labels[i].id);
        scoped[i] = task.in_scope(task.labels[i].id);
        target[i] = scoped[i] ? task.index_of(correction_target(task.labels[i].id, task)) : i;
    }

    std::vector<std::vector<double>> base(k, std::vector<double>(k, 0.0));
    std::vector<std::vector<double>> after(k, std::vector<double>(k, 0.0));
    for (std::size_t g = 0; g < k; ++g)
        for (std::size_t p = 0; p < k; ++p) {
            const double mass = class_priors[g] * base_confusion[g][p];
            base[g][p] = mass;
            if (!scoped[p]) {
                after[g][p] += mass;
                continue;
            }
            const double p_false = g == p ? 1.0 - profile.p_true_given_correct : profile.p_false_given_incorrect;
            after[g][p] += mass * (1.0 - p_false);
            after[g][target[p]] += mass * p_false;
        }

    SimulationResult result;
    result.base = report_from_confusion(labels, base);
    result.expected = report_from_confusion(labels, after);

    if (n_monte_carlo > 0) {
        Rng rng(derive_seed(seed, "simulate_correction"));
        auto draw = [&](const std::vector<double>& dist) {
            const double u = rng.uniform();
            double acc = 0.0;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                acc += dist[i];
                if (u < acc)
                    return i;
            }
            // Rounding left u above the cumulative total; take the last nonzero cell.
            std::size_t last = dist.size() - 1;
            while (last > 0 && dist[last] == 0.0)
                --last;
            return last;
        };
        std::vector<std::vector<std::int64_t>> counts(k, std::vector<std::int64_t>(k, 0));
        for (std::size_t s = 0; s < n_monte_carlo; ++s) {
            const auto g = draw(class_priors);
            auto p = draw(base_confusion[g]);
            if (scoped[p]) {
                const double p_false = g == p ? 1.0 - profile.p_true_given_correct : profile.p_false_given_incorrect;
                if (rng.uniform() < p_false)
                    p = target[p];
            }
            ++counts[g][p];
        }
        result.empirical = report_from_confusion(labels, std::move(counts));
        double tr = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            result.f1_standard_error[labels[i]] = detail::f1_standard_error(after, i, n_monte_carlo);
            tr += after[i][i];
        }
        result.accuracy_standard_error = std::sqrt(tr * (1.0 - tr) / static_cast<double>(n_monte_carlo));
    }
    return result;
}

} // namespace alex
