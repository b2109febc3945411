#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "asac/sensing.hpp"

namespace asac {

/// Root mean squared error pooled over all (episode, step) cells.
inline double rmse(std::span<const SensingTrajectory> trajectories) {
    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& traj : trajectories)
        for (const auto& step : traj.steps) {
            double diff = step.label - step.prediction[0];
            sq += diff * diff;
            ++n;
        }
    if (n == 0) throw Error("rmse: no predictions");
    return std::sqrt(sq / static_cast<double>(n));
}

/// Rank-based AUROC (Mann-Whitney with average ranks for ties).
inline double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size() || scores.empty()) throw Error("auroc: bad input lengths");
    std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks i+1..j+1
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }

    std::size_t pos = 0;
    double pos_rank_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (labels[k]) {
            ++pos;
            pos_rank_sum += rank[k];
        }
    std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw Error("auroc: labels contain a single class");
    double u = pos_rank_sum - 0.5 * static_cast<double>(pos) * static_cast<double>(pos + 1);
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Area under the precision-recall curve (average precision: precision at
/// each recall increment, descending score order, score ties grouped).
inline double auprc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size() || scores.empty()) throw Error("auprc: bad input lengths");
    std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::size_t total_pos = 0;
    for (auto l : labels) total_pos += l;
    if (total_pos == 0 || total_pos == n) throw Error("auprc: labels contain a single class");

    double ap = 0.0;
    std::size_t tp = 0, seen = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        std::size_t group_pos = labels[order[i]] ? 1u : 0u;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) {
            ++j;
            group_pos += labels[order[j]] ? 1u : 0u;
        }
        tp += group_pos;
        seen = j + 1;
        double precision = static_cast<double>(tp) / static_cast<double>(seen);
        ap += precision * (static_cast<double>(group_pos) / static_cast<double>(total_pos));
        i = j + 1;
    }
    return ap;
}

/// Per-feature fraction of (episode, step) cells measured, restricted to
/// steps whose label satisfies the predicate when one is given.
inline std::vector<double> measurement_rates(std::span<const SensingTrajectory> trajectories,
                                             const std::function<bool(double)>* label_filter = nullptr) {
    if (trajectories.empty()) throw Error("measurement_rates: no trajectories");
    std::size_t d = trajectories.front().steps.empty() ? 0 : trajectories.front().steps.front().decision.dim();
    std::vector<double> counts(d, 0.0);
    std::size_t cells = 0;
    for (const auto& traj : trajectories)
        for (const auto& step : traj.steps) {
            if (label_filter && !(*label_filter)(step.label)) continue;
            for (std::size_t i = 0; i < d; ++i) counts[i] += step.decision.bits[i];
            ++cells;
        }
    if (cells == 0) throw Error("measurement_rates: no steps satisfy the label predicate");
    for (double& c : counts) c /= static_cast<double>(cells);
    return counts;
}

/// Pools classification scores (probability of class 1) and binary labels.
inline void pool_binary(std::span<const SensingTrajectory> trajectories, std::vector<double>& scores,
                        std::vector<std::uint8_t>& labels) {
    scores.clear();
    labels.clear();
    for (const auto& traj : trajectories)
        for (const auto& step : traj.steps) {
            scores.push_back(step.prediction.size() > 1 ? step.prediction[1] : step.prediction[0]);
            labels.push_back(step.label == 1.0 ? 1 : 0);
        }
}

}  // namespace asac
