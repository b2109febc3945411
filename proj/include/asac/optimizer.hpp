#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "asac/array.hpp"

namespace asac {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;    // first-moment decay
    double beta2 = 0.999;  // second-moment decay
    double epsilon = 1e-8;
};

/// Moment accumulators per parameter block plus the shared step counter.
struct OptimizerState {
    std::vector<RealArray> first_moment;
    std::vector<RealArray> second_moment;
    std::uint64_t step_count = 0;
};

using NamedParams = std::vector<std::pair<std::string, RealArray*>>;

/// Adam (bias-corrected) or plain SGD behind a single interface. Parameters are
/// passed as an ordered list of named blocks; state is allocated on first step
/// and shape-checked on every step after that.
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
        if (!(cfg.learning_rate > 0.0)) throw Error("optimizer: learning rate must be positive");
    }

    const OptimizerConfig& config() const { return cfg_; }
    const OptimizerState& state() const { return state_; }

    void step(const NamedParams& params, const std::vector<RealArray>& grads) {
        if (params.size() != grads.size())
            throw Error("optimizer: got " + std::to_string(grads.size()) + " gradient blocks for " +
                        std::to_string(params.size()) + " parameter blocks");
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (params[i].second->shape != grads[i].shape)
                throw Error("optimizer: gradient shape " + shape_str(grads[i].shape) +
                            " does not match parameter '" + params[i].first + "' " +
                            shape_str(params[i].second->shape));
            if (!all_finite(grads[i]))
                throw Error("optimizer: non-finite gradient for parameter '" + params[i].first + "'");
        }

        if (state_.first_moment.empty() && cfg_.kind == OptimizerKind::adam) {
            for (const auto& [name, p] : params) {
                (void)name;
                state_.first_moment.push_back(RealArray::zeros(p->shape));
                state_.second_moment.push_back(RealArray::zeros(p->shape));
            }
        }

        state_.step_count += 1;
        if (cfg_.kind == OptimizerKind::sgd) {
            for (std::size_t i = 0; i < params.size(); ++i) {
                RealArray& p = *params[i].second;
                for (std::size_t j = 0; j < p.size(); ++j)
                    p.data[j] -= cfg_.learning_rate * grads[i].data[j];
            }
            return;
        }

        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(state_.step_count));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(state_.step_count));
        for (std::size_t i = 0; i < params.size(); ++i) {
            RealArray& p = *params[i].second;
            RealArray& m = state_.first_moment[i];
            RealArray& v = state_.second_moment[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                double g = grads[i].data[j];
                m.data[j] = cfg_.beta1 * m.data[j] + (1.0 - cfg_.beta1) * g;
                v.data[j] = cfg_.beta2 * v.data[j] + (1.0 - cfg_.beta2) * g * g;
                double m_hat = m.data[j] / bc1;
                double v_hat = v.data[j] / bc2;
                p.data[j] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            }
        }
    }

private:
    OptimizerConfig cfg_;
    OptimizerState state_;
};

/// Scales the gradient blocks in place so their global L2 norm is at most
/// max_norm. max_norm <= 0 or +inf disables clipping. Returns the pre-clip norm.
inline double clip_global_norm(std::vector<RealArray>& grads, double max_norm) {
    double sq = 0.0;
    for (const RealArray& g : grads)
        for (double v : g.data) sq += v * v;
    double norm = std::sqrt(sq);
    if (max_norm <= 0.0 || !std::isfinite(max_norm) || norm <= max_norm) return norm;
    double scale = max_norm / norm;
    for (RealArray& g : grads)
        for (double& v : g.data) v *= scale;
    return norm;
}

}  // namespace asac
