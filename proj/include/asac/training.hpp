#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "asac/lstm.hpp"
#include "asac/optimizer.hpp"
#include "asac/parallel.hpp"
#include "asac/rng.hpp"
#include "asac/sensing.hpp"

namespace asac {

enum class SensingMode { time_series, static_mode };
enum class BaselineKind { none, moving_average };

inline SensingMode sensing_mode_from_string(const std::string& s) {
    if (s == "time-series") return SensingMode::time_series;
    if (s == "static") return SensingMode::static_mode;
    throw ConfigError("mode must be 'time-series' or 'static', got '" + s + "'");
}

struct TrainingConfig {
    double lambda = 0.0;         // cost trade-off; stamped into the working cost model
    double alpha = 1e-3;         // selector learning rate
    double beta = 1e-3;          // predictor learning rate
    std::size_t batch_size = 32; // n_mb
    std::size_t iterations = 1;
    std::size_t samples_per_decision = 1;  // rollouts per episode per mini-batch
    SensingMode mode = SensingMode::time_series;
    BaselineKind baseline = BaselineKind::none;
    double baseline_decay = 0.99;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;  // selector gradient clip; <= 0 disables
    std::size_t warmup_iterations = 0;  // predictor-only iterations before selector updates start
    OptimizerKind optimizer = OptimizerKind::adam;
    std::size_t threads = 1;  // worker threads for batch rollouts/gradients; 0 = auto

    void validate() const {
        if (batch_size < 1) throw ConfigError("training: batch size must be >= 1");
        if (iterations < 1) throw ConfigError("training: iteration count must be >= 1");
        if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("training: learning rates must be positive");
        if (!(lambda >= 0.0)) throw ConfigError("training: lambda must be nonnegative");
        if (samples_per_decision < 1) throw ConfigError("training: samples per decision must be >= 1");
    }
};

struct TrainingHistoryRow {
    std::size_t iteration = 0;       // 1-based
    double predictor_loss = 0.0;     // mean per-step loss over the batch
    double selector_objective = 0.0; // mean per-step loss + cost
    double measurement_rate = 0.0;   // fraction of (step, feature) cells selected
};

struct TrainingHistory {
    std::vector<TrainingHistoryRow> rows;
};

// ---------------------------------------------------------------------------
// Rollout
// ---------------------------------------------------------------------------

/// How decisions are drawn from the selector's probabilities. Training always
/// samples; evaluation may instead threshold at a fixed level.
struct DecisionRule {
    bool threshold = false;
    double level = 0.5;
};

/// Plays one episode: at each step the selector (fed the previous observation)
/// emits probabilities, a decision is sampled, the observation is assembled
/// under the configured mode (delays, static nesting, source-data
/// availability) and the predictor scores it. All quantities needed by the
/// two updates are recorded.
inline SensingTrajectory rollout(const SelectorModel& selector, const PredictorModel& predictor,
                                 const Episode& episode, const CostModel& cost_model, SensingMode mode,
                                 Rng& rng, const DecisionRule& rule = {}) {
    std::size_t d = episode.dim();
    std::size_t T = episode.length();
    if (selector.feature_dim != d || predictor.feature_dim != d)
        throw Error("rollout: model dimensioned for different feature count than episode");
    cost_model.validate(d);
    if (mode == SensingMode::static_mode && cost_model.has_delays())
        throw ConfigError("rollout: measurement delays are not defined in static mode");

    Tape tape;
    BoundModel sel = bind_selector(tape, selector, false);
    BoundModel pred = bind_predictor(tape, predictor, false);
    LstmStateNodes sel_state = initial_state_nodes(tape, sel.hidden);
    LstmStateNodes pred_state = initial_state_nodes(tape, pred.hidden);

    SensingTrajectory traj;
    traj.steps.resize(T);

    // The first decision conditions on nothing: zero state, all-sentinel input.
    NodeId sel_input = observation_input(tape, ObservedVector::unobserved(d));

    std::vector<SensingDecision> decisions;  // effective decisions, for delayed masking
    decisions.reserve(T);
    SensingDecision cumulative = SensingDecision::zeros(d);  // static mode
    ObservedVector persisted = ObservedVector::unobserved(d);

    for (std::size_t t = 0; t < T; ++t) {
        TrajectoryStep& step = traj.steps[t];

        auto [next_sel, probs_node] = selector_step_nodes(tape, selector, sel, sel_state, sel_input);
        sel_state = next_sel;
        step.probs = tape.value(probs_node).data;

        if (rule.threshold) {
            step.sampled = SensingDecision::zeros(d);
            for (std::size_t i = 0; i < d; ++i) step.sampled.bits[i] = step.probs[i] >= rule.level ? 1 : 0;
        } else {
            step.sampled = sample_decision(step.probs, rng);
        }
        if (mode == SensingMode::static_mode) {
            SensingDecision merged = enforce_static_nesting(cumulative, step.sampled);
            step.decision = merged;
            // Cost and missing bookkeeping apply to newly measured features only.
            SensingDecision fresh = SensingDecision::zeros(d);
            for (std::size_t i = 0; i < d; ++i) fresh.bits[i] = merged.bits[i] & ~cumulative.bits[i];
            step.missing_at_order.assign(d, 0);
            for (std::size_t i = 0; i < d; ++i)
                if (fresh.bits[i] && !episode.availability[t][i]) step.missing_at_order[i] = 1;
            step.cost = step_cost(fresh, cost_model, episode.labels[t], &step.missing_at_order);

            // A feature joins the persistent observation at its first available
            // measurement and keeps that value for the rest of the episode.
            for (std::size_t i = 0; i < d; ++i) {
                if (fresh.bits[i] && episode.availability[t][i]) {
                    persisted.values[i] = episode.features[t][i];
                    persisted.mask[i] = 1;
                }
            }
            // Only successfully measured features stay in the cumulative set, so
            // an unavailable one can be retried (and charged) later.
            for (std::size_t i = 0; i < d; ++i) cumulative.bits[i] = persisted.mask[i];
            step.observed = persisted;
            step.observed.missing = step.missing_at_order;
            decisions.push_back(step.decision);
        } else {
            step.decision = step.sampled;
            decisions.push_back(step.decision);
            step.missing_at_order.assign(d, 0);
            for (std::size_t i = 0; i < d; ++i)
                if (step.decision.bits[i] && !episode.availability[t][i]) step.missing_at_order[i] = 1;
            step.cost = step_cost(step.decision, cost_model, episode.labels[t], &step.missing_at_order);
            step.observed = apply_delayed_mask(
                std::vector<std::vector<double>>(episode.features.begin(), episode.features.begin() + t + 1),
                decisions, cost_model.delay, &episode.availability);
        }

        NodeId pred_input = observation_input(tape, step.observed);
        auto [next_pred, out_node] = predictor_step_nodes(tape, predictor, pred, pred_state, pred_input);
        pred_state = next_pred;
        step.prediction = tape.value(out_node).data;
        step.label = episode.labels[t];
        step.loss = prediction_loss(tape.value(out_node), step.label, predictor.task);

        sel_input = observation_input(tape, step.observed);
    }
    return traj;
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<RealArray> extract_grads(Tape& tape, const BoundModel& bound, NodeId output) {
    auto map = tape.backward(output);
    std::vector<RealArray> grads;
    grads.reserve(bound.params.size());
    for (NodeId id : bound.params) grads.push_back(map.at(id.index));
    return grads;
}

inline void accumulate(std::vector<RealArray>& into, const std::vector<RealArray>& grads) {
    if (into.empty()) {
        into = grads;
        return;
    }
    for (std::size_t i = 0; i < into.size(); ++i)
        for (std::size_t j = 0; j < into[i].size(); ++j) into[i].data[j] += grads[i].data[j];
}

inline void scale(std::vector<RealArray>& grads, double factor) {
    for (RealArray& g : grads)
        for (double& v : g.data) v *= factor;
}

}  // namespace detail

/// Gradient of the summed per-step prediction loss for one trajectory,
/// holding the recorded decisions and observations fixed. Returns gradients in
/// named_params order together with the loss sum.
inline std::pair<std::vector<RealArray>, double> predictor_gradient(const PredictorModel& predictor,
                                                                    const SensingTrajectory& traj) {
    Tape tape;
    BoundModel bound = bind_predictor(tape, predictor, true);
    LstmStateNodes state = initial_state_nodes(tape, bound.hidden);
    NodeId total = tape.constant(RealArray::scalar(0.0));
    for (const TrajectoryStep& step : traj.steps) {
        auto [next, out] = predictor_step_nodes(tape, predictor, bound, state, observation_input(tape, step.observed));
        state = next;
        total = tape.add(total, prediction_loss_node(tape, out, step.label, predictor.task));
    }
    double loss_sum = tape.value(total).data[0];
    return {detail::extract_grads(tape, bound, total), loss_sum};
}

/// Reward-to-come at each step: G_j = sum_{t >= j} (loss_t + cost_t). Costs
/// recorded by rollout() already carry lambda and the label multiplier.
inline std::vector<double> reward_to_come(const SensingTrajectory& traj) {
    std::vector<double> g(traj.length(), 0.0);
    double acc = 0.0;
    for (std::size_t j = traj.length(); j-- > 0;) {
        acc += traj.steps[j].loss + traj.steps[j].cost;
        g[j] = acc;
    }
    return g;
}

/// One sample of the score-function estimator for one trajectory: the gradient
/// of sum_j (G_j - baseline) * log pi(s_j | s_<j). Selected-but-missing
/// coordinates are excluded from each step's log-probability, so their values
/// never back-propagate. No clipping, no averaging.
inline std::vector<RealArray> selector_gradient(const SelectorModel& selector, const SensingTrajectory& traj,
                                                double baseline = 0.0) {
    std::size_t d = selector.feature_dim;
    Tape tape;
    BoundModel bound = bind_selector(tape, selector, true);
    LstmStateNodes state = initial_state_nodes(tape, bound.hidden);
    NodeId input = observation_input(tape, ObservedVector::unobserved(d));

    std::vector<double> weights = reward_to_come(traj);
    NodeId surrogate = tape.constant(RealArray::scalar(0.0));
    for (std::size_t j = 0; j < traj.length(); ++j) {
        auto [next, probs] = selector_step_nodes(tape, selector, bound, state, input);
        state = next;
        std::vector<std::uint8_t> include(d, 1);
        for (std::size_t i = 0; i < d; ++i)
            if (traj.steps[j].missing_at_order[i]) include[i] = 0;
        NodeId logp = decision_log_prob(tape, probs, traj.steps[j].sampled, &include);
        NodeId weighted = tape.mul(tape.constant(RealArray::scalar(weights[j] - baseline)), logp);
        surrogate = tape.add(surrogate, weighted);
        input = observation_input(tape, traj.steps[j].observed);
    }
    return detail::extract_grads(tape, bound, surrogate);
}

// ---------------------------------------------------------------------------
// Updates
// ---------------------------------------------------------------------------

/// One optimizer step on the batch-mean, time-summed prediction loss. Returns
/// the mean per-step loss for history.
inline double predictor_update(PredictorModel& predictor, std::span<const SensingTrajectory> batch,
                               Optimizer& opt, std::size_t threads = 1) {
    if (batch.empty()) throw Error("predictor_update: empty batch");
    std::vector<std::vector<RealArray>> grads(batch.size());
    std::vector<double> losses(batch.size(), 0.0);
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        auto [g, loss] = predictor_gradient(predictor, batch[i]);
        grads[i] = std::move(g);
        losses[i] = loss;
    });

    std::vector<RealArray> total;
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        detail::accumulate(total, grads[i]);
        loss_sum += losses[i];
        steps += batch[i].length();
    }
    detail::scale(total, 1.0 / static_cast<double>(batch.size()));

    NamedParams params = named_params(predictor);
    opt.step(params, total);
    return loss_sum / static_cast<double>(steps);
}

/// Scalar moving average of observed reward-to-come values, shared across
/// steps and episodes.
struct BaselineState {
    double value = 0.0;
    bool initialized = false;
    double decay = 0.99;

    void observe(double g) {
        if (!initialized) {
            value = g;
            initialized = true;
        } else {
            value = decay * value + (1.0 - decay) * g;
        }
    }
};

/// One optimizer step on the policy-gradient estimator, batch-averaged,
/// optionally baseline-centered and norm-clipped.
inline void selector_update(SelectorModel& selector, std::span<const SensingTrajectory> batch,
                            Optimizer& opt, const TrainingConfig& config, BaselineState* baseline) {
    if (batch.empty()) throw Error("selector_update: empty batch");
    double b = 0.0;
    if (config.baseline == BaselineKind::moving_average && baseline && baseline->initialized)
        b = baseline->value;

    std::vector<std::vector<RealArray>> grads(batch.size());
    parallel_for(batch.size(), config.threads, [&](std::size_t i) {
        grads[i] = selector_gradient(selector, batch[i], b);
    });

    std::vector<RealArray> total;
    for (std::size_t i = 0; i < batch.size(); ++i) detail::accumulate(total, grads[i]);
    detail::scale(total, 1.0 / static_cast<double>(batch.size()));
    for (const RealArray& g : total) require_finite(g, "selector_update gradient");
    clip_global_norm(total, config.clip_norm);

    NamedParams params = named_params(selector);
    opt.step(params, total);

    if (config.baseline == BaselineKind::moving_average && baseline) {
        for (const SensingTrajectory& traj : batch)
            for (double g : reward_to_come(traj)) baseline->observe(g);
    }
}

// ---------------------------------------------------------------------------
// Joint training
// ---------------------------------------------------------------------------

struct ModelSpec {
    std::size_t predictor_hidden = 32;
    std::size_t selector_hidden = 32;
    std::size_t head_hidden = 0;
    Task task = Task::regression;
    std::size_t classes = 0;
    InitScheme scheme = InitScheme::uniform_scaled;
};

struct JointTrainResult {
    SelectorModel selector;
    PredictorModel predictor;
    TrainingHistory history;
};

using IterationCallback =
    std::function<void(std::size_t iteration, const SelectorModel&, const PredictorModel&, const TrainingHistoryRow&)>;

namespace detail {

inline std::vector<std::size_t> sample_batch(std::size_t dataset_size, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> idx;
    idx.reserve(batch);
    if (batch >= dataset_size) {
        for (std::size_t i = 0; i < dataset_size; ++i) idx.push_back(i);
        while (idx.size() < batch) idx.push_back(rng.index(dataset_size));
        return idx;
    }
    // Partial Fisher-Yates over an index vector.
    std::vector<std::size_t> pool(dataset_size);
    for (std::size_t i = 0; i < dataset_size; ++i) pool[i] = i;
    for (std::size_t i = 0; i < batch; ++i) {
        std::size_t j = i + rng.index(dataset_size - i);
        std::swap(pool[i], pool[j]);
        idx.push_back(pool[i]);
    }
    return idx;
}

struct BatchRollouts {
    std::vector<SensingTrajectory> trajectories;
    double mean_loss = 0.0;
    double mean_objective = 0.0;
    double measurement_rate = 0.0;
};

inline BatchRollouts roll_batch(const SelectorModel& selector, const PredictorModel& predictor,
                                std::span<const Episode> dataset, const std::vector<std::size_t>& idx,
                                const CostModel& cm, const TrainingConfig& cfg, std::uint64_t salt,
                                std::size_t iteration) {
    std::size_t reps = cfg.samples_per_decision;
    BatchRollouts out;
    out.trajectories.resize(idx.size() * reps);
    parallel_for(out.trajectories.size(), cfg.threads, [&](std::size_t k) {
        std::size_t e = k / reps, r = k % reps;
        Rng rng(derive_seed(cfg.seed ^ salt, iteration, idx[e], r));
        out.trajectories[k] = rollout(selector, predictor, dataset[idx[e]], cm, cfg.mode, rng);
    });

    std::size_t cells = 0, selected = 0, steps = 0;
    double loss = 0.0, objective = 0.0;
    for (const auto& traj : out.trajectories)
        for (const auto& step : traj.steps) {
            loss += step.loss;
            objective += step.loss + step.cost;
            selected += step.decision.count();
            cells += step.decision.dim();
            ++steps;
        }
    out.mean_loss = loss / static_cast<double>(steps);
    out.mean_objective = objective / static_cast<double>(steps);
    out.measurement_rate = static_cast<double>(selected) / static_cast<double>(cells);
    return out;
}

}  // namespace detail

/// Alternates one predictor step and one selector step per iteration, each on
/// a freshly sampled mini-batch with fresh rollouts, so the selector always
/// scores against the just-updated predictor.
inline JointTrainResult joint_train(std::span<const Episode> dataset, const ModelSpec& spec,
                                    const CostModel& cost_model, const TrainingConfig& config,
                                    const IterationCallback* callback = nullptr) {
    config.validate();
    if (dataset.empty()) throw Error("joint_train: dataset is empty");
    std::size_t d = dataset.front().dim();
    for (const Episode& e : dataset) {
        e.validate();
        if (e.dim() != d) throw Error("joint_train: episodes disagree on feature count");
    }

    CostModel cm = cost_model;
    cm.lambda = config.lambda;
    cm.validate(d);

    JointTrainResult result;
    result.predictor = make_predictor(
        {d, spec.predictor_hidden, spec.head_hidden, spec.task, spec.classes}, derive_seed(config.seed, 11),
        spec.scheme);
    result.selector =
        make_selector({d, spec.selector_hidden, spec.head_hidden}, derive_seed(config.seed, 13), spec.scheme);

    Optimizer pred_opt({config.optimizer, config.beta});
    Optimizer sel_opt({config.optimizer, config.alpha});
    BaselineState baseline;
    baseline.decay = config.baseline_decay;
    Rng batch_rng(derive_seed(config.seed, 17));

    for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
        auto idx_a = detail::sample_batch(dataset.size(), config.batch_size, batch_rng);
        auto batch_a = detail::roll_batch(result.selector, result.predictor, dataset, idx_a, cm, config,
                                          0x61u, iter);
        double pred_loss = predictor_update(result.predictor, batch_a.trajectories, pred_opt, config.threads);

        auto idx_b = detail::sample_batch(dataset.size(), config.batch_size, batch_rng);
        auto batch_b = detail::roll_batch(result.selector, result.predictor, dataset, idx_b, cm, config,
                                          0x62u, iter);
        if (iter > config.warmup_iterations)
            selector_update(result.selector, batch_b.trajectories, sel_opt, config, &baseline);

        TrainingHistoryRow row;
        row.iteration = iter;
        row.predictor_loss = pred_loss;
        row.selector_objective = batch_b.mean_objective;
        row.measurement_rate = batch_b.measurement_rate;
        result.history.rows.push_back(row);
        if (callback) (*callback)(iter, result.selector, result.predictor, row);
    }
    return result;
}

}  // namespace asac
