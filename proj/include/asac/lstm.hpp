#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "asac/optimizer.hpp"
#include "asac/rng.hpp"
#include "asac/sensing.hpp"
#include "asac/tape.hpp"

namespace asac {

enum class Task { regression, classification };
enum class InitScheme { zeros, uniform_scaled };

struct GateParams {
    RealArray w;  // input-to-gate, (hidden, input)
    RealArray u;  // hidden-to-gate, (hidden, hidden)
    RealArray b;  // (hidden)
};

/// One LSTM cell. The network input at each step is the concatenation
/// [observed values ; observation mask], so input_size = 2 * feature_dim.
struct LstmCellParams {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    GateParams input_gate, forget_gate, output_gate, candidate;
};

struct DenseLayer {
    RealArray w;
    RealArray b;
};

/// Maps the observation history to a label estimate through an LSTM state and
/// a dense head. Regression heads output one value; classification heads end
/// in a softmax over `classes`.
struct PredictorModel {
    std::size_t feature_dim = 0;
    Task task = Task::regression;
    std::size_t classes = 0;  // 0 for regression
    LstmCellParams cell;
    std::vector<DenseLayer> head;  // hidden layers use tanh; last layer is linear

    std::size_t output_dim() const { return task == Task::classification ? classes : 1; }
};

/// Maps the observation history to per-feature measurement probabilities via
/// an LSTM state and a dense head with an elementwise sigmoid, clamped into
/// [kProbClampLo, kProbClampHi].
struct SelectorModel {
    std::size_t feature_dim = 0;
    LstmCellParams cell;
    std::vector<DenseLayer> head;
};

/// Plain (h, c) state values used outside a tape.
struct LstmState {
    RealArray h;
    RealArray c;

    static LstmState zeros(std::size_t hidden) {
        return LstmState{RealArray::zeros({hidden}), RealArray::zeros({hidden})};
    }
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace detail {

inline RealArray init_matrix(std::size_t rows, std::size_t cols, InitScheme scheme, Rng& rng) {
    RealArray a = RealArray::zeros({rows, cols});
    if (scheme == InitScheme::uniform_scaled) {
        double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (double& v : a.data) v = rng.uniform(-limit, limit);
    }
    return a;
}

inline GateParams init_gate(std::size_t hidden, std::size_t input, InitScheme scheme, Rng& rng,
                            double bias_value) {
    GateParams g;
    g.w = init_matrix(hidden, input, scheme, rng);
    g.u = init_matrix(hidden, hidden, scheme, rng);
    g.b = RealArray::full({hidden}, scheme == InitScheme::zeros ? 0.0 : bias_value);
    return g;
}

inline LstmCellParams init_cell(std::size_t input, std::size_t hidden, InitScheme scheme, Rng& rng) {
    LstmCellParams cell;
    cell.input_size = input;
    cell.hidden_size = hidden;
    cell.input_gate = init_gate(hidden, input, scheme, rng, 0.0);
    // Forget bias starts at 1 so early training does not wipe the cell state.
    cell.forget_gate = init_gate(hidden, input, scheme, rng, 1.0);
    cell.output_gate = init_gate(hidden, input, scheme, rng, 0.0);
    cell.candidate = init_gate(hidden, input, scheme, rng, 0.0);
    return cell;
}

inline std::vector<DenseLayer> init_head(std::size_t in, std::size_t hidden, std::size_t out,
                                         InitScheme scheme, Rng& rng) {
    std::vector<DenseLayer> head;
    if (hidden > 0) {
        head.push_back({init_matrix(hidden, in, scheme, rng), RealArray::zeros({hidden})});
        in = hidden;
    }
    head.push_back({init_matrix(out, in, scheme, rng), RealArray::zeros({out})});
    return head;
}

}  // namespace detail

struct PredictorDims {
    std::size_t feature_dim = 0;
    std::size_t hidden = 32;
    std::size_t head_hidden = 0;  // 0 = single dense output layer
    Task task = Task::regression;
    std::size_t classes = 0;
};

struct SelectorDims {
    std::size_t feature_dim = 0;
    std::size_t hidden = 32;
    std::size_t head_hidden = 0;
};

inline PredictorModel make_predictor(const PredictorDims& dims, std::uint64_t seed,
                                     InitScheme scheme = InitScheme::uniform_scaled) {
    if (dims.feature_dim == 0 || dims.hidden == 0) throw Error("make_predictor: dimensions must be positive");
    if (dims.task == Task::classification && dims.classes < 2)
        throw Error("make_predictor: classification needs at least 2 classes");
    Rng rng(derive_seed(seed, 0x70726564u));
    PredictorModel m;
    m.feature_dim = dims.feature_dim;
    m.task = dims.task;
    m.classes = dims.task == Task::classification ? dims.classes : 0;
    m.cell = detail::init_cell(2 * dims.feature_dim, dims.hidden, scheme, rng);
    m.head = detail::init_head(dims.hidden, dims.head_hidden, m.output_dim(), scheme, rng);
    return m;
}

inline SelectorModel make_selector(const SelectorDims& dims, std::uint64_t seed,
                                   InitScheme scheme = InitScheme::uniform_scaled) {
    if (dims.feature_dim == 0 || dims.hidden == 0) throw Error("make_selector: dimensions must be positive");
    Rng rng(derive_seed(seed, 0x73656c65u));
    SelectorModel m;
    m.feature_dim = dims.feature_dim;
    m.cell = detail::init_cell(2 * dims.feature_dim, dims.hidden, scheme, rng);
    m.head = detail::init_head(dims.hidden, dims.head_hidden, dims.feature_dim, scheme, rng);
    return m;
}

// ---------------------------------------------------------------------------
// Parameter enumeration (checkpointing, optimizers, gradient extraction)
// ---------------------------------------------------------------------------

namespace detail {

template <typename Cell>
inline void collect_cell(Cell& cell, const std::string& prefix,
                         std::vector<std::pair<std::string, decltype(&cell.input_gate.w)>>& out) {
    auto gate = [&](auto& g, const char* name) {
        out.emplace_back(prefix + "." + name + ".w", &g.w);
        out.emplace_back(prefix + "." + name + ".u", &g.u);
        out.emplace_back(prefix + "." + name + ".b", &g.b);
    };
    gate(cell.input_gate, "input_gate");
    gate(cell.forget_gate, "forget_gate");
    gate(cell.output_gate, "output_gate");
    gate(cell.candidate, "candidate");
}

template <typename Model, typename Ptr>
inline void collect_model(Model& m, std::vector<std::pair<std::string, Ptr>>& out) {
    collect_cell(m.cell, "cell", out);
    for (std::size_t i = 0; i < m.head.size(); ++i) {
        std::string prefix = "head." + std::to_string(i);
        out.emplace_back(prefix + ".w", &m.head[i].w);
        out.emplace_back(prefix + ".b", &m.head[i].b);
    }
}

}  // namespace detail

inline NamedParams named_params(PredictorModel& m) {
    NamedParams out;
    detail::collect_model<PredictorModel, RealArray*>(m, out);
    return out;
}

inline NamedParams named_params(SelectorModel& m) {
    NamedParams out;
    detail::collect_model<SelectorModel, RealArray*>(m, out);
    return out;
}

inline std::vector<std::pair<std::string, const RealArray*>> named_params(const PredictorModel& m) {
    std::vector<std::pair<std::string, const RealArray*>> out;
    detail::collect_model<const PredictorModel, const RealArray*>(m, out);
    return out;
}

inline std::vector<std::pair<std::string, const RealArray*>> named_params(const SelectorModel& m) {
    std::vector<std::pair<std::string, const RealArray*>> out;
    detail::collect_model<const SelectorModel, const RealArray*>(m, out);
    return out;
}

// ---------------------------------------------------------------------------
// Tape forward passes
// ---------------------------------------------------------------------------

struct LstmStateNodes {
    NodeId h;
    NodeId c;
};

/// Parameter leaves for one model on one tape, in named_params order.
struct BoundModel {
    std::vector<NodeId> params;
    std::size_t hidden = 0;
};

namespace detail {

template <typename Model>
inline BoundModel bind(Tape& tape, const Model& m, bool trainable) {
    BoundModel bound;
    bound.hidden = m.cell.hidden_size;
    for (const auto& [name, arr] : named_params(m)) {
        (void)name;
        bound.params.push_back(trainable ? tape.parameter(*arr) : tape.constant(*arr));
    }
    return bound;
}

// named_params layout: 4 gates x (w, u, b), then head layers x (w, b).
inline NodeId gate_w(const BoundModel& b, std::size_t g) { return b.params[g * 3 + 0]; }
inline NodeId gate_u(const BoundModel& b, std::size_t g) { return b.params[g * 3 + 1]; }
inline NodeId gate_b(const BoundModel& b, std::size_t g) { return b.params[g * 3 + 2]; }
inline NodeId head_w(const BoundModel& b, std::size_t layer) { return b.params[12 + layer * 2 + 0]; }
inline NodeId head_b(const BoundModel& b, std::size_t layer) { return b.params[12 + layer * 2 + 1]; }

}  // namespace detail

inline BoundModel bind_predictor(Tape& tape, const PredictorModel& m, bool trainable) {
    return detail::bind(tape, m, trainable);
}
inline BoundModel bind_selector(Tape& tape, const SelectorModel& m, bool trainable) {
    return detail::bind(tape, m, trainable);
}

inline LstmStateNodes initial_state_nodes(Tape& tape, std::size_t hidden) {
    return {tape.constant(RealArray::zeros({hidden})), tape.constant(RealArray::zeros({hidden}))};
}

/// Encodes an observation as the network input [values ; mask].
inline NodeId observation_input(Tape& tape, const ObservedVector& obs) {
    std::vector<double> joined;
    joined.reserve(2 * obs.dim());
    joined.insert(joined.end(), obs.values.begin(), obs.values.end());
    for (auto m : obs.mask) joined.push_back(static_cast<double>(m));
    return tape.constant(RealArray::vec(std::move(joined)));
}

inline LstmStateNodes lstm_cell_step(Tape& tape, const BoundModel& bound, const LstmStateNodes& state,
                                     NodeId input) {
    auto affine = [&](std::size_t g) {
        NodeId wx = tape.matmul(detail::gate_w(bound, g), input);
        NodeId uh = tape.matmul(detail::gate_u(bound, g), state.h);
        return tape.add(tape.add(wx, uh), detail::gate_b(bound, g));
    };
    NodeId i = tape.sigmoid(affine(0));
    NodeId f = tape.sigmoid(affine(1));
    NodeId o = tape.sigmoid(affine(2));
    NodeId g = tape.tanh(affine(3));
    NodeId c = tape.add(tape.mul(f, state.c), tape.mul(i, g));
    NodeId h = tape.mul(o, tape.tanh(c));
    return {h, c};
}

inline NodeId head_forward(Tape& tape, const BoundModel& bound, std::size_t layers, NodeId x) {
    for (std::size_t l = 0; l < layers; ++l) {
        x = tape.add(tape.matmul(detail::head_w(bound, l), x), detail::head_b(bound, l));
        if (l + 1 < layers) x = tape.tanh(x);
    }
    return x;
}

/// Advances the predictor one step on the tape; returns the new state and the
/// model output (softmax probabilities for classification, one value for
/// regression).
inline std::pair<LstmStateNodes, NodeId> predictor_step_nodes(Tape& tape, const PredictorModel& m,
                                                              const BoundModel& bound,
                                                              const LstmStateNodes& state, NodeId input) {
    LstmStateNodes next = lstm_cell_step(tape, bound, state, input);
    NodeId out = head_forward(tape, bound, m.head.size(), next.h);
    if (m.task == Task::classification) out = tape.softmax(out);
    return {next, out};
}

/// Advances the selector one step on the tape; returns the new state and the
/// clamped per-feature probabilities.
inline std::pair<LstmStateNodes, NodeId> selector_step_nodes(Tape& tape, const SelectorModel& m,
                                                             const BoundModel& bound,
                                                             const LstmStateNodes& state, NodeId input) {
    LstmStateNodes next = lstm_cell_step(tape, bound, state, input);
    NodeId logits = head_forward(tape, bound, m.head.size(), next.h);
    NodeId probs = tape.clamp(tape.sigmoid(logits), kProbClampLo, kProbClampHi);
    return {next, probs};
}

// ---------------------------------------------------------------------------
// Plain-value steps (evaluation and rollouts outside an update)
// ---------------------------------------------------------------------------

struct PredictorStepResult {
    LstmState state;
    RealArray prediction;
};

struct SelectorStepResult {
    LstmState state;
    RealArray probs;
};

/// H_t = f(H_{t-1}, s_t, x(s_t)) followed by the dense head. The observation
/// must already carry sentinel zeros at unobserved slots.
inline PredictorStepResult predictor_step(const PredictorModel& m, const LstmState& state,
                                          const ObservedVector& obs) {
    if (obs.dim() != m.feature_dim) throw Error("predictor_step: observation dimension mismatch");
    Tape tape;
    BoundModel bound = bind_predictor(tape, m, false);
    LstmStateNodes st{tape.constant(state.h), tape.constant(state.c)};
    auto [next, out] = predictor_step_nodes(tape, m, bound, st, observation_input(tape, obs));
    return {LstmState{tape.value(next.h), tape.value(next.c)}, tape.value(out)};
}

inline SelectorStepResult selector_step(const SelectorModel& m, const LstmState& state,
                                        const ObservedVector& obs) {
    if (obs.dim() != m.feature_dim) throw Error("selector_step: observation dimension mismatch");
    Tape tape;
    BoundModel bound = bind_selector(tape, m, false);
    LstmStateNodes st{tape.constant(state.h), tape.constant(state.c)};
    auto [next, probs] = selector_step_nodes(tape, m, bound, st, observation_input(tape, obs));
    return {LstmState{tape.value(next.h), tape.value(next.c)}, tape.value(probs)};
}

// ---------------------------------------------------------------------------
// Prediction losses
// ---------------------------------------------------------------------------

/// Cross-entropy against an integer class label, or squared error for
/// regression.
inline double prediction_loss(const RealArray& prediction, double y, Task task) {
    if (task == Task::regression) {
        double diff = y - prediction.data[0];
        return diff * diff;
    }
    auto cls = static_cast<std::ptrdiff_t>(y);
    if (static_cast<double>(cls) != y || cls < 0 || cls >= static_cast<std::ptrdiff_t>(prediction.size()))
        throw Error("prediction_loss: label " + std::to_string(y) + " outside class range [0," +
                    std::to_string(prediction.size()) + ")");
    return -std::log(prediction.data[static_cast<std::size_t>(cls)]);
}

/// Tape form of the per-step loss.
inline NodeId prediction_loss_node(Tape& tape, NodeId prediction, double y, Task task) {
    if (task == Task::regression) {
        NodeId target = tape.constant(RealArray::scalar(y));
        NodeId diff = tape.add(prediction, tape.negate(target));
        return tape.sum(tape.square(diff));
    }
    std::size_t classes = tape.value(prediction).size();
    auto cls = static_cast<std::ptrdiff_t>(y);
    if (static_cast<double>(cls) != y || cls < 0 || cls >= static_cast<std::ptrdiff_t>(classes))
        throw Error("prediction_loss: label " + std::to_string(y) + " outside class range [0," +
                    std::to_string(classes) + ")");
    NodeId picked = tape.slice(prediction, static_cast<std::size_t>(cls), 1);
    return tape.sum(tape.negate(tape.log(picked)));
}

}  // namespace asac
