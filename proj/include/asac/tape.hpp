#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "asac/array.hpp"

namespace asac {

enum class OpKind : std::uint8_t {
    Leaf,
    MatMul,
    Add,
    Mul,
    Sigmoid,
    Tanh,
    Log,
    Negate,
    Sum,
    Concat,
    Slice,
    Clamp,
    Square,
    Softmax,
};

inline const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Mul: return "mul";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Tanh: return "tanh";
        case OpKind::Log: return "log";
        case OpKind::Negate: return "negate";
        case OpKind::Sum: return "sum";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::Clamp: return "clamp";
        case OpKind::Square: return "square";
        case OpKind::Softmax: return "softmax";
    }
    return "?";
}

struct NodeId {
    std::uint32_t index = 0;
};

/// Eager reverse-mode tape over dense arrays. Every op computes its value
/// immediately and appends one node; backward() replays the node list in
/// reverse, accumulating adjoints. A tape is single-threaded; independent
/// tapes may run on separate threads.
class Tape {
public:
    /// Trainable leaf: its gradient appears in the map returned by backward().
    NodeId parameter(RealArray value) { return leaf(std::move(value), true); }

    /// Non-trainable leaf (inputs, targets, fixed weights).
    NodeId constant(RealArray value) { return leaf(std::move(value), false); }

    const RealArray& value(NodeId id) const { return values_[check(id)]; }

    /// Adjoint of a node after backward(); zero-shaped gradients are materialized.
    const RealArray& adjoint(NodeId id) {
        std::uint32_t i = check(id);
        ensure_adjoint(i);
        return adjoints_[i];
    }

    std::size_t size() const { return nodes_.size(); }

    NodeId matmul(NodeId ia, NodeId ib) {
        const RealArray& a = value(ia);
        const RealArray& b = value(ib);
        if (!a.is_matrix()) shape_error("matmul", a, b);
        std::size_t m = a.shape[0], k = a.shape[1];
        RealArray out;
        if (b.is_vector()) {
            if (b.shape[0] != k) shape_error("matmul", a, b);
            out = RealArray::zeros({m});
            const double* ap = a.data.data();
            const double* bp = b.data.data();
            for (std::size_t r = 0; r < m; ++r) {
                double acc = 0.0;
                const double* row = ap + r * k;
                for (std::size_t j = 0; j < k; ++j) acc += row[j] * bp[j];
                out.data[r] = acc;
            }
        } else if (b.is_matrix()) {
            if (b.shape[0] != k) shape_error("matmul", a, b);
            std::size_t n = b.shape[1];
            out = RealArray::zeros({m, n});
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t j = 0; j < k; ++j) {
                    double av = a.data[r * k + j];
                    if (av == 0.0) continue;
                    for (std::size_t c = 0; c < n; ++c) out.data[r * n + c] += av * b.data[j * n + c];
                }
        } else {
            shape_error("matmul", a, b);
        }
        return push(OpKind::MatMul, ia, ib, std::move(out));
    }

    NodeId add(NodeId ia, NodeId ib) {
        const RealArray& a = value(ia);
        const RealArray& b = value(ib);
        if (!same_shape(a, b)) shape_error("add", a, b);
        RealArray out = a;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
        return push(OpKind::Add, ia, ib, std::move(out));
    }

    NodeId mul(NodeId ia, NodeId ib) {
        const RealArray& a = value(ia);
        const RealArray& b = value(ib);
        if (!same_shape(a, b)) shape_error("mul", a, b);
        RealArray out = a;
        for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
        return push(OpKind::Mul, ia, ib, std::move(out));
    }

    NodeId sigmoid(NodeId ix) {
        RealArray out = value(ix);
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
        return push(OpKind::Sigmoid, ix, kNone, std::move(out));
    }

    NodeId tanh(NodeId ix) {
        RealArray out = value(ix);
        for (double& v : out.data) v = std::tanh(v);
        return push(OpKind::Tanh, ix, kNone, std::move(out));
    }

    NodeId log(NodeId ix) {
        RealArray out = value(ix);
        for (double& v : out.data) v = std::log(v);
        return push(OpKind::Log, ix, kNone, std::move(out));
    }

    NodeId negate(NodeId ix) {
        RealArray out = value(ix);
        for (double& v : out.data) v = -v;
        return push(OpKind::Negate, ix, kNone, std::move(out));
    }

    NodeId square(NodeId ix) {
        RealArray out = value(ix);
        for (double& v : out.data) v = v * v;
        return push(OpKind::Square, ix, kNone, std::move(out));
    }

    NodeId sum(NodeId ix) {
        const RealArray& x = value(ix);
        double acc = 0.0;
        for (double v : x.data) acc += v;
        return push(OpKind::Sum, ix, kNone, RealArray::scalar(acc));
    }

    NodeId softmax(NodeId ix) {
        const RealArray& x = value(ix);
        if (!x.is_vector()) throw Error(std::string("softmax: expected vector, got ") + shape_str(x.shape));
        RealArray out = x;
        double mx = *std::max_element(out.data.begin(), out.data.end());
        double total = 0.0;
        for (double& v : out.data) {
            v = std::exp(v - mx);
            total += v;
        }
        for (double& v : out.data) v /= total;
        return push(OpKind::Softmax, ix, kNone, std::move(out));
    }

    NodeId concat(NodeId ia, NodeId ib) {
        const RealArray& a = value(ia);
        const RealArray& b = value(ib);
        if (!a.is_vector() || !b.is_vector()) shape_error("concat", a, b);
        RealArray out = RealArray::zeros({a.size() + b.size()});
        std::copy(a.data.begin(), a.data.end(), out.data.begin());
        std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
        return push(OpKind::Concat, ia, ib, std::move(out));
    }

    NodeId slice(NodeId ix, std::size_t offset, std::size_t length) {
        const RealArray& x = value(ix);
        if (!x.is_vector() || offset + length > x.size())
            throw Error("slice: range [" + std::to_string(offset) + "," + std::to_string(offset + length) +
                        ") out of bounds for " + shape_str(x.shape));
        RealArray out = RealArray::zeros({length});
        std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(offset),
                  x.data.begin() + static_cast<std::ptrdiff_t>(offset + length), out.data.begin());
        NodeId id = push(OpKind::Slice, ix, kNone, std::move(out));
        nodes_.back().offset = offset;
        nodes_.back().length = length;
        return id;
    }

    NodeId clamp(NodeId ix, double lo, double hi) {
        if (!(lo <= hi)) throw Error("clamp: lo > hi");
        RealArray out = value(ix);
        for (double& v : out.data) v = std::min(hi, std::max(lo, v));
        NodeId id = push(OpKind::Clamp, ix, kNone, std::move(out));
        nodes_.back().lo = lo;
        nodes_.back().hi = hi;
        return id;
    }

    /// Reverse sweep from a scalar output. Returns the gradient of the output
    /// with respect to every parameter leaf, keyed by the leaf's node index.
    /// Stored forward values are left untouched; the sweep can be repeated.
    std::unordered_map<std::uint32_t, RealArray> backward(NodeId output) {
        std::uint32_t out = check(output);
        if (!values_[out].is_scalar())
            throw Error("backward: output must be scalar, got " + shape_str(values_[out].shape));

        adjoints_.assign(nodes_.size(), RealArray{});
        ensure_adjoint(out);
        adjoints_[out].data[0] = 1.0;

        for (std::uint32_t i = static_cast<std::uint32_t>(nodes_.size()); i-- > 0;) {
            const Node& nd = nodes_[i];
            if (nd.kind == OpKind::Leaf || !nd.needs_grad) continue;
            if (adjoints_[i].data.empty()) continue;  // no flow reached this node
            propagate(i, nd);
        }

        std::unordered_map<std::uint32_t, RealArray> grads;
        for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].kind == OpKind::Leaf && nodes_[i].needs_grad) {
                ensure_adjoint(i);
                grads.emplace(i, adjoints_[i]);
            }
        }
        return grads;
    }

private:
    static constexpr std::uint32_t kNoneIndex = 0xffffffffu;
    static constexpr NodeId kNone{kNoneIndex};

    struct Node {
        OpKind kind = OpKind::Leaf;
        std::uint32_t a = kNoneIndex;
        std::uint32_t b = kNoneIndex;
        std::size_t offset = 0;  // slice
        std::size_t length = 0;  // slice
        double lo = 0.0;         // clamp
        double hi = 0.0;         // clamp
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    std::vector<RealArray> values_;
    std::vector<RealArray> adjoints_;

    std::uint32_t check(NodeId id) const {
        if (id.index >= nodes_.size()) throw Error("tape: node reference out of range");
        return id.index;
    }

    NodeId leaf(RealArray value, bool trainable) {
        require_finite(value, "tape leaf");
        Node nd;
        nd.kind = OpKind::Leaf;
        nd.needs_grad = trainable;
        nodes_.push_back(nd);
        values_.push_back(std::move(value));
        return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    NodeId push(OpKind kind, NodeId a, NodeId b, RealArray out) {
        Node nd;
        nd.kind = kind;
        nd.a = a.index;
        nd.b = b.index;
        nd.needs_grad = needs_grad(a) || (b.index != kNoneIndex && needs_grad(b));
        nodes_.push_back(nd);
        values_.push_back(std::move(out));
        return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    bool needs_grad(NodeId id) const { return id.index != kNoneIndex && nodes_[id.index].needs_grad; }

    void ensure_adjoint(std::uint32_t i) {
        if (adjoints_.size() != nodes_.size()) adjoints_.resize(nodes_.size());
        if (adjoints_[i].data.empty()) adjoints_[i] = RealArray::zeros(values_[i].shape);
    }

    // Adds into the adjoint of node `i` via the callback, allocating on first touch.
    RealArray* grad_sink(std::uint32_t i) {
        if (i == kNoneIndex || !nodes_[i].needs_grad) return nullptr;
        ensure_adjoint(i);
        return &adjoints_[i];
    }

    [[noreturn]] void shape_error(const char* op, const RealArray& a, const RealArray& b) const {
        throw Error(std::string(op) + ": incompatible shapes " + shape_str(a.shape) + " and " +
                    shape_str(b.shape));
    }

    void propagate(std::uint32_t i, const Node& nd) {
        const RealArray& dy = adjoints_[i];
        const RealArray& y = values_[i];
        RealArray* da = grad_sink(nd.a);
        RealArray* db = nd.b == kNoneIndex ? nullptr : grad_sink(nd.b);

        switch (nd.kind) {
            case OpKind::MatMul: {
                const RealArray& a = values_[nd.a];
                const RealArray& b = values_[nd.b];
                std::size_t m = a.shape[0], k = a.shape[1];
                if (b.is_vector()) {
                    // y(m) = A(m,k) x(k):  dA += dy ⊗ x,  dx += Aᵀ dy
                    if (da)
                        for (std::size_t r = 0; r < m; ++r) {
                            double g = dy.data[r];
                            if (g == 0.0) continue;
                            for (std::size_t j = 0; j < k; ++j) da->data[r * k + j] += g * b.data[j];
                        }
                    if (db)
                        for (std::size_t r = 0; r < m; ++r) {
                            double g = dy.data[r];
                            if (g == 0.0) continue;
                            for (std::size_t j = 0; j < k; ++j) db->data[j] += a.data[r * k + j] * g;
                        }
                } else {
                    std::size_t n = b.shape[1];
                    // dA += dY Bᵀ,  dB += Aᵀ dY
                    if (da)
                        for (std::size_t r = 0; r < m; ++r)
                            for (std::size_t j = 0; j < k; ++j) {
                                double acc = 0.0;
                                for (std::size_t c = 0; c < n; ++c)
                                    acc += dy.data[r * n + c] * b.data[j * n + c];
                                da->data[r * k + j] += acc;
                            }
                    if (db)
                        for (std::size_t j = 0; j < k; ++j)
                            for (std::size_t c = 0; c < n; ++c) {
                                double acc = 0.0;
                                for (std::size_t r = 0; r < m; ++r)
                                    acc += a.data[r * k + j] * dy.data[r * n + c];
                                db->data[j * n + c] += acc;
                            }
                }
                break;
            }
            case OpKind::Add:
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j) da->data[j] += dy.data[j];
                if (db)
                    for (std::size_t j = 0; j < dy.size(); ++j) db->data[j] += dy.data[j];
                break;
            case OpKind::Mul: {
                const RealArray& a = values_[nd.a];
                const RealArray& b = values_[nd.b];
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j) da->data[j] += dy.data[j] * b.data[j];
                if (db)
                    for (std::size_t j = 0; j < dy.size(); ++j) db->data[j] += dy.data[j] * a.data[j];
                break;
            }
            case OpKind::Sigmoid:
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j)
                        da->data[j] += dy.data[j] * y.data[j] * (1.0 - y.data[j]);
                break;
            case OpKind::Tanh:
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j)
                        da->data[j] += dy.data[j] * (1.0 - y.data[j] * y.data[j]);
                break;
            case OpKind::Log: {
                const RealArray& a = values_[nd.a];
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j) da->data[j] += dy.data[j] / a.data[j];
                break;
            }
            case OpKind::Negate:
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j) da->data[j] -= dy.data[j];
                break;
            case OpKind::Square: {
                const RealArray& a = values_[nd.a];
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j)
                        da->data[j] += 2.0 * a.data[j] * dy.data[j];
                break;
            }
            case OpKind::Sum:
                if (da) {
                    double g = dy.data[0];
                    for (std::size_t j = 0; j < da->size(); ++j) da->data[j] += g;
                }
                break;
            case OpKind::Softmax:
                if (da) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < dy.size(); ++j) dot += dy.data[j] * y.data[j];
                    for (std::size_t j = 0; j < dy.size(); ++j)
                        da->data[j] += y.data[j] * (dy.data[j] - dot);
                }
                break;
            case OpKind::Concat: {
                std::size_t na = values_[nd.a].size();
                if (da)
                    for (std::size_t j = 0; j < na; ++j) da->data[j] += dy.data[j];
                if (db)
                    for (std::size_t j = 0; j < db->size(); ++j) db->data[j] += dy.data[na + j];
                break;
            }
            case OpKind::Slice:
                if (da)
                    for (std::size_t j = 0; j < nd.length; ++j) da->data[nd.offset + j] += dy.data[j];
                break;
            case OpKind::Clamp: {
                // Subgradient: pass-through on the identity region, zero outside.
                const RealArray& a = values_[nd.a];
                if (da)
                    for (std::size_t j = 0; j < dy.size(); ++j)
                        if (a.data[j] >= nd.lo && a.data[j] <= nd.hi) da->data[j] += dy.data[j];
                break;
            }
            case OpKind::Leaf:
                break;
        }
    }
};

}  // namespace asac
