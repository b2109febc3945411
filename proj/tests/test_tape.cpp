#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "asac/rng.hpp"
#include "asac/tape.hpp"

using namespace asac;

TEST_CASE("sigmoid of scalar zero is one half") {
    Tape tape;
    NodeId x = tape.constant(RealArray::scalar(0.0));
    CHECK(tape.value(tape.sigmoid(x)).data[0] == 0.5);
}

TEST_CASE("matmul with identity returns the vector") {
    Tape tape;
    NodeId id3 = tape.constant(RealArray::identity(3));
    NodeId v = tape.constant(RealArray::vec({1.0, 2.0, 3.0}));
    const RealArray& out = tape.value(tape.matmul(id3, v));
    CHECK(out.data == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("clamp pins values to the upper bound") {
    Tape tape;
    NodeId x = tape.constant(RealArray::scalar(1.5));
    double hi = 1.0 - 1e-6;
    CHECK(tape.value(tape.clamp(x, 1e-6, hi)).data[0] == hi);
}

TEST_CASE("backward of x squared") {
    Tape tape;
    NodeId x = tape.parameter(RealArray::scalar(3.0));
    auto grads = tape.backward(tape.square(x));
    CHECK(grads.at(x.index).data[0] == Catch::Approx(6.0));
}

TEST_CASE("backward of log(sigmoid(w)) at zero") {
    Tape tape;
    NodeId w = tape.parameter(RealArray::scalar(0.0));
    auto grads = tape.backward(tape.log(tape.sigmoid(w)));
    CHECK(grads.at(w.index).data[0] == Catch::Approx(0.5));
}

TEST_CASE("shape mismatch errors name the op and shapes") {
    Tape tape;
    NodeId a = tape.constant(RealArray::zeros({2, 3}));
    NodeId b = tape.constant(RealArray::zeros({2}));
    CHECK_THROWS_WITH(tape.add(a, b), Catch::Matchers::ContainsSubstring("add") &&
                                          Catch::Matchers::ContainsSubstring("(2,3)") &&
                                          Catch::Matchers::ContainsSubstring("(2)"));
    CHECK_THROWS_WITH(tape.matmul(a, a), Catch::Matchers::ContainsSubstring("matmul"));
}

TEST_CASE("backward requires a scalar output") {
    Tape tape;
    NodeId x = tape.parameter(RealArray::vec({1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(tape.negate(x)), Error);
}

TEST_CASE("backward leaves forward values untouched and is repeatable") {
    Tape tape;
    Rng rng(99);
    std::vector<double> vals(4);
    for (double& v : vals) v = rng.uniform(-2.0, 2.0);
    NodeId x = tape.parameter(RealArray::vec(vals));
    NodeId y = tape.sum(tape.square(tape.tanh(x)));

    std::vector<double> snapshot = tape.value(y).data;
    auto g1 = tape.backward(y);
    CHECK(tape.value(y).data == snapshot);
    CHECK(tape.value(x).data == vals);
    auto g2 = tape.backward(y);
    CHECK(g1.at(x.index).data == g2.at(x.index).data);
}

TEST_CASE("forward values are deterministic for identical inputs") {
    auto build = [](double seed) {
        Tape tape;
        NodeId a = tape.constant(RealArray::vec({seed, -0.3, 1.7}));
        NodeId w = tape.constant(RealArray::full({3, 3}, 0.25));
        NodeId out = tape.sum(tape.sigmoid(tape.matmul(w, tape.tanh(a))));
        return tape.value(out).data[0];
    };
    CHECK(build(0.4) == build(0.4));
}

TEST_CASE("random two-layer graph gradient matches finite differences") {
    Rng rng(1234);
    std::vector<double> w1(6), w2(3), x0(2);
    for (double& v : w1) v = rng.uniform(-1.0, 1.0);
    for (double& v : w2) v = rng.uniform(-1.0, 1.0);
    for (double& v : x0) v = rng.uniform(-1.0, 1.0);

    struct Built {
        Tape tape;
        NodeId w1n, w2n, out;
    };
    auto build = [&](const std::vector<double>& w1v, const std::vector<double>& w2v) {
        auto b = std::make_unique<Built>();
        b->w1n = b->tape.parameter(RealArray({3, 2}, std::vector<double>(w1v)));
        b->w2n = b->tape.parameter(RealArray({1, 3}, std::vector<double>(w2v)));
        NodeId x = b->tape.constant(RealArray::vec(std::vector<double>(x0)));
        NodeId h = b->tape.tanh(b->tape.matmul(b->w1n, x));
        b->out = b->tape.sum(b->tape.sigmoid(b->tape.matmul(b->w2n, h)));
        return b;
    };

    auto base = build(w1, w2);
    auto grads = base->tape.backward(base->out);

    const double h = 1e-5;
    auto value_at = [&]() {
        auto b = build(w1, w2);
        return b->tape.value(b->out).data[0];
    };
    auto check_block = [&](std::vector<double>& vec, NodeId node) {
        for (std::size_t j = 0; j < vec.size(); ++j) {
            double orig = vec[j];
            vec[j] = orig + h;
            double up = value_at();
            vec[j] = orig - h;
            double down = value_at();
            vec[j] = orig;
            double want = (up - down) / (2 * h);
            double got = grads.at(node.index).data[j];
            INFO("coordinate " << j << " got " << got << " want " << want);
            CHECK(std::abs(got - want) <= std::max(1e-6, 1e-4 * std::max(std::abs(got), std::abs(want))));
        }
    };
    check_block(w1, base->w1n);
    check_block(w2, base->w2n);
}

namespace {

using GraphBuilder = std::function<NodeId(Tape&, NodeId)>;

// Scalar objective sum(builder(x) .* weights) evaluated at v.
double eval_case(const GraphBuilder& build, const std::vector<double>& v, const std::vector<double>& weights) {
    Tape tape;
    NodeId x = tape.parameter(RealArray::vec(std::vector<double>(v)));
    NodeId node = build(tape, x);
    NodeId w = tape.constant(RealArray::vec(std::vector<double>(weights)));
    return tape.value(tape.sum(tape.mul(node, w))).data[0];
}

std::vector<double> grad_case(const GraphBuilder& build, const std::vector<double>& v,
                              const std::vector<double>& weights) {
    Tape tape;
    NodeId x = tape.parameter(RealArray::vec(std::vector<double>(v)));
    NodeId node = build(tape, x);
    NodeId w = tape.constant(RealArray::vec(std::vector<double>(weights)));
    auto grads = tape.backward(tape.sum(tape.mul(node, w)));
    return grads.at(x.index).data;
}

}  // namespace

TEST_CASE("every primitive op matches finite differences on random inputs", "[property]") {
    Rng rng(2024);
    const double h = 1e-5;
    const std::size_t d = 4;

    struct OpCase {
        const char* name;
        GraphBuilder build;
        std::size_t out_dim;
        bool positive_input;  // restrict samples to (0.1, 2) for log
    };

    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> yv(d), mat(d * d);
        for (double& v : yv) v = rng.uniform(-2.0, 2.0);
        for (double& v : mat) v = rng.uniform(-1.0, 1.0);

        std::vector<OpCase> cases = {
            {"sigmoid", [](Tape& t, NodeId x) { return t.sigmoid(x); }, d, false},
            {"tanh", [](Tape& t, NodeId x) { return t.tanh(x); }, d, false},
            {"negate", [](Tape& t, NodeId x) { return t.negate(x); }, d, false},
            {"square", [](Tape& t, NodeId x) { return t.square(x); }, d, false},
            {"softmax", [](Tape& t, NodeId x) { return t.softmax(x); }, d, false},
            {"log", [](Tape& t, NodeId x) { return t.log(x); }, d, true},
            {"slice", [](Tape& t, NodeId x) { return t.slice(x, 1, 2); }, 2, false},
            {"clamp", [](Tape& t, NodeId x) { return t.clamp(x, -1.5, 1.5); }, d, false},
            {"add",
             [&yv](Tape& t, NodeId x) { return t.add(x, t.constant(RealArray::vec(std::vector<double>(yv)))); },
             d, false},
            {"mul",
             [&yv](Tape& t, NodeId x) { return t.mul(x, t.constant(RealArray::vec(std::vector<double>(yv)))); },
             d, false},
            {"concat",
             [&yv](Tape& t, NodeId x) {
                 return t.concat(x, t.constant(RealArray::vec(std::vector<double>(yv))));
             },
             2 * d, false},
            {"matmul",
             [&mat, d](Tape& t, NodeId x) {
                 return t.matmul(t.constant(RealArray({d, d}, std::vector<double>(mat))), x);
             },
             d, false},
            {"sum_then_scale",
             [](Tape& t, NodeId x) { return t.sum(x); }, 1, false},
        };

        for (const auto& c : cases) {
            std::vector<double> v(d), weights(c.out_dim);
            for (double& e : v) e = c.positive_input ? rng.uniform(0.1, 2.0) : rng.uniform(-2.0, 2.0);
            for (double& e : weights) e = rng.uniform(-1.0, 1.0);
            if (std::string(c.name) == "clamp")
                for (double& e : v)
                    if (std::abs(std::abs(e) - 1.5) < 0.05) e += 0.1;  // keep off the kink

            std::vector<double> got = grad_case(c.build, v, weights);
            for (std::size_t j = 0; j < d; ++j) {
                double orig = v[j];
                v[j] = orig + h;
                double up = eval_case(c.build, v, weights);
                v[j] = orig - h;
                double down = eval_case(c.build, v, weights);
                v[j] = orig;
                double want = (up - down) / (2 * h);
                INFO(c.name << " coordinate " << j << ": got " << got[j] << " want " << want);
                CHECK(std::abs(got[j] - want) <=
                      std::max(1e-6, 1e-4 * std::max(std::abs(got[j]), std::abs(want))));
            }
        }
    }
}

TEST_CASE("matmul of two trainable matrices matches finite differences") {
    Rng rng(7);
    std::vector<double> a(6), b(6), w(4);
    for (double& v : a) v = rng.uniform(-2.0, 2.0);
    for (double& v : b) v = rng.uniform(-2.0, 2.0);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);

    auto value = [&](const std::vector<double>& av, const std::vector<double>& bv) {
        Tape tape;
        NodeId an = tape.parameter(RealArray({2, 3}, std::vector<double>(av)));
        NodeId bn = tape.parameter(RealArray({3, 2}, std::vector<double>(bv)));
        NodeId prod = tape.matmul(an, bn);
        NodeId wn = tape.constant(RealArray({2, 2}, std::vector<double>(w)));
        return tape.value(tape.sum(tape.mul(prod, wn))).data[0];
    };

    Tape tape;
    NodeId an = tape.parameter(RealArray({2, 3}, std::vector<double>(a)));
    NodeId bn = tape.parameter(RealArray({3, 2}, std::vector<double>(b)));
    NodeId prod = tape.matmul(an, bn);
    NodeId wn = tape.constant(RealArray({2, 2}, std::vector<double>(w)));
    auto grads = tape.backward(tape.sum(tape.mul(prod, wn)));

    const double h = 1e-5;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double orig = a[j];
        a[j] = orig + h;
        double up = value(a, b);
        a[j] = orig - h;
        double down = value(a, b);
        a[j] = orig;
        double want = (up - down) / (2 * h);
        CHECK(std::abs(grads.at(an.index).data[j] - want) <= 1e-5);
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        double orig = b[j];
        b[j] = orig + h;
        double up = value(a, b);
        b[j] = orig - h;
        double down = value(a, b);
        b[j] = orig;
        double want = (up - down) / (2 * h);
        CHECK(std::abs(grads.at(bn.index).data[j] - want) <= 1e-5);
    }
}
