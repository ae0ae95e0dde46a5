#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dmh/gradcheck.hpp"
#include "dmh/param_store.hpp"
#include "dmh/rng.hpp"
#include "dmh/tensor.hpp"

using namespace dmh;

TEST_CASE("softmax forward matches closed forms") {
    auto a = softmax(make_constant({2}, {0.0, 0.0}), 0);
    CHECK(a->values[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a->values[1] == doctest::Approx(0.5).epsilon(1e-12));

    auto b = softmax(make_constant({2}, {std::log(2.0), 0.0}), 0);
    CHECK(std::fabs(b->values[0] - 2.0 / 3.0) < 1e-12);
    CHECK(std::fabs(b->values[1] - 1.0 / 3.0) < 1e-12);
}

TEST_CASE("softmax slices are positive and sum to one") {
    RngStream rng(11);
    std::vector<double> vals(12);
    for (auto& v : vals) v = rng.uniform(-30.0, 30.0);
    auto m = make_constant({3, 4}, vals);
    for (std::size_t axis : {std::size_t(0), std::size_t(1)}) {
        auto y = softmax(m, axis);
        for (double v : y->values) CHECK(v > 0.0);
        auto s = sum_axis(y, axis, false);
        for (double v : s->values) CHECK(std::fabs(v - 1.0) < 1e-12);
    }
}

TEST_CASE("matmul shape mismatch reports both shapes") {
    auto a = make_constant({2, 3}, std::vector<double>(6, 1.0));
    auto b = make_constant({4, 2}, std::vector<double>(8, 1.0));
    CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: shapes [2,3] and [4,2] do not conform",
                         ShapeError);
}

TEST_CASE("log rejects non-positive input") {
    auto a = make_constant({2}, {1.0, -0.5});
    CHECK_THROWS_AS(log_node(a), DomainError);
    auto z = make_constant({1}, {0.0});
    CHECK_THROWS_AS(log_node(z), DomainError);
}

TEST_CASE("backward requires a scalar root") {
    auto x = make_leaf({3}, {1.0, 2.0, 3.0}, true, "x");
    auto y = relu(x);
    CHECK_THROWS_AS(backward(y), ContractError);
}

TEST_CASE("sigmoid derivative at zero is 0.25") {
    auto x = make_leaf({1}, {0.0}, true, "x");
    auto y = sigmoid(x);
    backward(y);
    CHECK(y->grad[0] == 1.0);  // root seeded with one
    CHECK(x->grad[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("node consumed twice accumulates both paths") {
    auto x = make_leaf({1}, {3.0}, true, "x");
    auto y = mul(x, x);
    CHECK(y->values[0] == 9.0);
    backward(y);
    CHECK(x->grad[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("sum of softmax has vanishing gradient") {
    auto x = make_leaf({4}, {0.3, -1.2, 2.0, 0.0}, true, "x");
    auto y = sum_all(softmax(x, 0));
    backward(y);
    for (double g : x->grad) CHECK(std::fabs(g) < 1e-12);
}

TEST_CASE("backward is deterministic") {
    RngStream rng(5);
    std::vector<double> wv(12), xv(4);
    for (auto& v : wv) v = rng.uniform(-1.0, 1.0);
    for (auto& v : xv) v = rng.uniform(-1.0, 1.0);
    auto run = [&]() {
        auto w = make_leaf({3, 4}, wv, true, "w");
        auto x = make_leaf({4}, xv, true, "x");
        auto loss = sum_all(sigmoid(matmul(w, x)));
        backward(loss);
        auto g = w->grad;
        g.insert(g.end(), x->grad.begin(), x->grad.end());
        return g;
    };
    auto g1 = run();
    auto g2 = run();
    CHECK(g1 == g2);  // bit-identical
}

TEST_CASE("store backward zeroes unreachable parameters") {
    ParamStore store;
    auto x = store.create("x", {2}, {1.0, 2.0});
    auto unused = store.create("unused", {3}, {1.0, 1.0, 1.0});
    unused->grad.assign(3, 99.0);  // stale garbage
    auto loss = sum_all(mul(x, x));
    backward(loss, store);
    CHECK(x->grad[0] == doctest::Approx(2.0));
    CHECK(x->grad[1] == doctest::Approx(4.0));
    for (double g : unused->grad) CHECK(g == 0.0);
}

TEST_CASE("pass_through forwards hard and routes gradient to soft") {
    auto soft = make_leaf({3}, {0.2, 0.5, 0.3}, true, "soft");
    auto hard = make_constant({3}, {0.0, 1.0, 0.0});
    auto pt = pass_through(hard, soft);
    CHECK(pt->values == hard->values);
    auto w = make_constant({3}, {1.0, 2.0, 3.0});
    auto loss = sum_all(mul(pt, w));
    CHECK(loss->values[0] == doctest::Approx(2.0));
    backward(loss);
    CHECK(soft->grad[0] == doctest::Approx(1.0));
    CHECK(soft->grad[1] == doctest::Approx(2.0));
    CHECK(soft->grad[2] == doctest::Approx(3.0));
}

// --- finite-difference property checks -------------------------------------

namespace {

void fill_uniform(std::vector<double>& v, RngStream& rng, double lo = -1.0, double hi = 1.0) {
    for (auto& x : v) x = rng.uniform(lo, hi);
}

// weights the output so every element contributes a distinct gradient signal;
// the weights must be frozen outside the builder so FD rebuilds see the same graph
NodePtr weighted_sum(const NodePtr& out, const std::vector<double>& w) {
    return sum_all(mul(out, make_constant(out->shape, w)));
}

void check_fd(const char* what, const GraphBuilder& builder, ParamStore& store,
              double tol = 1e-4) {
    auto rep = grad_check(builder, store, RngStream(0), 1e-6, tol);
    INFO(what, ": worst rel err ", rep.worst, " at ", rep.worst_param);
    CHECK(rep.pass);
}

}  // namespace

TEST_CASE("every primitive matches central finite differences") {
    RngStream seed_rng(2024);

    auto unary_case = [&](const char* name, auto make_out, double lo, double hi) {
        ParamStore store;
        std::vector<double> xv(6);
        fill_uniform(xv, seed_rng, lo, hi);
        store.create("x", {2, 3}, xv);
        std::vector<double> w(make_out(store.get("x"))->numel());
        fill_uniform(w, seed_rng);
        check_fd(name, [&](ParamStore& s, RngStream) {
            return weighted_sum(make_out(s.get("x")), w);
        }, store);
    };

    unary_case("relu", [](const NodePtr& x) { return relu(x); }, -1.0, 1.0);
    unary_case("sigmoid", [](const NodePtr& x) { return sigmoid(x); }, -1.0, 1.0);
    unary_case("exp", [](const NodePtr& x) { return exp_node(x); }, -1.0, 1.0);
    unary_case("log", [](const NodePtr& x) { return log_node(x); }, 0.5, 1.5);
    unary_case("scale", [](const NodePtr& x) { return scale(x, -2.5); }, -1.0, 1.0);
    unary_case("transpose", [](const NodePtr& x) { return transpose(x); }, -1.0, 1.0);
    unary_case("softmax_ax0", [](const NodePtr& x) { return softmax(x, 0); }, -1.0, 1.0);
    unary_case("softmax_ax1", [](const NodePtr& x) { return softmax(x, 1); }, -1.0, 1.0);
    unary_case("sum_ax0", [](const NodePtr& x) { return sum_axis(x, 0, false); }, -1.0, 1.0);
    unary_case("sum_ax1_keep", [](const NodePtr& x) { return sum_axis(x, 1, true); }, -1.0, 1.0);
    unary_case("mean_ax0", [](const NodePtr& x) { return mean_axis(x, 0, false); }, -1.0, 1.0);
    unary_case("mean_ax1", [](const NodePtr& x) { return mean_axis(x, 1, false); }, -1.0, 1.0);

    auto binary_case = [&](const char* name, auto make_out, std::vector<std::size_t> sa,
                           std::vector<std::size_t> sb) {
        ParamStore store;
        std::vector<double> av(shape_numel(sa)), bv(shape_numel(sb));
        fill_uniform(av, seed_rng);
        fill_uniform(bv, seed_rng);
        store.create("a", sa, av);
        store.create("b", sb, bv);
        std::vector<double> w(make_out(store.get("a"), store.get("b"))->numel());
        fill_uniform(w, seed_rng);
        check_fd(name, [&](ParamStore& s, RngStream) {
            return weighted_sum(make_out(s.get("a"), s.get("b")), w);
        }, store);
    };

    auto mm2 = [](const NodePtr& a, const NodePtr& b) { return matmul(a, b); };
    binary_case("matmul_mm", mm2, {2, 3}, {3, 4});
    binary_case("matmul_mv", mm2, {3, 4}, {4});
    binary_case("add", [](const NodePtr& a, const NodePtr& b) { return add(a, b); }, {2, 3},
                {2, 3});
    binary_case("sub", [](const NodePtr& a, const NodePtr& b) { return sub(a, b); }, {2, 3},
                {2, 3});
    binary_case("mul", [](const NodePtr& a, const NodePtr& b) { return mul(a, b); }, {2, 3},
                {2, 3});
    binary_case("concat_ax0",
                [](const NodePtr& a, const NodePtr& b) { return concat(0, {a, b}); }, {2, 3},
                {1, 3});
    binary_case("concat_ax1",
                [](const NodePtr& a, const NodePtr& b) { return concat(1, {a, b}); }, {2, 2},
                {2, 3});
    binary_case("concat_vec",
                [](const NodePtr& a, const NodePtr& b) { return concat(0, {a, b}); }, {3}, {2});
    // pass_through is deliberately absent: its backward is defined to disagree
    // with finite differences (hard forward, soft backward)
}

TEST_CASE("grad_check passes on a quadratic form") {
    ParamStore store;
    store.create("v", {3}, {0.4, -0.2, 0.9});
    auto builder = [](ParamStore& s, RngStream) {
        const auto& v = s.get("v");
        auto q = make_constant({3, 3}, {2.0, 0.5, 0.0, 0.5, 1.0, -0.3, 0.0, -0.3, 3.0});
        auto col = matmul(q, v);
        return sum_all(mul(v, col));
    };
    auto rep = grad_check(builder, store, RngStream(0), 1e-6, 1e-4);
    CHECK(rep.pass);
    CHECK(rep.max_rel_err.at("v") <= 1e-4);
}

TEST_CASE("grad_check passes on binary cross-entropy of a logistic unit") {
    ParamStore store;
    store.create("w", {1, 4}, {0.3, -0.7, 0.2, 0.5});
    store.create("b", {1}, {0.1});
    auto builder = [](ParamStore& s, RngStream) {
        auto x = make_constant({4}, {0.8, -0.4, 0.6, -0.9});
        auto y = sigmoid(add(matmul(s.get("w"), x), s.get("b")));
        // label 1: loss = -log y
        return scale(log_node(y), -1.0);
    };
    auto rep = grad_check(builder, store, RngStream(0), 1e-6, 1e-4);
    CHECK(rep.pass);
}

TEST_CASE("grad_check on a constant reports zero error and passes") {
    ParamStore store;
    store.create("unused", {2}, {1.0, 2.0});
    auto builder = [](ParamStore&, RngStream) { return make_scalar(7.0); };
    auto rep = grad_check(builder, store, RngStream(0), 1e-6, 1e-4);
    CHECK(rep.pass);
    CHECK(rep.worst == 0.0);
}

TEST_CASE("backward_accumulate sums gradients across graphs") {
    ParamStore store;
    auto x = store.create("x", {1}, {2.0});
    store.zero_grads();
    backward_accumulate(mul(x, x));          // d/dx = 4
    backward_accumulate(scale(x, 3.0));      // d/dx = 3
    CHECK(x->grad[0] == doctest::Approx(7.0).epsilon(1e-12));
}

// --- rng stream contracts ---------------------------------------------------

TEST_CASE("rng streams are reproducible and well-ranged") {
    RngStream a(42), b(42), c(43);
    bool all_equal = true;
    for (int i = 0; i < 100; ++i)
        if (a.next_u64() != b.next_u64()) all_equal = false;
    CHECK(all_equal);
    CHECK(RngStream(42).next_u64() != c.next_u64());

    RngStream u(7);
    for (int i = 0; i < 10000; ++i) {
        double v = u.uniform01();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("derived rng streams are independent of parent position") {
    RngStream a(9);
    auto d1 = a.derive(1);
    a.next_u64();
    a.next_u64();
    auto d2 = a.derive(1);
    CHECK(d1.next_u64() == d2.next_u64());  // derivation depends on seed+salt only
    auto d3 = a.derive(2);
    CHECK(d2.next_u64() != d3.next_u64());
}

TEST_CASE("string hashing is stable") {
    CHECK(RngStream::hash_string("abc") == RngStream::hash_string("abc"));
    CHECK(RngStream::hash_string("abc") != RngStream::hash_string("abd"));
    CHECK(RngStream::hash_string("") != 0);
}
