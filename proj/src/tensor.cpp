#include "dmh/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace dmh {

const char* prim_name(Prim p) {
    switch (p) {
        case Prim::constant: return "constant";
        case Prim::parameter: return "parameter";
        case Prim::matmul: return "matmul";
        case Prim::add: return "add";
        case Prim::sub: return "sub";
        case Prim::mul_elementwise: return "mul_elementwise";
        case Prim::scale_by_constant: return "scale_by_constant";
        case Prim::relu: return "relu";
        case Prim::sigmoid: return "sigmoid";
        case Prim::log: return "log";
        case Prim::exp: return "exp";
        case Prim::softmax_over_axis: return "softmax_over_axis";
        case Prim::concat_over_axis: return "concat_over_axis";
        case Prim::sum_over_axis: return "sum_over_axis";
        case Prim::mean_over_axis: return "mean_over_axis";
        case Prim::transpose_2d: return "transpose_2d";
        case Prim::pass_through: return "pass_through";
    }
    return "?";
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

[[noreturn]] void shape_fail(Prim p, const TensorNode& a, const TensorNode& b) {
    throw ShapeError(std::string(prim_name(p)) + ": shapes " + shape_str(a.shape) +
                     " and " + shape_str(b.shape) + " do not conform");
}

[[noreturn]] void shape_fail(Prim p, const TensorNode& a, const std::string& why) {
    throw ShapeError(std::string(prim_name(p)) + ": shape " + shape_str(a.shape) + " " + why);
}

void require_rank2(Prim p, const TensorNode& a) {
    if (a.rank() != 2) shape_fail(p, a, "is not a matrix");
}

// C (+)= A * B with optional transposes, row-major dense. Loop orders are
// chosen per layout so the inner loop is contiguous; the accumulation order
// is fixed, which keeps results bit-reproducible.
void mm(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
        std::size_t k, bool ta, bool tb) {
    if (!ta && !tb) {
        // a: m x k, b: k x n
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            const double* arow = a + i * k;
            for (std::size_t l = 0; l < k; ++l) {
                const double av = arow[l];
                const double* brow = b + l * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!ta && tb) {
        // a: m x k, b: n x k
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = a + i * k;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double acc = 0.0;
                for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
                crow[j] += acc;
            }
        }
    } else if (ta && !tb) {
        // a: k x m, b: k x n
        for (std::size_t l = 0; l < k; ++l) {
            const double* arow = a + l * m;
            const double* brow = b + l * n;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = arow[i];
                double* crow = c + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        // a: k x m, b: n x k
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double acc = 0.0;
                for (std::size_t l = 0; l < k; ++l) acc += a[l * m + i] * brow[l];
                crow[j] += acc;
            }
        }
    }
}

NodePtr make_op_node(Prim op, std::vector<std::size_t> shape, std::vector<double> values,
                     std::vector<NodePtr> parents, const PrimAttrs& attrs) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->parents = std::move(parents);
    n->op = op;
    n->attrs = attrs;
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    return n;
}

// Slice bookkeeping for axis-wise ops on rank-1/2 tensors: iterate `outer`
// slices of length `len` with stride `stride` between consecutive elements
// of a slice and `step` between slice starts.
struct AxisView {
    std::size_t outer, len, stride, step;
};

AxisView axis_view(const TensorNode& x, std::size_t axis) {
    if (x.rank() == 1) return {1, x.shape[0], 1, 0};
    const std::size_t r = x.shape[0], c = x.shape[1];
    if (axis == 0) return {c, r, c, 1};  // slices run down a column
    return {r, c, 1, c};                 // slices run along a row
}

}  // namespace

NodePtr make_constant(std::vector<std::size_t> shape, std::vector<double> values) {
    if (shape_numel(shape) != values.size())
        throw ShapeError("constant: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->op = Prim::constant;
    return n;
}

NodePtr make_leaf(std::vector<std::size_t> shape, std::vector<double> values,
                  bool requires_grad, std::string name) {
    auto n = make_constant(std::move(shape), std::move(values));
    n->op = requires_grad ? Prim::parameter : Prim::constant;
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
}

NodePtr make_scalar(double v) { return make_constant({1}, {v}); }

NodePtr eval_primitive(Prim tag, const std::vector<NodePtr>& inputs, const PrimAttrs& attrs) {
    auto arity = [&](std::size_t n) {
        if (inputs.size() != n)
            throw ContractError(std::string(prim_name(tag)) + ": expected " +
                                std::to_string(n) + " inputs, got " +
                                std::to_string(inputs.size()));
    };

    switch (tag) {
        case Prim::constant:
        case Prim::parameter:
            throw ContractError("eval_primitive: leaves are built with make_leaf/make_constant");

        case Prim::matmul: {
            arity(2);
            const auto& a = *inputs[0];
            const auto& b = *inputs[1];
            require_rank2(tag, a);
            if (b.rank() == 2) {
                if (a.shape[1] != b.shape[0]) shape_fail(tag, a, b);
                const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
                std::vector<double> out(m * n, 0.0);
                mm(a.values.data(), b.values.data(), out.data(), m, n, k, false, false);
                return make_op_node(tag, {m, n}, std::move(out), inputs, attrs);
            }
            if (b.rank() == 1) {  // matrix-vector
                if (a.shape[1] != b.shape[0]) shape_fail(tag, a, b);
                const std::size_t m = a.shape[0], k = a.shape[1];
                std::vector<double> out(m, 0.0);
                for (std::size_t i = 0; i < m; ++i) {
                    const double* arow = a.values.data() + i * k;
                    double acc = 0.0;
                    for (std::size_t l = 0; l < k; ++l) acc += arow[l] * b.values[l];
                    out[i] = acc;
                }
                return make_op_node(tag, {m}, std::move(out), inputs, attrs);
            }
            shape_fail(tag, a, b);
        }

        case Prim::add:
        case Prim::sub:
        case Prim::mul_elementwise: {
            arity(2);
            const auto& a = *inputs[0];
            const auto& b = *inputs[1];
            if (a.shape != b.shape) shape_fail(tag, a, b);
            std::vector<double> out(a.numel());
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double x = a.values[i], y = b.values[i];
                out[i] = tag == Prim::add ? x + y : tag == Prim::sub ? x - y : x * y;
            }
            return make_op_node(tag, a.shape, std::move(out), inputs, attrs);
        }

        case Prim::scale_by_constant: {
            arity(1);
            const auto& a = *inputs[0];
            std::vector<double> out(a.numel());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values[i] * attrs.scale;
            return make_op_node(tag, a.shape, std::move(out), inputs, attrs);
        }

        case Prim::relu:
        case Prim::sigmoid:
        case Prim::log:
        case Prim::exp: {
            arity(1);
            const auto& a = *inputs[0];
            std::vector<double> out(a.numel());
            for (std::size_t i = 0; i < out.size(); ++i) {
                const double x = a.values[i];
                switch (tag) {
                    case Prim::relu: out[i] = x > 0.0 ? x : 0.0; break;
                    case Prim::sigmoid: out[i] = 1.0 / (1.0 + std::exp(-x)); break;
                    case Prim::log:
                        if (x <= 0.0)
                            throw DomainError("log: non-positive input " + std::to_string(x) +
                                              " at index " + std::to_string(i));
                        out[i] = std::log(x);
                        break;
                    default: out[i] = std::exp(x); break;
                }
            }
            return make_op_node(tag, a.shape, std::move(out), inputs, attrs);
        }

        case Prim::softmax_over_axis: {
            arity(1);
            const auto& a = *inputs[0];
            if (a.rank() == 0 || a.rank() > 2) shape_fail(tag, a, "is not rank 1 or 2");
            if (attrs.axis >= a.rank()) shape_fail(tag, a, "has no axis " + std::to_string(attrs.axis));
            const AxisView v = axis_view(a, attrs.axis);
            std::vector<double> out(a.numel());
            for (std::size_t s = 0; s < v.outer; ++s) {
                const std::size_t base = s * v.step;
                double mx = a.values[base];
                for (std::size_t i = 1; i < v.len; ++i)
                    mx = std::max(mx, a.values[base + i * v.stride]);
                double denom = 0.0;
                for (std::size_t i = 0; i < v.len; ++i) {
                    const double e = std::exp(a.values[base + i * v.stride] - mx);
                    out[base + i * v.stride] = e;
                    denom += e;
                }
                for (std::size_t i = 0; i < v.len; ++i) out[base + i * v.stride] /= denom;
            }
            return make_op_node(tag, a.shape, std::move(out), inputs, attrs);
        }

        case Prim::concat_over_axis: {
            if (inputs.empty()) throw ContractError("concat_over_axis: no inputs");
            const auto& first = *inputs[0];
            if (first.rank() == 1) {
                std::size_t total = 0;
                for (const auto& p : inputs) {
                    if (p->rank() != 1) shape_fail(tag, first, *p);
                    total += p->shape[0];
                }
                std::vector<double> out;
                out.reserve(total);
                for (const auto& p : inputs)
                    out.insert(out.end(), p->values.begin(), p->values.end());
                return make_op_node(tag, {total}, std::move(out), inputs, attrs);
            }
            require_rank2(tag, first);
            if (attrs.axis == 0) {  // stack blocks of rows
                const std::size_t c = first.shape[1];
                std::size_t rows = 0;
                for (const auto& p : inputs) {
                    if (p->rank() != 2 || p->shape[1] != c) shape_fail(tag, first, *p);
                    rows += p->shape[0];
                }
                std::vector<double> out;
                out.reserve(rows * c);
                for (const auto& p : inputs)
                    out.insert(out.end(), p->values.begin(), p->values.end());
                return make_op_node(tag, {rows, c}, std::move(out), inputs, attrs);
            }
            // axis == 1: blocks of columns
            const std::size_t r = first.shape[0];
            std::size_t cols = 0;
            for (const auto& p : inputs) {
                if (p->rank() != 2 || p->shape[0] != r) shape_fail(tag, first, *p);
                cols += p->shape[1];
            }
            std::vector<double> out(r * cols);
            std::size_t col0 = 0;
            for (const auto& p : inputs) {
                const std::size_t pc = p->shape[1];
                for (std::size_t i = 0; i < r; ++i)
                    std::copy_n(p->values.data() + i * pc, pc, out.data() + i * cols + col0);
                col0 += pc;
            }
            return make_op_node(tag, {r, cols}, std::move(out), inputs, attrs);
        }

        case Prim::sum_over_axis:
        case Prim::mean_over_axis: {
            arity(1);
            const auto& a = *inputs[0];
            if (a.rank() == 0 || a.rank() > 2) shape_fail(tag, a, "is not rank 1 or 2");
            if (attrs.axis >= a.rank()) shape_fail(tag, a, "has no axis " + std::to_string(attrs.axis));
            const AxisView v = axis_view(a, attrs.axis);
            std::vector<double> out(v.outer, 0.0);
            for (std::size_t s = 0; s < v.outer; ++s) {
                const std::size_t base = s * v.step;
                double acc = 0.0;
                for (std::size_t i = 0; i < v.len; ++i) acc += a.values[base + i * v.stride];
                out[s] = tag == Prim::mean_over_axis ? acc / static_cast<double>(v.len) : acc;
            }
            std::vector<std::size_t> shp;
            if (a.rank() == 1) {
                shp = attrs.keepdims ? std::vector<std::size_t>{1} : std::vector<std::size_t>{};
            } else if (attrs.keepdims) {
                shp = attrs.axis == 0 ? std::vector<std::size_t>{1, a.shape[1]}
                                      : std::vector<std::size_t>{a.shape[0], 1};
            } else {
                shp = {attrs.axis == 0 ? a.shape[1] : a.shape[0]};
            }
            return make_op_node(tag, std::move(shp), std::move(out), inputs, attrs);
        }

        case Prim::transpose_2d: {
            arity(1);
            const auto& a = *inputs[0];
            require_rank2(tag, a);
            const std::size_t r = a.shape[0], c = a.shape[1];
            std::vector<double> out(r * c);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values[i * c + j];
            return make_op_node(tag, {c, r}, std::move(out), inputs, attrs);
        }

        case Prim::pass_through: {
            arity(2);
            const auto& hard = *inputs[0];
            const auto& soft = *inputs[1];
            if (hard.shape != soft.shape) shape_fail(tag, hard, soft);
            auto n = make_op_node(tag, hard.shape, hard.values, inputs, attrs);
            n->requires_grad = soft.requires_grad;
            return n;
        }
    }
    throw ContractError("eval_primitive: unknown tag");
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) { return eval_primitive(Prim::matmul, {a, b}); }
NodePtr add(const NodePtr& a, const NodePtr& b) { return eval_primitive(Prim::add, {a, b}); }
NodePtr sub(const NodePtr& a, const NodePtr& b) { return eval_primitive(Prim::sub, {a, b}); }
NodePtr mul(const NodePtr& a, const NodePtr& b) {
    return eval_primitive(Prim::mul_elementwise, {a, b});
}
NodePtr scale(const NodePtr& a, double factor) {
    PrimAttrs at;
    at.scale = factor;
    return eval_primitive(Prim::scale_by_constant, {a}, at);
}
NodePtr relu(const NodePtr& a) { return eval_primitive(Prim::relu, {a}); }
NodePtr sigmoid(const NodePtr& a) { return eval_primitive(Prim::sigmoid, {a}); }
NodePtr log_node(const NodePtr& a) { return eval_primitive(Prim::log, {a}); }
NodePtr exp_node(const NodePtr& a) { return eval_primitive(Prim::exp, {a}); }
NodePtr softmax(const NodePtr& a, std::size_t axis) {
    PrimAttrs at;
    at.axis = axis;
    return eval_primitive(Prim::softmax_over_axis, {a}, at);
}
NodePtr concat(std::size_t axis, const std::vector<NodePtr>& parts) {
    PrimAttrs at;
    at.axis = axis;
    return eval_primitive(Prim::concat_over_axis, parts, at);
}
NodePtr sum_axis(const NodePtr& a, std::size_t axis, bool keepdims) {
    PrimAttrs at;
    at.axis = axis;
    at.keepdims = keepdims;
    return eval_primitive(Prim::sum_over_axis, {a}, at);
}
NodePtr mean_axis(const NodePtr& a, std::size_t axis, bool keepdims) {
    PrimAttrs at;
    at.axis = axis;
    at.keepdims = keepdims;
    return eval_primitive(Prim::mean_over_axis, {a}, at);
}
NodePtr transpose(const NodePtr& a) { return eval_primitive(Prim::transpose_2d, {a}); }
NodePtr pass_through(const NodePtr& hard, const NodePtr& soft) {
    return eval_primitive(Prim::pass_through, {hard, soft});
}

NodePtr sum_all(const NodePtr& a) {
    if (a->rank() <= 1) {
        if (a->rank() == 1 && a->shape[0] == 1) return a;
        if (a->rank() == 0) return sum_axis(a, 0, true);  // unreachable for valid ranks
        return sum_axis(a, 0, true);
    }
    return sum_axis(sum_axis(a, 0, false), 0, true);
}

namespace {

std::vector<TensorNode*> topo_order(const NodePtr& root) {
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    // Iterative post-order DFS; parent visit order is the recorded input
    // order, so the result is independent of pointer values.
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;
}

void vjp(TensorNode* n) {
    const std::vector<double>& g = n->grad;
    auto pgrad = [&](std::size_t i) -> std::vector<double>& {
        n->parents[i]->ensure_grad();
        return n->parents[i]->grad;
    };
    auto wants = [&](std::size_t i) { return n->parents[i]->requires_grad; };

    switch (n->op) {
        case Prim::constant:
        case Prim::parameter:
            return;

        case Prim::matmul: {
            const auto& a = *n->parents[0];
            const auto& b = *n->parents[1];
            if (b.rank() == 2) {
                const std::size_t m = a.shape[0], k = a.shape[1], c = b.shape[1];
                if (wants(0))  // dA += G * B^T
                    mm(g.data(), b.values.data(), pgrad(0).data(), m, k, c, false, true);
                if (wants(1))  // dB += A^T * G
                    mm(a.values.data(), g.data(), pgrad(1).data(), k, c, m, true, false);
            } else {
                const std::size_t m = a.shape[0], k = a.shape[1];
                if (wants(0)) {  // dA[i,l] += g[i] * b[l]
                    auto& da = pgrad(0);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double gi = g[i];
                        double* row = da.data() + i * k;
                        for (std::size_t l = 0; l < k; ++l) row[l] += gi * b.values[l];
                    }
                }
                if (wants(1)) {  // db[l] += sum_i A[i,l] g[i]
                    auto& db = pgrad(1);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double gi = g[i];
                        const double* row = a.values.data() + i * k;
                        for (std::size_t l = 0; l < k; ++l) db[l] += row[l] * gi;
                    }
                }
            }
            return;
        }

        case Prim::add:
        case Prim::sub: {
            const double sb = n->op == Prim::add ? 1.0 : -1.0;
            if (wants(0)) {
                auto& da = pgrad(0);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
            }
            if (wants(1)) {
                auto& db = pgrad(1);
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += sb * g[i];
            }
            return;
        }

        case Prim::mul_elementwise: {
            const auto& a = *n->parents[0];
            const auto& b = *n->parents[1];
            if (wants(0)) {
                auto& da = pgrad(0);
                for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b.values[i];
            }
            if (wants(1)) {
                auto& db = pgrad(1);
                for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a.values[i];
            }
            return;
        }

        case Prim::scale_by_constant: {
            if (!wants(0)) return;
            auto& da = pgrad(0);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * n->attrs.scale;
            return;
        }

        case Prim::relu: {
            if (!wants(0)) return;
            const auto& x = n->parents[0]->values;
            auto& da = pgrad(0);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x[i] > 0.0) da[i] += g[i];
            return;
        }

        case Prim::sigmoid: {
            if (!wants(0)) return;
            auto& da = pgrad(0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = n->values[i];
                da[i] += g[i] * y * (1.0 - y);
            }
            return;
        }

        case Prim::log: {
            if (!wants(0)) return;
            const auto& x = n->parents[0]->values;
            auto& da = pgrad(0);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] / x[i];
            return;
        }

        case Prim::exp: {
            if (!wants(0)) return;
            auto& da = pgrad(0);
            for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * n->values[i];
            return;
        }

        case Prim::softmax_over_axis: {
            if (!wants(0)) return;
            const AxisView v = axis_view(*n->parents[0], n->attrs.axis);
            auto& da = pgrad(0);
            for (std::size_t s = 0; s < v.outer; ++s) {
                const std::size_t base = s * v.step;
                double dot = 0.0;
                for (std::size_t i = 0; i < v.len; ++i) {
                    const std::size_t idx = base + i * v.stride;
                    dot += g[idx] * n->values[idx];
                }
                for (std::size_t i = 0; i < v.len; ++i) {
                    const std::size_t idx = base + i * v.stride;
                    da[idx] += n->values[idx] * (g[idx] - dot);
                }
            }
            return;
        }

        case Prim::concat_over_axis: {
            if (n->rank() == 1 || n->attrs.axis == 0) {
                std::size_t off = 0;
                for (std::size_t pi = 0; pi < n->parents.size(); ++pi) {
                    const std::size_t len = n->parents[pi]->numel();
                    if (wants(pi)) {
                        auto& dp = pgrad(pi);
                        for (std::size_t i = 0; i < len; ++i) dp[i] += g[off + i];
                    }
                    off += len;
                }
            } else {
                const std::size_t r = n->shape[0], cols = n->shape[1];
                std::size_t col0 = 0;
                for (std::size_t pi = 0; pi < n->parents.size(); ++pi) {
                    const std::size_t pc = n->parents[pi]->shape[1];
                    if (wants(pi)) {
                        auto& dp = pgrad(pi);
                        for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < pc; ++j)
                                dp[i * pc + j] += g[i * cols + col0 + j];
                    }
                    col0 += pc;
                }
            }
            return;
        }

        case Prim::sum_over_axis:
        case Prim::mean_over_axis: {
            if (!wants(0)) return;
            const AxisView v = axis_view(*n->parents[0], n->attrs.axis);
            const double f = n->op == Prim::mean_over_axis ? 1.0 / static_cast<double>(v.len) : 1.0;
            auto& da = pgrad(0);
            for (std::size_t s = 0; s < v.outer; ++s) {
                const double gs = g[s] * f;
                const std::size_t base = s * v.step;
                for (std::size_t i = 0; i < v.len; ++i) da[base + i * v.stride] += gs;
            }
            return;
        }

        case Prim::transpose_2d: {
            if (!wants(0)) return;
            const std::size_t r = n->shape[0], c = n->shape[1];  // output dims
            auto& da = pgrad(0);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) da[i + j * r] += g[i * c + j];
            return;
        }

        case Prim::pass_through: {
            if (!wants(1)) return;
            auto& ds = pgrad(1);
            for (std::size_t i = 0; i < g.size(); ++i) ds[i] += g[i];
            return;
        }
    }
}

void run_backward(const NodePtr& root, bool zero_leaves) {
    if (root->numel() != 1)
        throw ContractError("backward: root must be scalar, got shape " + shape_str(root->shape));
    auto order = topo_order(root);
    for (TensorNode* n : order) {
        if (n->is_leaf() && !zero_leaves) continue;
        n->grad.assign(n->values.size(), 0.0);
    }
    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (!n->requires_grad && n != root.get()) continue;
        if (n->grad.empty()) continue;
        vjp(n);
    }
}

}  // namespace

void backward(const NodePtr& root) { run_backward(root, true); }
void backward_accumulate(const NodePtr& root) { run_backward(root, false); }

}  // namespace dmh
