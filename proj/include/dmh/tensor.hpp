#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "dmh/error.hpp"

namespace dmh {

// Differentiable primitives. Every node in a computation graph is either a
// leaf (constant / parameter) or the result of one of these operations.
enum class Prim {
    constant,
    parameter,
    matmul,
    add,
    sub,
    mul_elementwise,
    scale_by_constant,
    relu,
    sigmoid,
    log,
    exp,
    softmax_over_axis,
    concat_over_axis,
    sum_over_axis,
    mean_over_axis,
    transpose_2d,
    // Forward value comes from the first input, gradients flow unchanged to
    // the second. Used for straight-through estimators and value clamps.
    pass_through,
};

const char* prim_name(Prim p);

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// Optional primitive attributes (axis for reductions/softmax/concat,
// scalar factor for scale_by_constant).
struct PrimAttrs {
    std::size_t axis = 0;
    bool keepdims = false;
    double scale = 1.0;
};

// One value in a reverse-mode computation graph. Shapes are rank 0 (scalar),
// 1 (vector) or 2 (matrix, row-major). Values are computed eagerly at node
// construction and are immutable afterwards; only backward writes grad.
struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // same length as values once backward has run
    std::vector<NodePtr> parents;
    Prim op = Prim::constant;
    bool requires_grad = false;
    PrimAttrs attrs;
    std::string name;  // parameters only

    std::size_t numel() const { return values.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    bool is_leaf() const { return parents.empty(); }
    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Leaf constructors.
NodePtr make_constant(std::vector<std::size_t> shape, std::vector<double> values);
NodePtr make_leaf(std::vector<std::size_t> shape, std::vector<double> values,
                  bool requires_grad, std::string name = "");
NodePtr make_scalar(double v);  // shape {1} constant

// Applies one primitive, checking shapes and computing the forward value.
// Throws ShapeError on non-conforming inputs, DomainError for log of a
// non-positive value.
NodePtr eval_primitive(Prim tag, const std::vector<NodePtr>& inputs,
                       const PrimAttrs& attrs = {});

// Convenience wrappers around eval_primitive.
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr scale(const NodePtr& a, double factor);
NodePtr relu(const NodePtr& a);
NodePtr sigmoid(const NodePtr& a);
NodePtr log_node(const NodePtr& a);
NodePtr exp_node(const NodePtr& a);
NodePtr softmax(const NodePtr& a, std::size_t axis);
NodePtr concat(std::size_t axis, const std::vector<NodePtr>& parts);
NodePtr sum_axis(const NodePtr& a, std::size_t axis, bool keepdims = false);
NodePtr mean_axis(const NodePtr& a, std::size_t axis, bool keepdims = false);
NodePtr transpose(const NodePtr& a);
NodePtr pass_through(const NodePtr& hard, const NodePtr& soft);

// Sums every entry down to a {1} scalar.
NodePtr sum_all(const NodePtr& a);

// Reverse-mode sweep from a scalar root. Zeroes the grad of every node
// reachable from root, then accumulates droot/dnode into each reachable
// requires_grad node. Throws ContractError if root is not scalar.
void backward(const NodePtr& root);

// Same sweep but leaf grads are not cleared first: contributions add to
// whatever is already there. Used to sum gradients over a batch where the
// same parameter leaves appear in many per-sample graphs.
void backward_accumulate(const NodePtr& root);

}  // namespace dmh
