#pragma once

#include <cmath>
#include <string>

#include "dmh/param_store.hpp"
#include "dmh/rng.hpp"

namespace dmh {

// uniform in ±sqrt(6/(fan_in+fan_out)); rows are the output dimension
inline NodePtr create_xavier(ParamStore& store, const std::string& name, std::size_t rows,
                             std::size_t cols, RngStream& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(rows * cols);
    for (auto& x : v) x = rng.uniform(-limit, limit);
    return store.create(name, {rows, cols}, std::move(v));
}

inline NodePtr create_const(ParamStore& store, const std::string& name,
                            std::vector<std::size_t> shape, double fill) {
    return store.create(name, shape, std::vector<double>(shape_numel(shape), fill));
}

inline NodePtr create_zeros(ParamStore& store, const std::string& name,
                            std::vector<std::size_t> shape) {
    return create_const(store, name, std::move(shape), 0.0);
}

// all-ones constant (not a parameter) used to broadcast column/row vectors
inline NodePtr ones_matrix(std::size_t rows, std::size_t cols) {
    return make_constant({rows, cols}, std::vector<double>(rows * cols, 1.0));
}

}  // namespace dmh
