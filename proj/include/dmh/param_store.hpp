#pragma once

#include <map>
#include <string>
#include <vector>

#include "dmh/error.hpp"
#include "dmh/tensor.hpp"

namespace dmh {

// Named trainable leaves. Iteration is by name (lexicographic), which keeps
// every walk over the parameters deterministic.
class ParamStore {
public:
    NodePtr create(const std::string& name, std::vector<std::size_t> shape,
                   std::vector<double> values) {
        if (params_.count(name)) throw ContractError("ParamStore: duplicate name " + name);
        auto n = make_leaf(std::move(shape), std::move(values), true, name);
        params_.emplace(name, n);
        return n;
    }

    const NodePtr& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ContractError("ParamStore: unknown name " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& [k, v] : params_) out.push_back(k);
        return out;
    }

    void zero_grads() {
        for (auto& [k, v] : params_) v->grad.assign(v->values.size(), 0.0);
    }

    std::size_t size() const { return params_.size(); }
    std::size_t total_values() const {
        std::size_t n = 0;
        for (const auto& [k, v] : params_) n += v->values.size();
        return n;
    }

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, NodePtr> params_;
};

// Backward over a graph rooted at a scalar, with the guarantee that every
// parameter in the store ends up with a grad buffer: reachable ones hold
// d(root)/d(param), unreachable ones hold zeros.
inline void backward(const NodePtr& root, ParamStore& store) {
    store.zero_grads();
    backward_accumulate(root);
}

}  // namespace dmh
