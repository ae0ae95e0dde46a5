#pragma once

#include <cstdint>
#include <vector>

#include "dmh/param_store.hpp"
#include "dmh/rng.hpp"
#include "dmh/tensor.hpp"

namespace dmh {

enum class ScaleMode {
    HeadDim,    // sqrt(u / heads) — standard dot-product scaling
    HeadCount,  // sqrt(heads) — literal form kept for auditability
};

struct FusionConfig {
    std::size_t heads = 2;
    std::size_t u = 64;   // text dim
    std::size_t d = 16;   // region feature dim
    ScaleMode scale_mode = ScaleMode::HeadDim;

    void validate() const {
        if (heads == 0 || u == 0 || d == 0)
            throw ContractError("FusionConfig: all dims must be >= 1");
        if (u % heads != 0)
            throw ContractError("FusionConfig: u (" + std::to_string(u) +
                                ") not divisible by heads (" + std::to_string(heads) + ")");
    }

    double scale() const;
};

void register_fusion_params(ParamStore& store, const FusionConfig& cfg, RngStream& rng);

// Text-guided multi-head attention over region features with a residual
// feed-forward refinement. Each text column queries the N regions; softmax
// runs over the region axis. `v` is the N x d region matrix as a graph node.
// When `attentions` is given it receives the per-head M x N weight matrices.
NodePtr cross_attention(const NodePtr& c, const NodePtr& v,
                        const std::vector<std::uint8_t>& mask, const ParamStore& params,
                        const FusionConfig& cfg, std::vector<NodePtr>* attentions = nullptr);

// sum of the columns at mask=1 positions
NodePtr pool(const NodePtr& v_tilde, const std::vector<std::uint8_t>& mask);

}  // namespace dmh
