#include "dmh/fusion.hpp"

#include <cmath>

#include "dmh/init.hpp"

namespace dmh {

double FusionConfig::scale() const {
    return scale_mode == ScaleMode::HeadDim
               ? std::sqrt(static_cast<double>(u) / static_cast<double>(heads))
               : std::sqrt(static_cast<double>(heads));
}

void register_fusion_params(ParamStore& store, const FusionConfig& cfg, RngStream& rng) {
    cfg.validate();
    const std::size_t dk = cfg.u / cfg.heads;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const std::string hp = "fusion.head" + std::to_string(h) + ".";
        create_xavier(store, hp + "wq", dk, cfg.u, rng);
        create_xavier(store, hp + "wk", dk, cfg.d, rng);
        create_xavier(store, hp + "wv", dk, cfg.d, rng);
    }
    create_xavier(store, "fusion.ffn.win", cfg.u, cfg.u, rng);
    create_zeros(store, "fusion.ffn.bin", {cfg.u, 1});
    create_xavier(store, "fusion.ffn.wout", cfg.u, cfg.u, rng);
    create_zeros(store, "fusion.ffn.bout", {cfg.u, 1});
}

NodePtr cross_attention(const NodePtr& c, const NodePtr& v,
                        const std::vector<std::uint8_t>& mask, const ParamStore& params,
                        const FusionConfig& cfg, std::vector<NodePtr>* attentions) {
    cfg.validate();
    if (c->rank() != 2 || c->shape[0] != cfg.u)
        throw ShapeError("cross_attention: text matrix " + shape_str(c->shape) +
                         " does not match u=" + std::to_string(cfg.u));
    if (v->rank() != 2 || v->shape[1] != cfg.d)
        throw ShapeError("cross_attention: region matrix " + shape_str(v->shape) +
                         " does not match d=" + std::to_string(cfg.d));
    if (mask.size() != c->shape[1])
        throw ShapeError("cross_attention: mask length " + std::to_string(mask.size()) +
                         " vs " + std::to_string(c->shape[1]) + " text columns");

    const double inv_scale = 1.0 / cfg.scale();
    auto vt = transpose(v);  // d x N
    std::vector<NodePtr> head_outs;
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const std::string hp = "fusion.head" + std::to_string(h) + ".";
        NodePtr q, k, val;
        try {
            q = matmul(params.get(hp + "wq"), c);    // dk x M
            k = matmul(params.get(hp + "wk"), vt);   // dk x N
            val = matmul(params.get(hp + "wv"), vt);
        } catch (const Error& e) {
            throw ShapeError("cross_attention head " + std::to_string(h) + ": " + e.what());
        }
        auto att = softmax(scale(matmul(transpose(q), k), inv_scale), 1);  // M x N, rows sum to 1
        if (attentions) attentions->push_back(att);
        head_outs.push_back(matmul(val, transpose(att)));                  // dk x M
    }
    auto f = concat(0, head_outs);  // u x M
    auto ones_row = ones_matrix(1, f->shape[1]);
    auto inner = relu(add(matmul(params.get("fusion.ffn.win"), f),
                          matmul(params.get("fusion.ffn.bin"), ones_row)));
    auto g = add(matmul(params.get("fusion.ffn.wout"), inner),
                 matmul(params.get("fusion.ffn.bout"), ones_row));
    return add(f, g);
}

NodePtr pool(const NodePtr& v_tilde, const std::vector<std::uint8_t>& mask) {
    if (v_tilde->rank() != 2 || mask.size() != v_tilde->shape[1])
        throw ShapeError("pool: mask length " + std::to_string(mask.size()) +
                         " vs matrix " + shape_str(v_tilde->shape));
    bool any = false;
    std::vector<double> sel(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            sel[i] = 1.0;
            any = true;
        }
    }
    if (!any) throw ContractError("pool: mask excludes every column");
    return matmul(v_tilde, make_constant({mask.size()}, std::move(sel)));
}

}  // namespace dmh
