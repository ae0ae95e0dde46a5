#include "dmh/text_encoder.hpp"

#include <cmath>

#include "dmh/init.hpp"

namespace dmh {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kMaskPenalty = -1e9;

std::string layer_prefix(std::size_t l) { return "encoder.layer" + std::to_string(l) + "."; }

// column-wise layer norm with learned gain/shift ({u,1} each)
NodePtr layer_norm(const NodePtr& x, const NodePtr& gamma, const NodePtr& beta) {
    const std::size_t u = x->shape[0], m = x->shape[1];
    auto bcast_row = [&](const NodePtr& row) { return matmul(ones_matrix(u, 1), row); };
    auto mu = mean_axis(x, 0, true);                       // 1 x m
    auto xc = sub(x, bcast_row(mu));
    auto var = mean_axis(mul(xc, xc), 0, true);            // 1 x m
    auto eps = make_constant({1, m}, std::vector<double>(m, kLnEps));
    auto inv_std = exp_node(scale(log_node(add(var, eps)), -0.5));
    auto xn = mul(xc, bcast_row(inv_std));
    auto ones_row = ones_matrix(1, m);
    return add(mul(matmul(gamma, ones_row), xn), matmul(beta, ones_row));
}

}  // namespace

void register_text_encoder_params(ParamStore& store, const TextEncoderConfig& cfg,
                                  RngStream& rng) {
    cfg.validate();
    create_xavier(store, "encoder.embed", cfg.u, cfg.vocab_size, rng);  // column per token id
    create_xavier(store, "encoder.pos", cfg.u, kSeqLen, rng);
    const std::size_t dk = cfg.u / cfg.heads;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = layer_prefix(l);
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const std::string hp = p + "head" + std::to_string(h) + ".";
            create_xavier(store, hp + "wq", dk, cfg.u, rng);
            create_xavier(store, hp + "wk", dk, cfg.u, rng);
            create_xavier(store, hp + "wv", dk, cfg.u, rng);
        }
        create_xavier(store, p + "wo", cfg.u, cfg.u, rng);
        create_const(store, p + "ln1.gamma", {cfg.u, 1}, 1.0);
        create_zeros(store, p + "ln1.beta", {cfg.u, 1});
        create_xavier(store, p + "ffn.win", cfg.u, cfg.u, rng);
        create_zeros(store, p + "ffn.bin", {cfg.u, 1});
        create_xavier(store, p + "ffn.wout", cfg.u, cfg.u, rng);
        create_zeros(store, p + "ffn.bout", {cfg.u, 1});
        create_const(store, p + "ln2.gamma", {cfg.u, 1}, 1.0);
        create_zeros(store, p + "ln2.beta", {cfg.u, 1});
    }
}

EncodedText encode_text(const TokenSeq& seq, const ParamStore& params,
                        const TextEncoderConfig& cfg) {
    cfg.validate();
    if (seq.ids.size() != kSeqLen || seq.mask.size() != kSeqLen)
        throw ContractError("encode_text: sequence length is not " + std::to_string(kSeqLen));

    // token one-hot columns: |V| x M
    std::vector<double> oh(cfg.vocab_size * kSeqLen, 0.0);
    for (std::size_t j = 0; j < kSeqLen; ++j) {
        if (seq.ids[j] >= cfg.vocab_size)
            throw ContractError("encode_text: token id " + std::to_string(seq.ids[j]) +
                                " outside vocab of size " + std::to_string(cfg.vocab_size));
        oh[std::size_t(seq.ids[j]) * kSeqLen + j] = 1.0;
    }
    auto x = add(matmul(params.get("encoder.embed"), make_constant({cfg.vocab_size, kSeqLen}, std::move(oh))),
                 params.get("encoder.pos"));

    // additive key mask: 0 on real keys, large negative on PAD keys
    std::vector<double> maskv(kSeqLen * kSeqLen, 0.0);
    for (std::size_t q = 0; q < kSeqLen; ++q)
        for (std::size_t k = 0; k < kSeqLen; ++k)
            if (!seq.mask[k]) maskv[q * kSeqLen + k] = kMaskPenalty;
    auto key_mask = make_constant({kSeqLen, kSeqLen}, std::move(maskv));

    const std::size_t dk = cfg.u / cfg.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));

    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = layer_prefix(l);
        std::vector<NodePtr> head_outs;
        for (std::size_t h = 0; h < cfg.heads; ++h) {
            const std::string hp = p + "head" + std::to_string(h) + ".";
            auto q = matmul(params.get(hp + "wq"), x);   // dk x M
            auto k = matmul(params.get(hp + "wk"), x);
            auto v = matmul(params.get(hp + "wv"), x);
            auto scores = add(scale(matmul(transpose(q), k), att_scale), key_mask);  // M x M
            auto att = softmax(scores, 1);               // rows = queries
            head_outs.push_back(matmul(v, transpose(att)));
        }
        auto attn = matmul(params.get(p + "wo"), concat(0, head_outs));
        auto x1 = layer_norm(add(x, attn), params.get(p + "ln1.gamma"),
                             params.get(p + "ln1.beta"));
        auto ones_row = ones_matrix(1, kSeqLen);
        auto inner = relu(add(matmul(params.get(p + "ffn.win"), x1),
                              matmul(params.get(p + "ffn.bin"), ones_row)));
        auto ffn = add(matmul(params.get(p + "ffn.wout"), inner),
                       matmul(params.get(p + "ffn.bout"), ones_row));
        x = layer_norm(add(x1, ffn), params.get(p + "ln2.gamma"), params.get(p + "ln2.beta"));
    }

    std::vector<double> e0(kSeqLen, 0.0);
    e0[0] = 1.0;
    EncodedText out;
    out.c = x;
    out.s = matmul(x, make_constant({kSeqLen}, std::move(e0)));
    return out;
}

}  // namespace dmh
