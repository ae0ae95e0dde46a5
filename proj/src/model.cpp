#include "dmh/model.hpp"

#include <algorithm>
#include <cmath>

#include "dmh/init.hpp"

namespace dmh {

void ModelConfig::validate() const {
    encoder.validate();
    fusion.validate();
    disentangle.validate();
    if (fusion.u != encoder.u)
        throw ContractError("ModelConfig: fusion text dim " + std::to_string(fusion.u) +
                            " does not match encoder dim " + std::to_string(encoder.u));
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ContractError("ModelConfig: threshold must lie in (0,1)");
    if (!(mu >= 0.0)) throw ContractError("ModelConfig: mu must be >= 0");
}

Model make_model(const ModelConfig& cfg, Vocab vocab, std::uint64_t seed) {
    ModelConfig c = cfg;
    if (c.encoder.vocab_size == 0) c.encoder.vocab_size = vocab.size();
    if (c.encoder.vocab_size != vocab.size())
        throw ContractError("make_model: config vocab size " +
                            std::to_string(c.encoder.vocab_size) + " != vocabulary size " +
                            std::to_string(vocab.size()));
    c.validate();

    Model m{c, std::move(vocab), ParamStore{}};
    RngStream rng(seed);
    register_text_encoder_params(m.params, c.encoder, rng);
    register_fusion_params(m.params, c.fusion, rng);
    register_disentangle_params(m.params, c.disentangle.latent, c.encoder.u, rng);
    create_xavier(m.params, "head.w", 1, 2 * c.encoder.u, rng);
    create_zeros(m.params, "head.b", {1});
    return m;
}

ModelOutput forward(const Model& model, const MemeSample& sample, RngStream rng,
                    bool soft_latent) {
    const ModelConfig& cfg = model.config;
    if (sample.features.n == 0)
        throw ContractError("forward: sample " + sample.id + " has no region features");
    if (sample.features.d != cfg.fusion.d)
        throw ShapeError("forward: sample " + sample.id + " has region dim " +
                         std::to_string(sample.features.d) + ", model expects " +
                         std::to_string(cfg.fusion.d));

    const TokenSeq seq = tokenize(sample.text_fields(), model.vocab);
    const EncodedText enc = encode_text(seq, model.params, cfg.encoder);

    auto v = make_constant({sample.features.n, sample.features.d}, sample.features.values);
    auto v_tilde = cross_attention(enc.c, v, seq.mask, model.params, cfg.fusion);
    auto v_att = pool(v_tilde, seq.mask);

    auto s_p = project_text(enc.s, model.params);
    auto z = gumbel_sample(s_p, cfg.disentangle.tau, rng);
    auto l_s = soft_latent ? z : st_onehot(z, cfg.disentangle.pick_min);
    auto v_p = project_visual(v_att, model.params);
    auto match = matching_loss(l_s, v_p);

    auto fused = concat(0, {enc.s, v_att});
    auto y_node = sigmoid(add(matmul(model.params.get("head.w"), fused),
                              model.params.get("head.b")));

    ModelOutput out;
    out.y = y_node->values[0];
    out.l_s = l_s->values;
    out.v_p = v_p->values;
    out.s = enc.s->values;
    out.v_att = v_att->values;
    out.l_match = match->values[0];
    out.y_node = y_node;
    out.match_node = match;
    return out;
}

NodePtr prediction_loss_term(const NodePtr& y_node, int label) {
    if (label != 0 && label != 1)
        throw ContractError("prediction_loss_term: label must be 0 or 1");
    auto yc = clamp_probs(y_node);
    auto picked = label == 1 ? yc : sub(make_constant({1}, {1.0}), yc);
    return scale(log_node(picked), -1.0);
}

NodePtr joint_loss(const std::vector<ModelOutput>& outputs, const std::vector<int>& labels,
                   double mu) {
    if (outputs.empty()) throw ContractError("joint_loss: empty batch");
    if (outputs.size() != labels.size())
        throw ContractError("joint_loss: " + std::to_string(outputs.size()) +
                            " outputs vs " + std::to_string(labels.size()) + " labels");
    if (!(mu >= 0.0)) throw ContractError("joint_loss: mu must be >= 0");

    NodePtr pred, match;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (!outputs[i].y_node || !outputs[i].match_node)
            throw ContractError("joint_loss: output " + std::to_string(i) +
                                " carries no graph handles");
        auto term = prediction_loss_term(outputs[i].y_node, labels[i]);
        pred = pred ? add(pred, term) : term;
        match = match ? add(match, outputs[i].match_node) : outputs[i].match_node;
    }
    return add(pred, scale(match, mu));
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || a.size() != b.size())
        throw ContractError("cosine_similarity: vectors of length " +
                            std::to_string(a.size()) + " and " + std::to_string(b.size()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw DomainError("cosine_similarity: zero vector");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<RetrievalHit> retrieve(const std::string& query,
                                   const std::vector<MemeSample>& dataset,
                                   const Model& model, std::size_t k) {
    if (k == 0) throw ContractError("retrieve: k must be >= 1");
    if (dataset.empty()) return {};

    const TokenSeq seq = tokenize({query}, model.vocab);
    const EncodedText enc = encode_text(seq, model.params, model.config.encoder);
    auto s_p = project_text(enc.s, model.params);
    RngStream qrng(RngStream::hash_string(query));
    auto z = gumbel_sample(s_p, model.config.disentangle.tau, qrng);
    auto l_q = st_onehot(z, model.config.disentangle.pick_min);

    std::vector<RetrievalHit> hits;
    hits.reserve(dataset.size());
    for (const auto& sample : dataset) {
        ModelOutput out = forward(model, sample, eval_rng_for(sample.id));
        hits.push_back({sample.id, cosine_similarity(l_q->values, out.v_p), out.y});
    }
    std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

}  // namespace dmh
