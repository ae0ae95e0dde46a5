#include "dmh/disentangle.hpp"

#include <algorithm>

#include "dmh/init.hpp"

namespace dmh {

void register_disentangle_params(ParamStore& store, std::size_t latent, std::size_t u,
                                 RngStream& rng) {
    create_xavier(store, "disentangle.text.w", latent, u, rng);
    create_zeros(store, "disentangle.text.b", {latent});
    create_xavier(store, "disentangle.visual.w", latent, u, rng);
    create_zeros(store, "disentangle.visual.b", {latent});
}

NodePtr project_text(const NodePtr& s, const ParamStore& params) {
    return add(matmul(params.get("disentangle.text.w"), s), params.get("disentangle.text.b"));
}

NodePtr gumbel_softmax(const NodePtr& s_p, const std::vector<double>& g, double tau) {
    if (s_p->rank() != 1)
        throw ShapeError("gumbel_softmax: logits must be a vector, got " + shape_str(s_p->shape));
    if (g.size() != s_p->shape[0])
        throw ShapeError("gumbel_softmax: noise length " + std::to_string(g.size()) +
                         " vs logits length " + std::to_string(s_p->shape[0]));
    if (!(tau > 0.0)) throw ContractError("gumbel_softmax: tau must be > 0");
    auto noisy = add(s_p, make_constant({g.size()}, g));
    return softmax(scale(noisy, 1.0 / tau), 0);
}

NodePtr gumbel_sample(const NodePtr& s_p, double tau, RngStream& rng) {
    std::vector<double> g(s_p->numel());
    for (auto& x : g) x = gumbel_from_uniform(rng.uniform01());
    return gumbel_softmax(s_p, g, tau);
}

NodePtr st_onehot(const NodePtr& z, bool pick_min) {
    if (z->rank() != 1)
        throw ShapeError("st_onehot: input must be a vector, got " + shape_str(z->shape));
    const auto& v = z->values;
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (pick_min ? v[i] < v[best] : v[i] > v[best]) best = i;  // ties keep lowest index
    }
    std::vector<double> hot(v.size(), 0.0);
    hot[best] = 1.0;
    return pass_through(make_constant(z->shape, std::move(hot)), z);
}

NodePtr project_visual(const NodePtr& v_att, const ParamStore& params) {
    return sigmoid(add(matmul(params.get("disentangle.visual.w"), v_att),
                       params.get("disentangle.visual.b")));
}

NodePtr clamp_probs(const NodePtr& v, double eps) {
    std::vector<double> c(v->values);
    for (auto& x : c) x = std::clamp(x, eps, 1.0 - eps);
    return pass_through(make_constant(v->shape, std::move(c)), v);
}

NodePtr matching_loss(const NodePtr& l_s, const NodePtr& v_p) {
    if (l_s->shape != v_p->shape)
        throw ShapeError("matching_loss: shapes " + shape_str(l_s->shape) + " and " +
                         shape_str(v_p->shape) + " differ");
    auto vc = clamp_probs(v_p);
    auto ones = make_constant(v_p->shape, std::vector<double>(v_p->numel(), 1.0));
    auto agree = mul(l_s, log_node(vc));
    auto disagree = mul(sub(ones, l_s), log_node(sub(ones, vc)));
    return scale(sum_all(add(agree, disagree)), -1.0);
}

}  // namespace dmh
