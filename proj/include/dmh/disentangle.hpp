#pragma once

#include <cmath>

#include "dmh/param_store.hpp"
#include "dmh/rng.hpp"
#include "dmh/tensor.hpp"

namespace dmh {

struct DisentangleConfig {
    std::size_t latent = 4;       // number of target categories the space can hold
    double tau = 1.0;             // relaxation temperature
    bool pick_min = false;        // audit flag: one-hot at the minimum instead of the maximum

    void validate() const {
        if (latent < 2) throw ContractError("DisentangleConfig: latent size must be >= 2");
        if (!(tau > 0.0)) throw ContractError("DisentangleConfig: tau must be > 0");
    }
};

inline double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

// text-side and visual-side projection parameters into the latent space
void register_disentangle_params(ParamStore& store, std::size_t latent, std::size_t u,
                                 RngStream& rng);

// s_p = W s + b (raw logits)
NodePtr project_text(const NodePtr& s, const ParamStore& params);

// z = softmax((s_p + g) / tau) for a fixed noise vector g
NodePtr gumbel_softmax(const NodePtr& s_p, const std::vector<double>& g, double tau);

// draws standard Gumbel noise from the stream, then applies gumbel_softmax
NodePtr gumbel_sample(const NodePtr& s_p, double tau, RngStream& rng);

// hard one-hot at the arg-extremum of z (ties -> lowest index); gradient
// passes straight through to z
NodePtr st_onehot(const NodePtr& z, bool pick_min = false);

// v_p = sigmoid(W v_att + b), every unit a probability
NodePtr project_visual(const NodePtr& v_att, const ParamStore& params);

// binary cross-entropy between the visual unit probabilities and the text
// one-hot, summed over units; >= 0, and -> 0 iff v_p -> l_s
NodePtr matching_loss(const NodePtr& l_s, const NodePtr& v_p);

// clamps values into [eps, 1-eps] with identity gradient
NodePtr clamp_probs(const NodePtr& v, double eps = 1e-12);

}  // namespace dmh
