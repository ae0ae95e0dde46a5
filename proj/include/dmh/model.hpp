#pragma once

#include "dmh/data.hpp"
#include "dmh/disentangle.hpp"
#include "dmh/fusion.hpp"
#include "dmh/text_encoder.hpp"
#include "dmh/vocab.hpp"

namespace dmh {

struct ModelConfig {
    TextEncoderConfig encoder;
    FusionConfig fusion;           // fusion.u must equal encoder.u
    DisentangleConfig disentangle;
    double threshold = 0.5;        // decision threshold on the hateful score
    double mu = 0.05;              // matching-loss weight in the joint loss

    void validate() const;
};

// Evaluation-time noise draws derive from this fixed base instead of the
// training seed, so reports depend only on (params, data).
inline constexpr std::uint64_t kEvalSeed = 0x6576616cULL;

inline RngStream eval_rng_for(const std::string& sample_id) {
    return RngStream(kEvalSeed).derive(RngStream::hash_string(sample_id));
}

struct ModelOutput {
    double y = 0.0;               // hateful probability
    std::vector<double> l_s;      // latent text representation (one-hot)
    std::vector<double> v_p;      // latent visual unit probabilities
    std::vector<double> s;        // text summary vector
    std::vector<double> v_att;    // attended visual representation
    double l_match = 0.0;         // modality matching loss for this sample

    // live graph handles, kept so a batch loss can be assembled later
    NodePtr y_node;
    NodePtr match_node;
};

struct Model {
    ModelConfig config;
    Vocab vocab;
    ParamStore params;
};

// Registers every parameter tensor (encoder, fusion, latent projections,
// classification head) with seed-derived init. If the encoder vocab size is
// left at 0 it is filled from `vocab`; otherwise the two must agree.
Model make_model(const ModelConfig& cfg, Vocab vocab, std::uint64_t seed);

// Full pipeline for one sample. `soft_latent` keeps the relaxed latent
// distribution in place of the hard one-hot so the whole graph becomes
// smooth; derivative audits compare against that variant.
ModelOutput forward(const Model& model, const MemeSample& sample, RngStream rng,
                    bool soft_latent = false);

// -[label log y + (1-label) log(1-y)] with y clamped away from {0,1}
NodePtr prediction_loss_term(const NodePtr& y_node, int label);

// sum of prediction losses + mu * sum of matching losses over the batch
NodePtr joint_loss(const std::vector<ModelOutput>& outputs, const std::vector<int>& labels,
                   double mu);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

struct RetrievalHit {
    std::string id;
    double similarity;
    double y;  // hateful probability, for labelling the hit downstream
};

// Ranks the dataset by cosine similarity between the query's latent text
// representation and each sample's latent visual representation. The query's
// noise draw is seeded from the query string, so rankings are reproducible.
// Ties break toward the smaller id; at most k hits are returned.
std::vector<RetrievalHit> retrieve(const std::string& query,
                                   const std::vector<MemeSample>& dataset,
                                   const Model& model, std::size_t k);

}  // namespace dmh
