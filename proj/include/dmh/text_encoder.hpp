#pragma once

#include "dmh/param_store.hpp"
#include "dmh/rng.hpp"
#include "dmh/vocab.hpp"

namespace dmh {

struct TextEncoderConfig {
    std::size_t u = 64;           // hidden dim
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t vocab_size = 0;   // filled from the vocabulary

    void validate() const {
        if (u == 0 || layers == 0 || heads == 0 || vocab_size == 0)
            throw ContractError("TextEncoderConfig: all dims must be >= 1");
        if (u % heads != 0)
            throw ContractError("TextEncoderConfig: u (" + std::to_string(u) +
                                ") not divisible by heads (" + std::to_string(heads) + ")");
    }
};

struct EncodedText {
    NodePtr s;  // {u} — first-position (CLS) summary
    NodePtr c;  // {u, kSeqLen} — per-token contextual columns
};

// creates embedding table, positional table, and per-layer attention/FFN/norm
// parameters under the "encoder." prefix
void register_text_encoder_params(ParamStore& store, const TextEncoderConfig& cfg,
                                  RngStream& rng);

// L-layer transformer encoder; PAD keys are excluded from attention via the
// sequence mask
EncodedText encode_text(const TokenSeq& seq, const ParamStore& params,
                        const TextEncoderConfig& cfg);

}  // namespace dmh
