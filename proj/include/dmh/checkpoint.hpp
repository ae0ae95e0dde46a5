#pragma once

#include <map>
#include <utility>

#include <json.hpp>

#include "dmh/model.hpp"

namespace dmh {

using ojson = nlohmann::ordered_json;

ojson model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const ojson& j);
// applies only the keys present, on top of `base` (config-file semantics)
ModelConfig model_config_overlay(const ojson& j, ModelConfig base);

// On-disk layout: u64 little-endian header length, JSON header
// {version, config, vocab, tensors: name -> {shape, offset}, meta},
// then the tensor payloads as concatenated float64 little-endian runs in
// ascending-offset (= lexicographic name) order. Round-trips bit-exactly.
struct Checkpoint {
    ModelConfig config;
    std::vector<std::string> vocab_tokens;
    // name -> (shape, values); model parameters plus any extra state the
    // trainer wants persisted (optimizer moments live under "opt.")
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>> tensors;
    ojson meta = ojson::object();  // free-form: epoch, step, train settings
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

// params-only snapshot with empty meta
Checkpoint snapshot_model(const Model& model);

// rebuilds vocab + params from the stored tensors; "opt." entries are left
// for the caller
Model model_from_checkpoint(const Checkpoint& ck);

}  // namespace dmh
