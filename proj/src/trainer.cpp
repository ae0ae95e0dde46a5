#include "dmh/trainer.hpp"

#include <chrono>
#include <cmath>

namespace dmh {

std::string dataset_tag_name(DatasetTag tag) {
    switch (tag) {
        case DatasetTag::FhmLike: return "fhm-like";
        case DatasetTag::MultioffLike: return "multioff-like";
        case DatasetTag::Synthetic: return "synthetic";
    }
    throw ContractError("dataset_tag_name: bad tag");
}

DatasetTag dataset_tag_from_name(const std::string& name) {
    if (name == "fhm-like") return DatasetTag::FhmLike;
    if (name == "multioff-like") return DatasetTag::MultioffLike;
    if (name == "synthetic") return DatasetTag::Synthetic;
    throw FormatError("unknown dataset tag \"" + name +
                      "\" (expected fhm-like | multioff-like | synthetic)");
}

double default_mu(DatasetTag tag) {
    switch (tag) {
        case DatasetTag::FhmLike: return 0.05;
        case DatasetTag::MultioffLike: return 0.03;
        case DatasetTag::Synthetic: return 0.05;
    }
    throw ContractError("default_mu: bad tag");
}

void TrainConfig::validate() const {
    if (batch < 1) throw ContractError("TrainConfig: batch must be >= 1");
    if (!(lr > 0.0)) throw ContractError("TrainConfig: lr must be > 0");
    if (!(resolved_mu() >= 0.0)) throw ContractError("TrainConfig: mu must be >= 0");
    if (!(weight_decay >= 0.0)) throw ContractError("TrainConfig: weight decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ContractError("TrainConfig: betas must lie in [0,1)");
    if (!(eps_adam > 0.0)) throw ContractError("TrainConfig: eps_adam must be > 0");
}

ojson train_config_to_json(const TrainConfig& cfg) {
    ojson j{
        {"lr", cfg.lr},
        {"batch", cfg.batch},
        {"mu", nullptr},
        {"epochs", cfg.epochs},
        {"seed", cfg.seed},
        {"weight_decay", cfg.weight_decay},
        {"beta1", cfg.beta1},
        {"beta2", cfg.beta2},
        {"eps_adam", cfg.eps_adam},
        {"dataset_tag", dataset_tag_name(cfg.tag)},
    };
    if (cfg.mu) j["mu"] = *cfg.mu;
    return j;
}

TrainConfig train_config_from_json(const ojson& j, TrainConfig base) {
    try {
        if (j.contains("lr")) base.lr = j.at("lr").get<double>();
        if (j.contains("batch")) base.batch = j.at("batch").get<std::size_t>();
        if (j.contains("mu") && !j.at("mu").is_null()) base.mu = j.at("mu").get<double>();
        if (j.contains("epochs")) base.epochs = j.at("epochs").get<std::size_t>();
        if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("weight_decay"))
            base.weight_decay = j.at("weight_decay").get<double>();
        if (j.contains("beta1")) base.beta1 = j.at("beta1").get<double>();
        if (j.contains("beta2")) base.beta2 = j.at("beta2").get<double>();
        if (j.contains("eps_adam")) base.eps_adam = j.at("eps_adam").get<double>();
        if (j.contains("dataset_tag"))
            base.tag = dataset_tag_from_name(j.at("dataset_tag").get<std::string>());
        return base;
    } catch (const ojson::exception& e) {
        throw FormatError(std::string("bad train config: ") + e.what());
    }
}

AdamWState AdamWState::for_store(const ParamStore& store) {
    AdamWState st;
    for (const auto& [name, node] : store) {
        st.m[name].assign(node->values.size(), 0.0);
        st.v[name].assign(node->values.size(), 0.0);
    }
    return st;
}

void adamw_step(ParamStore& store, AdamWState& state, const TrainConfig& cfg) {
    cfg.validate();
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (const auto& [name, node] : store) {
        auto mit = state.m.find(name);
        auto vit = state.v.find(name);
        if (mit == state.m.end() || vit == state.v.end())
            throw ContractError("adamw_step: no moments for parameter " + name);
        auto& m = mit->second;
        auto& v = vit->second;
        if (m.size() != node->values.size() || v.size() != node->values.size())
            throw ContractError("adamw_step: moment size mismatch for " + name);
        const bool has_grad = !node->grad.empty();
        if (has_grad && node->grad.size() != node->values.size())
            throw ContractError("adamw_step: gradient size mismatch for " + name);
        for (std::size_t i = 0; i < node->values.size(); ++i) {
            const double g = has_grad ? node->grad[i] : 0.0;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            node->values[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps_adam) +
                                         cfg.weight_decay * node->values[i]);
        }
    }
}

namespace {

// training-time noise stream for one sample: a function of (seed, epoch, id)
// only, so an interrupted run resumes on the identical draws
RngStream sample_stream(std::uint64_t seed, std::size_t epoch, const std::string& id) {
    return RngStream(seed).derive(epoch).derive(RngStream::hash_string(id));
}

}  // namespace

std::vector<EpochLog> train(Model& model, AdamWState& opt, const Dataset& data,
                            const TrainConfig& cfg, std::size_t start_epoch,
                            const EpochHook& hook) {
    cfg.validate();
    const double mu = cfg.resolved_mu();
    const auto train_idx = data.split_indices("train");
    if (train_idx.empty()) throw ContractError("train: dataset has no train samples");

    std::vector<EpochLog> logs;
    for (std::size_t epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        std::vector<std::size_t> order = train_idx;
        RngStream shuffle(cfg.seed ^ static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle.next_index(i)]);

        double pred_sum = 0.0, match_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch) {
            const std::size_t stop = std::min(order.size(), at + cfg.batch);
            model.params.zero_grads();
            for (std::size_t b = at; b < stop; ++b) {
                const MemeSample& s = data.samples[order[b]];
                auto out = forward(model, s, sample_stream(cfg.seed, epoch, s.id));
                auto bce = prediction_loss_term(out.y_node, s.label);
                backward_accumulate(add(bce, scale(out.match_node, mu)));
                pred_sum += bce->values[0];
                match_sum += out.l_match;
                correct += predict_label(out.y, model.config.threshold) == (s.label == 1);
            }
            adamw_step(model.params, opt, cfg);
        }

        EpochLog log;
        log.epoch = epoch;
        log.pred_loss = pred_sum / static_cast<double>(order.size());
        log.match_loss = match_sum / static_cast<double>(order.size());
        log.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        logs.push_back(log);
        if (hook) hook(model, opt, log);
    }
    return logs;
}

MetricsReport evaluate(const Model& model, const Dataset& data, const std::string& split,
                       std::optional<double> lambda) {
    const auto idx = data.split_indices(split);
    if (idx.empty()) throw ContractError("evaluate: split " + split + " is empty");
    std::vector<EvalPair> pairs;
    pairs.reserve(idx.size());
    for (std::size_t i : idx) {
        const MemeSample& s = data.samples[i];
        auto out = forward(model, s, eval_rng_for(s.id));
        pairs.push_back({out.y, s.label});
    }
    return compute_metrics(pairs, lambda ? *lambda : model.config.threshold);
}

std::vector<LatentAssignment> latent_assignments(const Model& model, const Dataset& data,
                                                 const std::string& split) {
    const auto idx = data.split_indices(split);
    if (idx.empty()) throw ContractError("latent_assignments: split " + split + " is empty");
    auto arg_max = [](const std::vector<double>& v) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] > v[best]) best = i;
        return best;
    };
    std::vector<LatentAssignment> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
        const MemeSample& s = data.samples[i];
        auto fwd = forward(model, s, eval_rng_for(s.id));
        out.push_back({s.id, arg_max(fwd.l_s), arg_max(fwd.v_p)});
    }
    return out;
}

ojson epoch_log_json(const EpochLog& log) {
    return ojson{
        {"epoch", log.epoch},
        {"pred_loss", log.pred_loss},
        {"match_loss", log.match_loss},
        {"train_accuracy", log.train_accuracy},
        {"timing", {{"seconds", log.seconds}}},
    };
}

Checkpoint training_checkpoint(const Model& model, const AdamWState& opt,
                               std::size_t completed_epochs, const TrainConfig& cfg) {
    Checkpoint ck = snapshot_model(model);
    for (const auto& [name, node] : model.params) {
        const auto mit = opt.m.find(name);
        const auto vit = opt.v.find(name);
        if (mit == opt.m.end() || vit == opt.v.end())
            throw ContractError("training_checkpoint: no moments for parameter " + name);
        ck.tensors.emplace("opt.m." + name, std::make_pair(node->shape, mit->second));
        ck.tensors.emplace("opt.v." + name, std::make_pair(node->shape, vit->second));
    }
    ck.meta = ojson{
        {"epoch", completed_epochs},
        {"opt_step", opt.t},
        {"train", train_config_to_json(cfg)},
    };
    return ck;
}

AdamWState opt_state_from_checkpoint(const Checkpoint& ck, const ParamStore& params) {
    AdamWState st;
    for (const auto& [name, node] : params) {
        const auto mit = ck.tensors.find("opt.m." + name);
        const auto vit = ck.tensors.find("opt.v." + name);
        if (mit == ck.tensors.end() || vit == ck.tensors.end())
            throw FormatError("checkpoint is missing optimizer moments for " + name);
        if (mit->second.second.size() != node->values.size() ||
            vit->second.second.size() != node->values.size())
            throw FormatError("checkpoint moment size mismatch for " + name);
        st.m[name] = mit->second.second;
        st.v[name] = vit->second.second;
    }
    try {
        st.t = ck.meta.value("opt_step", std::uint64_t{0});
    } catch (const ojson::exception& e) {
        throw FormatError(std::string("bad opt_step in checkpoint meta: ") + e.what());
    }
    return st;
}

}  // namespace dmh
