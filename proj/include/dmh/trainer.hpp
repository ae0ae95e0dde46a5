#pragma once

#include <functional>
#include <optional>

#include "dmh/checkpoint.hpp"
#include "dmh/data.hpp"
#include "dmh/metrics.hpp"
#include "dmh/model.hpp"

namespace dmh {

enum class DatasetTag { FhmLike, MultioffLike, Synthetic };

std::string dataset_tag_name(DatasetTag tag);
DatasetTag dataset_tag_from_name(const std::string& name);

// per-dataset matching-loss weight used when TrainConfig::mu is unset
double default_mu(DatasetTag tag);

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch = 64;
    std::optional<double> mu;    // unset -> default_mu(tag)
    std::size_t epochs = 1;      // total epochs, including any already done
    std::uint64_t seed = 0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    DatasetTag tag = DatasetTag::Synthetic;

    double resolved_mu() const { return mu ? *mu : default_mu(tag); }
    void validate() const;
};

ojson train_config_to_json(const TrainConfig& cfg);
// applies only the keys present, on top of `base`
TrainConfig train_config_from_json(const ojson& j, TrainConfig base = {});

struct AdamWState {
    std::map<std::string, std::vector<double>> m, v;  // first/second moments
    std::uint64_t t = 0;                              // completed steps

    static AdamWState for_store(const ParamStore& store);
};

// one decoupled-weight-decay Adam update from the gradients currently held
// in the store
void adamw_step(ParamStore& store, AdamWState& state, const TrainConfig& cfg);

struct EpochLog {
    std::size_t epoch = 0;          // 1-based
    double pred_loss = 0.0;         // per-sample means over the epoch
    double match_loss = 0.0;
    double train_accuracy = 0.0;
    double seconds = 0.0;           // wall clock; excluded from determinism
};

// {"epoch", "pred_loss", "match_loss", "train_accuracy", "timing":{"seconds"}}
ojson epoch_log_json(const EpochLog& log);

using EpochHook = std::function<void(const Model& model, const AdamWState& opt,
                                     const EpochLog& log)>;

// Runs epochs start_epoch+1 .. cfg.epochs over the train split: shuffle
// derived from (seed, epoch), batches of cfg.batch (last partial kept),
// per-sample forward/backward summed in sample order, one optimizer step per
// batch. The loss weight is cfg.resolved_mu(); the model config's mu is
// carried metadata. The hook fires after every epoch (checkpointing lives
// there). Deterministic: (seed, config, data) fixes the whole trajectory.
std::vector<EpochLog> train(Model& model, AdamWState& opt, const Dataset& data,
                            const TrainConfig& cfg, std::size_t start_epoch = 0,
                            const EpochHook& hook = {});

// forwards every sample of the split with the fixed evaluation stream and
// scores at `lambda` (default: the model's threshold)
MetricsReport evaluate(const Model& model, const Dataset& data, const std::string& split,
                       std::optional<double> lambda = {});

// per-sample argmax of the latent text one-hot and the visual unit
// probabilities, for disentanglement scoring
std::vector<LatentAssignment> latent_assignments(const Model& model, const Dataset& data,
                                                 const std::string& split);

// snapshot with optimizer moments ("opt.m./opt.v." tensors) and
// {"epoch", "opt_step", "train"} in meta
Checkpoint training_checkpoint(const Model& model, const AdamWState& opt,
                               std::size_t completed_epochs, const TrainConfig& cfg);

AdamWState opt_state_from_checkpoint(const Checkpoint& ck, const ParamStore& params);

}  // namespace dmh
