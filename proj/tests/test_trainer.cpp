#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "dmh/trainer.hpp"

using namespace dmh;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("dmh_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& rest) const { return (path / rest).string(); }
};

Dataset synth_dataset(const TempDir& td, std::size_t train_per_class, std::uint64_t seed) {
    SynthSpec sp;
    sp.train_per_class = train_per_class;
    sp.val_per_class = 2;
    sp.test_per_class = 2;
    sp.seed = seed;
    generate_synthetic(sp, td.path.string());
    return load_manifest(td / "manifest.jsonl");
}

Vocab vocab_from_train(const Dataset& ds) {
    Vocab v;
    for (std::size_t i : ds.split_indices("train")) v.absorb(ds.samples[i].text_fields());
    return v;
}

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.encoder.u = 16;
    cfg.encoder.layers = 1;
    cfg.encoder.heads = 2;
    cfg.fusion.u = 16;
    cfg.fusion.heads = 2;
    cfg.fusion.d = 16;
    cfg.disentangle.latent = 4;
    return cfg;
}

std::map<std::string, std::vector<double>> values_of(const ParamStore& store) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, node] : store) out[name] = node->values;
    return out;
}

}  // namespace

TEST_CASE("adamw: pure decay and first-step oracles") {
    ParamStore store;
    store.create("w", {1}, {1.0});
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.01;
    auto st = AdamWState::for_store(store);

    store.get("w")->grad = {0.0};
    adamw_step(store, st, cfg);
    CHECK(st.t == 1);
    CHECK(store.get("w")->values[0] == doctest::Approx(0.999).epsilon(1e-15));

    // wd = 0, g = 1, fresh state: bias-corrected ratio is 1 up to eps_adam
    ParamStore store2;
    store2.create("w", {1}, {0.3});
    TrainConfig cfg2;
    cfg2.weight_decay = 0.0;
    auto st2 = AdamWState::for_store(store2);
    store2.get("w")->grad = {1.0};
    adamw_step(store2, st2, cfg2);
    CHECK(store2.get("w")->values[0] == doctest::Approx(0.3 - cfg2.lr).epsilon(1e-7));

    // moments must cover every parameter at matching sizes
    store.create("late", {2}, {0.0, 0.0});
    CHECK_THROWS_AS(adamw_step(store, st, cfg), ContractError);
    auto st3 = AdamWState::for_store(store2);
    st3.m["w"].resize(2);
    CHECK_THROWS_AS(adamw_step(store2, st3, cfg2), ContractError);
}

TEST_CASE("adamw trajectories are bit-identical across reruns") {
    auto run = [] {
        ParamStore store;
        store.create("a", {3}, {0.5, -0.25, 1.5});
        TrainConfig cfg;
        auto st = AdamWState::for_store(store);
        RngStream g(4);
        for (int step = 0; step < 20; ++step) {
            auto& grad = store.get("a")->grad;
            grad.resize(3);
            for (auto& x : grad) x = g.normal();
            adamw_step(store, st, cfg);
        }
        return store.get("a")->values;
    };
    CHECK(run() == run());
}

TEST_CASE("train config json: round trip, partial overlays, tags") {
    TrainConfig cfg;
    cfg.lr = 0.005;
    cfg.batch = 16;
    cfg.mu = 0.2;
    cfg.epochs = 40;
    cfg.seed = 9;
    cfg.tag = DatasetTag::MultioffLike;
    TrainConfig back = train_config_from_json(train_config_to_json(cfg));
    CHECK(back.lr == cfg.lr);
    CHECK(back.batch == cfg.batch);
    CHECK(back.mu.has_value());
    CHECK(*back.mu == *cfg.mu);
    CHECK(back.epochs == cfg.epochs);
    CHECK(back.seed == cfg.seed);
    CHECK(back.tag == cfg.tag);

    // unset mu stays null through the trip and resolves from the tag
    TrainConfig bare;
    bare.tag = DatasetTag::FhmLike;
    TrainConfig b2 = train_config_from_json(train_config_to_json(bare));
    CHECK_FALSE(b2.mu.has_value());
    CHECK(b2.resolved_mu() == 0.05);
    CHECK(default_mu(DatasetTag::MultioffLike) == 0.03);
    CHECK(default_mu(DatasetTag::Synthetic) == 0.05);

    TrainConfig overlaid = train_config_from_json(ojson{{"lr", 0.5}}, cfg);
    CHECK(overlaid.lr == 0.5);
    CHECK(overlaid.batch == 16);  // untouched keys keep base values

    CHECK_THROWS_AS(train_config_from_json(ojson{{"dataset_tag", "imagenet"}}), FormatError);
    CHECK_THROWS_AS(train_config_from_json(ojson{{"lr", "fast"}}), FormatError);
    for (auto tag : {DatasetTag::FhmLike, DatasetTag::MultioffLike, DatasetTag::Synthetic})
        CHECK(dataset_tag_from_name(dataset_tag_name(tag)) == tag);
}

TEST_CASE("training is deterministic given (seed, config, data)") {
    TempDir td("train_det");
    Dataset ds = synth_dataset(td, 6, 5);

    auto run = [&] {
        Model m = make_model(small_config(), vocab_from_train(ds), 17);
        auto opt = AdamWState::for_store(m.params);
        TrainConfig cfg;
        cfg.epochs = 3;
        cfg.batch = 4;
        cfg.seed = 9;
        auto logs = train(m, opt, ds, cfg);
        return std::make_pair(values_of(m.params), logs);
    };
    auto [pa, la] = run();
    auto [pb, lb] = run();
    CHECK(pa == pb);
    REQUIRE(la.size() == lb.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        CHECK(la[i].epoch == lb[i].epoch);
        CHECK(la[i].pred_loss == lb[i].pred_loss);
        CHECK(la[i].match_loss == lb[i].match_loss);
        CHECK(la[i].train_accuracy == lb[i].train_accuracy);
    }
}

TEST_CASE("the matching term moves the trajectory: mu=0 differs from mu>0") {
    TempDir td("train_mu");
    Dataset ds = synth_dataset(td, 6, 11);

    auto run = [&](double mu) {
        Model m = make_model(small_config(), vocab_from_train(ds), 17);
        auto opt = AdamWState::for_store(m.params);
        TrainConfig cfg;
        cfg.epochs = 2;
        cfg.batch = 4;
        cfg.seed = 9;
        cfg.mu = mu;
        train(m, opt, ds, cfg);
        return values_of(m.params);
    };
    CHECK(run(0.0) != run(0.05));
}

TEST_CASE("epochs=0 leaves the parameters untouched") {
    TempDir td("train_zero");
    Dataset ds = synth_dataset(td, 4, 3);
    Model m = make_model(small_config(), vocab_from_train(ds), 17);
    auto before = values_of(m.params);
    auto opt = AdamWState::for_store(m.params);
    TrainConfig cfg;
    cfg.epochs = 0;
    auto logs = train(m, opt, ds, cfg);
    CHECK(logs.empty());
    CHECK(values_of(m.params) == before);
    CHECK(opt.t == 0);
}

TEST_CASE("a partial final batch still steps the optimizer") {
    TempDir td("train_partial");
    Dataset ds = synth_dataset(td, 6, 7);  // 12 train samples
    Model m = make_model(small_config(), vocab_from_train(ds), 1);
    auto opt = AdamWState::for_store(m.params);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch = 5;  // 5 + 5 + 2
    train(m, opt, ds, cfg);
    CHECK(opt.t == 3);
}

TEST_CASE("loss falls over fifty epochs on a small planted set") {
    TempDir td("train_trend");
    Dataset ds = synth_dataset(td, 8, 21);
    Model m = make_model(small_config(), vocab_from_train(ds), 33);
    auto opt = AdamWState::for_store(m.params);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch = 16;
    cfg.seed = 2;
    auto logs = train(m, opt, ds, cfg);
    REQUIRE(logs.size() == 50);
    CHECK(logs[49].pred_loss < logs[0].pred_loss);
}

TEST_CASE("evaluate: zero head on an all-negative split, determinism, ranges") {
    TempDir td("eval_basic");
    Dataset ds = synth_dataset(td, 4, 13);
    // relabel the test split all-non-hateful so the 0.5 score is always right
    for (auto& s : ds.samples)
        if (s.split == "test") s.label = 0;
    Model m = make_model(small_config(), vocab_from_train(ds), 3);
    auto& w = m.params.get("head.w")->values;
    std::fill(w.begin(), w.end(), 0.0);

    auto rep = evaluate(m, ds, "test");
    CHECK(rep.accuracy == 1.0);
    CHECK_FALSE(rep.auroc.has_value());  // single-class split
    CHECK(rep.weighted_precision >= 0.0);
    CHECK(rep.weighted_precision <= 1.0);
    CHECK(rep.weighted_recall == 1.0);
    CHECK(rep.weighted_f1 >= 0.0);
    CHECK(rep.weighted_f1 <= 1.0);

    auto rep2 = evaluate(m, ds, "test");
    CHECK(rep.accuracy == rep2.accuracy);
    CHECK(rep.weighted_f1 == rep2.weighted_f1);

    CHECK_THROWS_AS(evaluate(m, ds, "nosuch"), ContractError);

    auto rep3 = evaluate(m, ds, "validation", 0.4);  // explicit threshold
    CHECK(rep3.n == 4);

    auto assigns = latent_assignments(m, ds, "test");
    CHECK(assigns.size() == rep.n);
    for (const auto& a : assigns) {
        CHECK(a.text_unit < m.config.disentangle.latent);
        CHECK(a.visual_unit < m.config.disentangle.latent);
    }
}

TEST_CASE("checkpoint resume reproduces the uninterrupted run bit for bit") {
    TempDir td("train_resume");
    Dataset ds = synth_dataset(td, 6, 19);
    Vocab v = vocab_from_train(ds);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch = 4;
    cfg.seed = 23;

    Model straight = make_model(small_config(), v, 41);
    auto opt_straight = AdamWState::for_store(straight.params);
    auto logs_straight = train(straight, opt_straight, ds, cfg);

    Model half = make_model(small_config(), v, 41);
    auto opt_half = AdamWState::for_store(half.params);
    TrainConfig first_leg = cfg;
    first_leg.epochs = 3;
    train(half, opt_half, ds, first_leg);
    save_checkpoint(td / "e3.ckpt", training_checkpoint(half, opt_half, 3, first_leg));

    Checkpoint ck = read_checkpoint(td / "e3.ckpt");
    CHECK(ck.meta.at("epoch").get<std::size_t>() == 3);
    Model resumed = model_from_checkpoint(ck);
    auto opt_resumed = opt_state_from_checkpoint(ck, resumed.params);
    CHECK(opt_resumed.t == opt_half.t);
    auto logs_tail = train(resumed, opt_resumed, ds, cfg, 3);

    CHECK(values_of(resumed.params) == values_of(straight.params));
    REQUIRE(logs_tail.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(logs_tail[i].epoch == logs_straight[i + 3].epoch);
        CHECK(logs_tail[i].pred_loss == logs_straight[i + 3].pred_loss);
        CHECK(logs_tail[i].match_loss == logs_straight[i + 3].match_loss);
        CHECK(logs_tail[i].train_accuracy == logs_straight[i + 3].train_accuracy);
    }

    // moments for every parameter are mandatory on reload
    Checkpoint maimed = ck;
    maimed.tensors.erase("opt.m.head.w");
    CHECK_THROWS_AS(opt_state_from_checkpoint(maimed, resumed.params), FormatError);
}

TEST_CASE("the epoch hook fires once per epoch, in order") {
    TempDir td("train_hook");
    Dataset ds = synth_dataset(td, 4, 29);
    Model m = make_model(small_config(), vocab_from_train(ds), 7);
    auto opt = AdamWState::for_store(m.params);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch = 8;
    std::vector<std::size_t> seen;
    train(m, opt, ds, cfg, 0,
          [&](const Model&, const AdamWState&, const EpochLog& log) {
              seen.push_back(log.epoch);
          });
    CHECK(seen == std::vector<std::size_t>{1, 2, 3, 4});

    // log record shape: timing is the only wall-clock field
    EpochLog log;
    log.epoch = 2;
    log.pred_loss = 0.5;
    log.match_loss = 1.5;
    log.train_accuracy = 0.75;
    log.seconds = 0.01;
    ojson j = epoch_log_json(log);
    CHECK(j.at("epoch") == 2);
    CHECK(j.at("pred_loss") == 0.5);
    CHECK(j.at("match_loss") == 1.5);
    CHECK(j.at("train_accuracy") == 0.75);
    CHECK(j.at("timing").at("seconds") == 0.01);
}

TEST_CASE("train validates its configuration") {
    TempDir td("train_cfgval");
    Dataset ds = synth_dataset(td, 4, 31);
    Model m = make_model(small_config(), vocab_from_train(ds), 7);
    auto opt = AdamWState::for_store(m.params);

    TrainConfig bad;
    bad.batch = 0;
    CHECK_THROWS_AS(train(m, opt, ds, bad), ContractError);
    bad = TrainConfig{};
    bad.lr = 0.0;
    CHECK_THROWS_AS(train(m, opt, ds, bad), ContractError);
    bad = TrainConfig{};
    bad.mu = -0.5;
    CHECK_THROWS_AS(train(m, opt, ds, bad), ContractError);

    // dataset without a train split
    Dataset empty;
    TrainConfig ok;
    CHECK_THROWS_AS(train(m, opt, empty, ok), ContractError);
}
