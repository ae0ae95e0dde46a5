// operator surface: dataset synthesis, training, evaluation, retrieval, and
// gradient self-verification
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "dmh/gradcheck.hpp"
#include "dmh/init.hpp"
#include "dmh/trainer.hpp"

using namespace dmh;
namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ojson read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config file " + path);
    try {
        return ojson::parse(is);
    } catch (const ojson::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

Dataset load_data(const std::string& path, bool mask_entities, bool mask_demographics) {
    FieldMask mask;
    mask.use_entities = !mask_entities;
    mask.use_demographics = !mask_demographics;
    return load_manifest(path, mask);
}

Vocab vocab_from_train(const Dataset& ds) {
    Vocab v;
    for (std::size_t i : ds.split_indices("train")) v.absorb(ds.samples[i].text_fields());
    return v;
}

ojson metrics_json(const MetricsReport& rep, const std::string& split, double lambda) {
    ojson j{
        {"split", split},
        {"n", rep.n},
        {"lambda", lambda},
        {"accuracy", rep.accuracy},
        {"auroc", nullptr},
        {"weighted_precision", rep.weighted_precision},
        {"weighted_recall", rep.weighted_recall},
        {"weighted_f1", rep.weighted_f1},
    };
    if (rep.auroc) j["auroc"] = *rep.auroc;
    return j;
}

void print_metrics_table(const MetricsReport& rep, const std::string& split, double lambda) {
    std::printf("split               %s\n", split.c_str());
    std::printf("samples             %zu\n", rep.n);
    std::printf("threshold           %s\n", fmt(lambda).c_str());
    std::printf("accuracy            %s\n", fmt(rep.accuracy).c_str());
    if (rep.auroc)
        std::printf("auroc               %s\n", fmt(*rep.auroc).c_str());
    else
        std::printf("auroc               n/a (single-class split)\n");
    std::printf("weighted precision  %s\n", fmt(rep.weighted_precision).c_str());
    std::printf("weighted recall     %s\n", fmt(rep.weighted_recall).c_str());
    std::printf("weighted f1         %s\n", fmt(rep.weighted_f1).c_str());
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
    SynthSpec spec;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    generate_synthetic(a.spec, a.out);
    const std::size_t total =
        2 * (a.spec.train_per_class + a.spec.val_per_class + a.spec.test_per_class);
    const fs::path out(a.out);
    std::printf("wrote %s\n", (out / "manifest.jsonl").string().c_str());
    std::printf("wrote %s\n", (out / "truth.jsonl").string().c_str());
    std::printf("wrote %s\n", (out / "spec.json").string().c_str());
    std::printf("wrote %s (%zu files)\n", (out / "features").string().c_str(), total);
    return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string data, out, config_file, resume;
    bool mask_entities = false, mask_demographics = false;
    std::size_t u = 0, layers = 0, enc_heads = 0, fusion_heads = 0, visual_dim = 0,
                latent = 0;
    double tau = 0, threshold = 0;
    bool pick_min = false;
    std::string scale_mode;
    double lr = 0, mu = 0, weight_decay = 0, beta1 = 0, beta2 = 0, eps_adam = 0;
    std::size_t batch = 0, epochs = 0;
    std::uint64_t seed = 0;
    std::string tag;
};

int cmd_train(const TrainArgs& a, const CLI::App* sub) {
    ModelConfig mc;
    TrainConfig tc;
    bool file_fixed_d = false, file_fixed_fusion_u = false;
    if (!a.config_file.empty()) {
        const ojson c = read_json_file(a.config_file);
        if (c.contains("model")) {
            mc = model_config_overlay(c.at("model"), mc);
            if (c.at("model").contains("fusion")) {
                file_fixed_d = c.at("model").at("fusion").contains("d");
                file_fixed_fusion_u = c.at("model").at("fusion").contains("u");
            }
        }
        if (c.contains("train")) tc = train_config_from_json(c.at("train"), tc);
    }

    // flags win over file values
    if (sub->count("--u")) mc.encoder.u = a.u;
    if (sub->count("--layers")) mc.encoder.layers = a.layers;
    if (sub->count("--encoder-heads")) mc.encoder.heads = a.enc_heads;
    if (sub->count("--fusion-heads")) mc.fusion.heads = a.fusion_heads;
    if (sub->count("--visual-dim")) mc.fusion.d = a.visual_dim;
    if (sub->count("--latent")) mc.disentangle.latent = a.latent;
    if (sub->count("--tau")) mc.disentangle.tau = a.tau;
    if (sub->count("--pick-min")) mc.disentangle.pick_min = true;
    if (sub->count("--scale-mode")) {
        if (a.scale_mode == "head-dim") mc.fusion.scale_mode = ScaleMode::HeadDim;
        else if (a.scale_mode == "head-count") mc.fusion.scale_mode = ScaleMode::HeadCount;
        else throw FormatError("unknown scale mode \"" + a.scale_mode + "\"");
    }
    if (sub->count("--threshold")) mc.threshold = a.threshold;
    if (sub->count("--lr")) tc.lr = a.lr;
    if (sub->count("--batch")) tc.batch = a.batch;
    if (sub->count("--mu")) tc.mu = a.mu;
    if (sub->count("--epochs")) tc.epochs = a.epochs;
    if (sub->count("--seed")) tc.seed = a.seed;
    if (sub->count("--weight-decay")) tc.weight_decay = a.weight_decay;
    if (sub->count("--beta1")) tc.beta1 = a.beta1;
    if (sub->count("--beta2")) tc.beta2 = a.beta2;
    if (sub->count("--eps-adam")) tc.eps_adam = a.eps_adam;
    if (sub->count("--tag")) tc.tag = dataset_tag_from_name(a.tag);
    tc.validate();

    Dataset ds = load_data(a.data, a.mask_entities, a.mask_demographics);
    const auto train_idx = ds.split_indices("train");
    if (train_idx.empty()) throw ContractError("train: no train split in " + a.data);
    if (!file_fixed_d && !sub->count("--visual-dim"))
        mc.fusion.d = ds.samples[train_idx[0]].features.d;  // infer from the data
    if (!file_fixed_fusion_u) mc.fusion.u = mc.encoder.u;
    mc.mu = tc.resolved_mu();

    const fs::path out(a.out);
    fs::create_directories(out / "checkpoints");
    fs::create_directories(out / "logs");
    fs::create_directories(out / "reports");

    Model model;
    AdamWState opt;
    std::size_t start_epoch = 0;
    if (!a.resume.empty()) {
        Checkpoint ck = read_checkpoint(a.resume);
        model = model_from_checkpoint(ck);
        opt = opt_state_from_checkpoint(ck, model.params);
        start_epoch = ck.meta.value("epoch", std::size_t{0});
    } else {
        model = make_model(mc, vocab_from_train(ds), tc.seed);
        opt = AdamWState::for_store(model.params);
    }

    std::ofstream log_os(out / "logs" / "train.jsonl", std::ios::trunc);
    if (!log_os) throw IoError("cannot write training log under " + a.out);
    auto hook = [&](const Model& mm, const AdamWState& oo, const EpochLog& lg) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%04zu.ckpt", lg.epoch);
        save_checkpoint((out / "checkpoints" / name).string(),
                        training_checkpoint(mm, oo, lg.epoch, tc));
        log_os << epoch_log_json(lg).dump() << "\n";
        log_os.flush();
    };
    const auto logs = train(model, opt, ds, tc, start_epoch, hook);

    const auto train_rep = evaluate(model, ds, "train");
    std::string line = "final: epochs=" + std::to_string(tc.epochs) +
                       " train_accuracy=" + fmt(train_rep.accuracy);
    if (!logs.empty())
        line += " pred_loss=" + fmt(logs.back().pred_loss) +
                " match_loss=" + fmt(logs.back().match_loss);
    if (!ds.split_indices("validation").empty()) {
        const auto vrep = evaluate(model, ds, "validation");
        line += " validation_accuracy=" + fmt(vrep.accuracy);
        if (vrep.auroc) line += " validation_auroc=" + fmt(*vrep.auroc);
    }
    std::printf("%s\n", line.c_str());
    return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    std::string checkpoint, data, split, format = "both", out;
    double lambda = 0;
    bool mask_entities = false, mask_demographics = false;
};

int cmd_eval(const EvalArgs& a, const CLI::App* sub) {
    const auto& valid = Dataset::valid_splits();
    if (std::find(valid.begin(), valid.end(), a.split) == valid.end()) {
        std::string names;
        for (const auto& s : valid) names += (names.empty() ? "" : ", ") + s;
        std::fprintf(stderr, "unknown split \"%s\": valid splits are %s\n", a.split.c_str(),
                     names.c_str());
        return 64;
    }
    Model model = model_from_checkpoint(read_checkpoint(a.checkpoint));
    Dataset ds = load_data(a.data, a.mask_entities, a.mask_demographics);
    const double lambda = sub->count("--lambda") ? a.lambda : model.config.threshold;
    const auto rep = evaluate(model, ds, a.split, lambda);
    const ojson j = metrics_json(rep, a.split, lambda);

    if (a.format != "json") print_metrics_table(rep, a.split, lambda);
    if (a.format != "table") std::printf("%s\n", j.dump().c_str());
    if (!a.out.empty()) {
        fs::create_directories(fs::path(a.out) / "reports");
        const auto rp = fs::path(a.out) / "reports" / ("eval_" + a.split + ".json");
        std::ofstream os(rp, std::ios::trunc);
        if (!os) throw IoError("cannot write report " + rp.string());
        os << j.dump() << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- retrieve ----

struct RetrieveArgs {
    std::string checkpoint, data, query;
    std::size_t k = 5;
    bool mask_entities = false, mask_demographics = false;
};

int cmd_retrieve(const RetrieveArgs& a) {
    Model model = model_from_checkpoint(read_checkpoint(a.checkpoint));
    Dataset ds = load_data(a.data, a.mask_entities, a.mask_demographics);
    const auto hits = retrieve(a.query, ds.samples, model, a.k);
    std::printf("%-4s  %-24s  %-10s  %s\n", "rank", "id", "similarity", "label");
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const bool hateful = predict_label(hits[i].y, model.config.threshold);
        std::printf("%-4zu  %-24s  %10.6f  %s\n", i + 1, hits[i].id.c_str(),
                    hits[i].similarity, hateful ? "hateful" : "non-hateful");
    }
    return 0;
}

// -------------------------------------------------------------- gradcheck ----

int cmd_gradcheck(std::uint64_t seed, bool sabotage) {
    GradTamper tamper;
    if (sabotage)
        tamper = [](std::map<std::string, std::vector<double>>& an) {
            for (auto& [name, g] : an)
                for (auto& x : g) x = -x;
        };

    bool all_pass = true;
    double worst = 0.0;
    std::string worst_name;
    auto check = [&](const std::string& name, ParamStore& store, const GraphBuilder& build) {
        const auto rep = grad_check(build, store, RngStream(seed), 1e-6, 1e-4, tamper);
        std::printf("op %-16s max rel err %.3e%s\n", name.c_str(), rep.worst,
                    rep.pass ? "" : "  FAIL");
        if (rep.worst >= worst) {
            worst = rep.worst;
            worst_name = name;
        }
        all_pass = all_pass && rep.pass;
    };

    RngStream init(seed ^ 0x5eedULL);
    auto make_param = [&](ParamStore& s, const std::string& n, std::vector<std::size_t> shape,
                          double lo, double hi) {
        std::vector<double> v(shape_numel(shape));
        for (auto& x : v) x = init.uniform(lo, hi);
        return s.create(n, std::move(shape), std::move(v));
    };
    auto weights = [&](const std::vector<std::size_t>& shape) {
        std::vector<double> w(shape_numel(shape));
        for (auto& x : w) x = init.uniform(-1.0, 1.0);
        return make_constant(shape, std::move(w));
    };
    // fold any tensor to a scalar against fixed weights so every element of
    // the op output touches the loss
    auto fold = [](const NodePtr& x, const NodePtr& w) { return sum_all(mul(x, w)); };

    {
        ParamStore s;
        make_param(s, "a", {3, 4}, -1, 1);
        make_param(s, "b", {4, 2}, -1, 1);
        auto w = weights({3, 2});
        check("matmul", s, [&](ParamStore& st, RngStream) {
            return fold(matmul(st.get("a"), st.get("b")), w);
        });
    }
    {
        ParamStore s;
        make_param(s, "a", {3, 4}, -1, 1);
        make_param(s, "x", {4}, -1, 1);
        auto w = weights({3});
        check("matmul-vec", s, [&](ParamStore& st, RngStream) {
            return fold(matmul(st.get("a"), st.get("x")), w);
        });
    }
    for (const char* op : {"add", "sub", "mul"}) {
        ParamStore s;
        make_param(s, "a", {2, 3}, -1, 1);
        make_param(s, "b", {2, 3}, -1, 1);
        auto w = weights({2, 3});
        std::string name = op;
        check(name, s, [&, name](ParamStore& st, RngStream) {
            auto a = st.get("a"), b = st.get("b");
            auto y = name == "add" ? add(a, b) : name == "sub" ? sub(a, b) : mul(a, b);
            return fold(y, w);
        });
    }
    {
        ParamStore s;
        make_param(s, "a", {2, 3}, -1, 1);
        auto w = weights({2, 3});
        check("scale", s, [&](ParamStore& st, RngStream) {
            return fold(scale(st.get("a"), 1.7), w);
        });
    }
    {
        ParamStore s;  // keep magnitudes clear of the relu kink
        auto v = make_param(s, "a", {2, 3}, 0.2, 1.0);
        for (auto& x : v->values) x *= init.next_index(2) ? 1.0 : -1.0;
        auto w = weights({2, 3});
        check("relu", s, [&](ParamStore& st, RngStream) {
            return fold(relu(st.get("a")), w);
        });
    }
    {
        ParamStore s;
        make_param(s, "a", {2, 3}, -1, 1);
        auto w = weights({2, 3});
        check("sigmoid", s, [&](ParamStore& st, RngStream) {
            return fold(sigmoid(st.get("a")), w);
        });
        check("exp", s, [&](ParamStore& st, RngStream) {
            return fold(exp_node(st.get("a")), w);
        });
    }
    {
        ParamStore s;
        make_param(s, "a", {2, 3}, 0.3, 2.0);
        auto w = weights({2, 3});
        check("log", s, [&](ParamStore& st, RngStream) {
            return fold(log_node(st.get("a")), w);
        });
    }
    for (std::size_t axis : {std::size_t{0}, std::size_t{1}}) {
        ParamStore s;
        make_param(s, "a", {3, 4}, -2, 2);
        auto w = weights({3, 4});
        check("softmax-axis" + std::to_string(axis), s, [&, axis](ParamStore& st, RngStream) {
            return fold(softmax(st.get("a"), axis), w);
        });
    }
    for (std::size_t axis : {std::size_t{0}, std::size_t{1}}) {
        ParamStore s;
        make_param(s, "a", {2, 3}, -1, 1);
        make_param(s, "b", {2, 3}, -1, 1);
        auto w = weights(axis == 0 ? std::vector<std::size_t>{4, 3}
                                   : std::vector<std::size_t>{2, 6});
        check("concat-axis" + std::to_string(axis), s, [&, axis](ParamStore& st, RngStream) {
            return fold(concat(axis, {st.get("a"), st.get("b")}), w);
        });
    }
    {
        ParamStore s;
        make_param(s, "a", {3, 4}, -1, 1);
        auto w0 = weights({4});
        check("sum-axis", s, [&](ParamStore& st, RngStream) {
            return fold(sum_axis(st.get("a"), 0, false), w0);
        });
        auto w1 = weights({3});
        check("mean-axis", s, [&](ParamStore& st, RngStream) {
            return fold(mean_axis(st.get("a"), 1, false), w1);
        });
        auto wt = weights({4, 3});
        check("transpose", s, [&](ParamStore& st, RngStream) {
            return fold(transpose(st.get("a")), wt);
        });
    }
    {
        // end-to-end: whole pipeline in its smooth configuration
        Vocab v;
        v.absorb({"tiny text here", "gun", "woman"});
        ModelConfig cfg;
        cfg.encoder.u = 4;
        cfg.encoder.layers = 1;
        cfg.encoder.heads = 2;
        cfg.fusion.u = 4;
        cfg.fusion.heads = 2;
        cfg.fusion.d = 3;
        cfg.disentangle.latent = 3;
        Model m = make_model(cfg, v, seed ^ 0xf00dULL);
        MemeSample sample;
        sample.id = "probe";
        sample.label = 1;
        sample.text_ocr = "tiny text here";
        sample.entities = {"gun"};
        sample.demographics = {"woman"};
        sample.features.n = 2;
        sample.features.d = 3;
        sample.features.values.resize(6);
        for (auto& x : sample.features.values) x = 0.1 * init.normal();
        check("full-model", m.params, [&](ParamStore&, RngStream) {
            auto out = forward(m, sample, RngStream(1234), true);
            return joint_loss({out}, {sample.label}, 0.7);
        });
    }

    if (all_pass) {
        std::printf("gradcheck: PASS (worst %.3e at %s, tolerance 1e-4)\n", worst,
                    worst_name.c_str());
        return 0;
    }
    std::printf("gradcheck: FAIL (worst %.3e at %s exceeds 1e-4)\n", worst, worst_name.c_str());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"disentangled multimodal hateful-content classifier"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    SynthArgs sy;
    auto* synth = app.add_subcommand("synth", "generate a planted-category synthetic dataset");
    synth->add_option("--k", sy.spec.k, "planted categories");
    synth->add_option("--per-class", sy.spec.train_per_class, "train samples per label class");
    synth->add_option("--val-per-class", sy.spec.val_per_class, "validation samples per label class");
    synth->add_option("--test-per-class", sy.spec.test_per_class, "test samples per label class");
    synth->add_option("--cue-tokens", sy.spec.cue_tokens, "category cue words per sample");
    synth->add_option("--d", sy.spec.d, "region feature dimension");
    synth->add_option("--regions", sy.spec.regions, "region rows per sample");
    synth->add_option("--noise", sy.spec.noise, "feature noise sigma");
    synth->add_option("--seed", sy.spec.seed, "generator seed");
    synth->add_option("--out", sy.out, "output directory")->required();

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "train a model on a manifest");
    train_cmd->add_option("--data", tr.data, "manifest path")->required();
    train_cmd->add_option("--out", tr.out, "output directory")->required();
    train_cmd->add_option("--config", tr.config_file, "JSON config file (flags win)");
    train_cmd->add_option("--resume", tr.resume, "checkpoint to continue from");
    train_cmd->add_flag("--mask-entities", tr.mask_entities, "drop entity fields");
    train_cmd->add_flag("--mask-demographics", tr.mask_demographics, "drop demographic fields");
    train_cmd->add_option("--u", tr.u, "text hidden dimension");
    train_cmd->add_option("--layers", tr.layers, "encoder layers");
    train_cmd->add_option("--encoder-heads", tr.enc_heads, "encoder attention heads");
    train_cmd->add_option("--fusion-heads", tr.fusion_heads, "cross-attention heads");
    train_cmd->add_option("--visual-dim", tr.visual_dim, "region feature dimension");
    train_cmd->add_option("--latent", tr.latent, "latent units");
    train_cmd->add_option("--tau", tr.tau, "relaxation temperature");
    train_cmd->add_flag("--pick-min", tr.pick_min, "one-hot at the minimum unit");
    train_cmd->add_option("--scale-mode", tr.scale_mode, "head-dim | head-count");
    train_cmd->add_option("--threshold", tr.threshold, "decision threshold");
    train_cmd->add_option("--lr", tr.lr, "learning rate");
    train_cmd->add_option("--batch", tr.batch, "batch size");
    train_cmd->add_option("--mu", tr.mu, "matching-loss weight");
    train_cmd->add_option("--epochs", tr.epochs, "total epochs");
    train_cmd->add_option("--seed", tr.seed, "training + init seed");
    train_cmd->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay");
    train_cmd->add_option("--beta1", tr.beta1, "Adam beta1");
    train_cmd->add_option("--beta2", tr.beta2, "Adam beta2");
    train_cmd->add_option("--eps-adam", tr.eps_adam, "Adam epsilon");
    train_cmd->add_option("--tag", tr.tag, "fhm-like | multioff-like | synthetic");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
    eval_cmd->add_option("--data", ev.data, "manifest path")->required();
    eval_cmd->add_option("--split", ev.split, "train | validation | test")->required();
    eval_cmd->add_option("--lambda", ev.lambda, "decision threshold override");
    eval_cmd->add_option("--format", ev.format, "table | json | both");
    eval_cmd->add_option("--out", ev.out, "write reports/eval_<split>.json here");
    eval_cmd->add_flag("--mask-entities", ev.mask_entities, "drop entity fields");
    eval_cmd->add_flag("--mask-demographics", ev.mask_demographics, "drop demographic fields");

    RetrieveArgs re;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "rank samples against a text query");
    retrieve_cmd->add_option("--checkpoint", re.checkpoint, "checkpoint path")->required();
    retrieve_cmd->add_option("--data", re.data, "manifest path")->required();
    retrieve_cmd->add_option("--query", re.query, "query text")->required();
    retrieve_cmd->add_option("--k", re.k, "results to return");
    retrieve_cmd->add_flag("--mask-entities", re.mask_entities, "drop entity fields");
    retrieve_cmd->add_flag("--mask-demographics", re.mask_demographics, "drop demographic fields");

    std::uint64_t gc_seed = 0;
    bool gc_flip = false;
    auto* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference audit of every gradient path");
    gradcheck_cmd->add_option("--seed", gc_seed, "instance seed");
    gradcheck_cmd->add_flag("--inject-sign-flip", gc_flip,
                            "corrupt the analytic gradients; the audit must then fail");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    try {
        if (synth->parsed()) return cmd_synth(sy);
        if (train_cmd->parsed()) return cmd_train(tr, train_cmd);
        if (eval_cmd->parsed()) return cmd_eval(ev, eval_cmd);
        if (retrieve_cmd->parsed()) return cmd_retrieve(re);
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(gc_seed, gc_flip);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
