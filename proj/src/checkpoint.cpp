#include "dmh/checkpoint.hpp"

#include <fstream>

#include "dmh/wire.hpp"

namespace dmh {

namespace {

constexpr std::uint64_t kVersion = 1;

std::string scale_mode_name(ScaleMode m) {
    return m == ScaleMode::HeadDim ? "head-dim" : "head-count";
}

ScaleMode scale_mode_from_name(const std::string& s) {
    if (s == "head-dim") return ScaleMode::HeadDim;
    if (s == "head-count") return ScaleMode::HeadCount;
    throw FormatError("unknown scale mode \"" + s + "\"");
}

}  // namespace

ojson model_config_to_json(const ModelConfig& cfg) {
    return ojson{
        {"encoder",
         {{"u", cfg.encoder.u},
          {"layers", cfg.encoder.layers},
          {"heads", cfg.encoder.heads},
          {"vocab_size", cfg.encoder.vocab_size}}},
        {"fusion",
         {{"heads", cfg.fusion.heads},
          {"u", cfg.fusion.u},
          {"d", cfg.fusion.d},
          {"scale_mode", scale_mode_name(cfg.fusion.scale_mode)}}},
        {"disentangle",
         {{"latent", cfg.disentangle.latent},
          {"tau", cfg.disentangle.tau},
          {"pick_min", cfg.disentangle.pick_min}}},
        {"threshold", cfg.threshold},
        {"mu", cfg.mu},
    };
}

ModelConfig model_config_from_json(const ojson& j) {
    try {
        ModelConfig cfg;
        const auto& e = j.at("encoder");
        cfg.encoder.u = e.at("u").get<std::size_t>();
        cfg.encoder.layers = e.at("layers").get<std::size_t>();
        cfg.encoder.heads = e.at("heads").get<std::size_t>();
        cfg.encoder.vocab_size = e.at("vocab_size").get<std::size_t>();
        const auto& f = j.at("fusion");
        cfg.fusion.heads = f.at("heads").get<std::size_t>();
        cfg.fusion.u = f.at("u").get<std::size_t>();
        cfg.fusion.d = f.at("d").get<std::size_t>();
        cfg.fusion.scale_mode = scale_mode_from_name(f.at("scale_mode").get<std::string>());
        const auto& d = j.at("disentangle");
        cfg.disentangle.latent = d.at("latent").get<std::size_t>();
        cfg.disentangle.tau = d.at("tau").get<double>();
        cfg.disentangle.pick_min = d.at("pick_min").get<bool>();
        cfg.threshold = j.at("threshold").get<double>();
        cfg.mu = j.at("mu").get<double>();
        return cfg;
    } catch (const ojson::exception& e) {
        throw FormatError(std::string("bad model config: ") + e.what());
    }
}

ModelConfig model_config_overlay(const ojson& j, ModelConfig base) {
    try {
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            if (e.contains("u")) base.encoder.u = e.at("u").get<std::size_t>();
            if (e.contains("layers")) base.encoder.layers = e.at("layers").get<std::size_t>();
            if (e.contains("heads")) base.encoder.heads = e.at("heads").get<std::size_t>();
            if (e.contains("vocab_size"))
                base.encoder.vocab_size = e.at("vocab_size").get<std::size_t>();
        }
        if (j.contains("fusion")) {
            const auto& f = j.at("fusion");
            if (f.contains("heads")) base.fusion.heads = f.at("heads").get<std::size_t>();
            if (f.contains("u")) base.fusion.u = f.at("u").get<std::size_t>();
            if (f.contains("d")) base.fusion.d = f.at("d").get<std::size_t>();
            if (f.contains("scale_mode"))
                base.fusion.scale_mode = scale_mode_from_name(f.at("scale_mode").get<std::string>());
        }
        if (j.contains("disentangle")) {
            const auto& d = j.at("disentangle");
            if (d.contains("latent")) base.disentangle.latent = d.at("latent").get<std::size_t>();
            if (d.contains("tau")) base.disentangle.tau = d.at("tau").get<double>();
            if (d.contains("pick_min")) base.disentangle.pick_min = d.at("pick_min").get<bool>();
        }
        if (j.contains("threshold")) base.threshold = j.at("threshold").get<double>();
        if (j.contains("mu")) base.mu = j.at("mu").get<double>();
        return base;
    } catch (const ojson::exception& e) {
        throw FormatError(std::string("bad model config: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    ojson tensors = ojson::object();
    std::size_t offset = 0;
    for (const auto& [name, t] : ck.tensors) {
        if (t.second.size() != shape_numel(t.first))
            throw ContractError("save_checkpoint: tensor " + name +
                                " value count does not match its shape");
        tensors[name] = ojson{{"shape", t.first}, {"offset", offset}};
        offset += t.second.size() * 8;
    }
    const ojson header{
        {"version", kVersion},
        {"config", model_config_to_json(ck.config)},
        {"vocab", ck.vocab_tokens},
        {"tensors", tensors},
        {"meta", ck.meta.is_null() ? ojson::object() : ck.meta},
    };
    const std::string head = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint " + path);
    unsigned char len[8];
    wire::write_u64(len, head.size());
    os.write(reinterpret_cast<const char*>(len), 8);
    os.write(head.data(), static_cast<std::streamsize>(head.size()));
    std::vector<unsigned char> buf(offset);
    std::size_t pos = 0;
    for (const auto& [name, t] : ck.tensors)
        for (double x : t.second) {
            wire::write_f64(buf.data() + pos, x);
            pos += 8;
        }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw IoError("write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw FormatError(path + ": truncated length prefix at offset 0");
    const std::uint64_t head_len = wire::read_u64(bytes.data());
    if (bytes.size() - 8 < head_len)
        throw FormatError(path + ": truncated header: need " + std::to_string(head_len) +
                          " bytes, have " + std::to_string(bytes.size() - 8));

    ojson header;
    try {
        header = ojson::parse(bytes.begin() + 8, bytes.begin() + 8 + head_len);
    } catch (const ojson::parse_error& e) {
        throw FormatError(path + ": malformed header: " + e.what());
    }

    Checkpoint ck;
    try {
        const auto version = header.at("version").get<std::uint64_t>();
        if (version != kVersion)
            throw FormatError(path + ": unsupported version " + std::to_string(version));
        ck.config = model_config_from_json(header.at("config"));
        ck.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
        ck.meta = header.value("meta", ojson::object());

        const unsigned char* payload = bytes.data() + 8 + head_len;
        const std::size_t payload_size = bytes.size() - 8 - head_len;
        for (const auto& [name, tj] : header.at("tensors").items()) {
            auto shape = tj.at("shape").get<std::vector<std::size_t>>();
            const auto offset = tj.at("offset").get<std::size_t>();
            const std::size_t n = shape_numel(shape);
            if (offset > payload_size || n * 8 > payload_size - offset)
                throw FormatError(path + ": tensor " + name + " overruns the payload");
            std::vector<double> values(n);
            for (std::size_t i = 0; i < n; ++i)
                values[i] = wire::read_f64(payload + offset + i * 8);
            ck.tensors.emplace(name, std::make_pair(std::move(shape), std::move(values)));
        }
    } catch (const ojson::exception& e) {
        throw FormatError(path + ": bad header: " + e.what());
    }
    return ck;
}

Checkpoint snapshot_model(const Model& model) {
    Checkpoint ck;
    ck.config = model.config;
    ck.vocab_tokens = model.vocab.tokens();
    for (const auto& [name, node] : model.params)
        ck.tensors.emplace(name, std::make_pair(node->shape, node->values));
    return ck;
}

Model model_from_checkpoint(const Checkpoint& ck) {
    Model m = make_model(ck.config, Vocab::from_tokens(ck.vocab_tokens), 0);
    for (const auto& name : m.params.names()) {
        const auto it = ck.tensors.find(name);
        if (it == ck.tensors.end()) throw FormatError("checkpoint is missing tensor " + name);
        const auto& node = m.params.get(name);
        if (it->second.first != node->shape)
            throw FormatError("checkpoint tensor " + name + " has shape " +
                              shape_str(it->second.first) + ", model expects " +
                              shape_str(node->shape));
        node->values = it->second.second;
    }
    return m;
}

}  // namespace dmh
