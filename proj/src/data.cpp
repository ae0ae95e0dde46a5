#include "dmh/data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dmh/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace dmh {

const std::vector<std::string>& Dataset::valid_splits() {
    static const std::vector<std::string> splits = {"train", "validation", "test"};
    return splits;
}

std::vector<std::size_t> Dataset::split_indices(const std::string& split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == split) out.push_back(i);
    return out;
}

SplitCounts Dataset::counts() const {
    SplitCounts c;
    for (const auto& s : samples) {
        auto& per = c.by_split[s.split];
        (s.label ? per.hateful : per.non_hateful) += 1;
    }
    return c;
}

namespace {

std::string line_ctx(const std::string& path, std::size_t line_no) {
    return path + ": line " + std::to_string(line_no);
}

const json& field(const json& rec, const char* name, const std::string& ctx) {
    auto it = rec.find(name);
    if (it == rec.end()) throw FormatError(ctx + ": missing field " + name);
    return *it;
}

std::vector<std::string> string_list(const json& j, const char* name, const std::string& ctx) {
    if (!j.is_array()) throw FormatError(ctx + ": field " + name + " must be a list");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw FormatError(ctx + ": field " + name + " must hold strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

Dataset load_manifest(const std::string& path, const FieldMask& mask, bool load_features) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest " + path);
    const fs::path base = fs::path(path).parent_path();

    Dataset ds;
    std::set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string ctx = line_ctx(path, line_no);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(ctx + ": malformed JSON: " + e.what());
        }
        if (!rec.is_object()) throw FormatError(ctx + ": record is not an object");

        MemeSample s;
        const auto& idj = field(rec, "id", ctx);
        if (!idj.is_string()) throw FormatError(ctx + ": field id must be a string");
        s.id = idj.get<std::string>();
        if (!seen_ids.insert(s.id).second)
            throw FormatError(ctx + ": duplicate id " + s.id);

        const auto& lj = field(rec, "label", ctx);
        if (!lj.is_number_integer() || (lj.get<int>() != 0 && lj.get<int>() != 1))
            throw FormatError(ctx + ": field label must be 0 or 1");
        s.label = lj.get<int>();

        const auto& tj = field(rec, "text_ocr", ctx);
        if (!tj.is_string()) throw FormatError(ctx + ": field text_ocr must be a string");
        s.text_ocr = tj.get<std::string>();

        s.entities = string_list(field(rec, "entities", ctx), "entities", ctx);
        s.demographics =
            string_list(field(rec, "demographics", ctx), "demographics", ctx);
        if (!mask.use_entities) s.entities.clear();
        if (!mask.use_demographics) s.demographics.clear();

        const auto& fj = field(rec, "feature_file", ctx);
        if (!fj.is_string()) throw FormatError(ctx + ": field feature_file must be a string");
        s.feature_file = fj.get<std::string>();

        const auto& sj = field(rec, "split", ctx);
        if (!sj.is_string()) throw FormatError(ctx + ": field split must be a string");
        s.split = sj.get<std::string>();
        const auto& splits = Dataset::valid_splits();
        if (std::find(splits.begin(), splits.end(), s.split) == splits.end())
            throw FormatError(ctx + ": unknown split " + s.split);

        if (load_features) s.features = load_region_features((base / s.feature_file).string());
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_manifest(const std::string& path, const std::vector<MemeSample>& samples) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot write manifest " + path);
    for (const auto& s : samples) {
        ojson rec;
        rec["id"] = s.id;
        rec["label"] = s.label;
        rec["text_ocr"] = s.text_ocr;
        rec["entities"] = s.entities;
        rec["demographics"] = s.demographics;
        rec["feature_file"] = s.feature_file;
        rec["split"] = s.split;
        os << rec.dump() << '\n';
    }
    if (!os) throw IoError("write failed for " + path);
}

// Each planted category reacts to the polarity word in its own way: immune,
// always hateful, hateful when attacked, hateful when praised (ironic).  A
// classifier therefore has to resolve the full category identity, not just
// some binary shadow of it, before it can use the polarity cue.
static int hateful_given(std::size_t category, int attack) {
    switch (category % 4) {
        case 0: return 0;
        case 1: return 1;
        case 2: return attack;
        default: return 1 - attack;
    }
}

void generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
    if (spec.k < 2) throw ContractError("SynthSpec: k must be >= 2");
    if (spec.d < spec.k) throw ContractError("SynthSpec: d must be >= k");
    if (spec.regions < 1 || spec.cue_tokens < 1)
        throw ContractError("SynthSpec: regions and cue_tokens must be >= 1");
    if (spec.train_per_class < 1 || spec.val_per_class < 1 || spec.test_per_class < 1)
        throw ContractError("SynthSpec: per-class counts must be >= 1");
    if (spec.noise < 0.0) throw ContractError("SynthSpec: noise must be >= 0");

    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "features", ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

    const RngStream base(spec.seed);
    std::vector<MemeSample> records;
    std::vector<std::pair<std::string, std::size_t>> truth;

    const std::pair<const char*, std::size_t> splits[] = {
        {"train", spec.train_per_class},
        {"validation", spec.val_per_class},
        {"test", spec.test_per_class},
    };
    for (const auto& [split, count] : splits) {
        for (int label = 0; label <= 1; ++label) {
            // all (category, polarity) pairs that produce this label
            std::vector<std::pair<std::size_t, int>> combos;
            for (std::size_t c = 0; c < spec.k; ++c)
                for (int attack = 0; attack <= 1; ++attack)
                    if (hateful_given(c, attack) == label) combos.emplace_back(c, attack);
            for (std::size_t i = 0; i < count; ++i) {
                std::ostringstream ids;
                ids << split << '_' << label << '_';
                ids.width(5);
                ids.fill('0');
                ids << i;
                const std::string id = ids.str();
                RngStream srng = base.derive(RngStream::hash_string(id));

                const auto [c, polarity] = combos[srng.next_index(combos.size())];

                // two cue word types per category; higher cue counts repeat
                // them, which keeps the category's aggregate footprint in a
                // pooled representation coherent instead of averaging away
                std::vector<std::string> words;
                for (std::size_t t = 0; t < spec.cue_tokens; ++t)
                    words.push_back("topic" + std::to_string(c) +
                                    std::string(1, static_cast<char>('a' + t % 2)));
                words.push_back(polarity ? "attack" : "praise");
                const std::size_t extra = 2 + srng.next_index(2);
                for (std::size_t t = 0; t < extra; ++t)
                    words.push_back("filler" + std::to_string(srng.next_index(8)));
                for (std::size_t t = words.size(); t > 1; --t)
                    std::swap(words[t - 1], words[srng.next_index(t)]);

                MemeSample s;
                s.id = id;
                s.label = label;
                for (std::size_t t = 0; t < words.size(); ++t)
                    s.text_ocr += (t ? " " : "") + words[t];
                s.entities = {"entity" + std::to_string(c)};
                s.demographics = {"group" + std::to_string(c)};
                s.split = split;
                s.feature_file = "features/" + id + ".dmhf";

                RegionFeatures rf;
                rf.n = static_cast<std::uint32_t>(spec.regions);
                rf.d = static_cast<std::uint32_t>(spec.d);
                rf.values.assign(std::size_t(rf.n) * rf.d, 0.0);
                const std::size_t planted = srng.next_index(spec.regions);
                for (std::size_t r = 0; r < spec.regions; ++r) {
                    for (std::size_t j = 0; j < spec.d; ++j) {
                        const double signal = (r == planted && j == c) ? 1.0 : 0.0;
                        rf.values[r * spec.d + j] = signal + spec.noise * srng.normal();
                    }
                }
                write_region_features((fs::path(out_dir) / s.feature_file).string(), rf);

                truth.emplace_back(id, c);
                records.push_back(std::move(s));
            }
        }
    }

    write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), records);

    std::ofstream ts((fs::path(out_dir) / "truth.jsonl").string(), std::ios::trunc);
    if (!ts) throw IoError("cannot write truth sidecar in " + out_dir);
    for (const auto& [id, c] : truth) {
        ojson rec;
        rec["id"] = id;
        rec["category"] = c;
        ts << rec.dump() << '\n';
    }

    ojson sj;
    sj["k"] = spec.k;
    sj["train_per_class"] = spec.train_per_class;
    sj["val_per_class"] = spec.val_per_class;
    sj["test_per_class"] = spec.test_per_class;
    sj["cue_tokens"] = spec.cue_tokens;
    sj["d"] = spec.d;
    sj["regions"] = spec.regions;
    sj["noise"] = spec.noise;
    sj["seed"] = spec.seed;
    std::ofstream ss((fs::path(out_dir) / "spec.json").string(), std::ios::trunc);
    if (!ss) throw IoError("cannot write spec.json in " + out_dir);
    ss << sj.dump(2) << '\n';
}

std::map<std::string, std::size_t> load_truth(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open truth sidecar " + path);
    std::map<std::string, std::size_t> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string ctx = line_ctx(path, line_no);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw FormatError(ctx + ": malformed JSON: " + e.what());
        }
        const auto& idj = field(rec, "id", ctx);
        const auto& cj = field(rec, "category", ctx);
        if (!idj.is_string() || !cj.is_number_unsigned())
            throw FormatError(ctx + ": expected string id and unsigned category");
        if (!out.emplace(idj.get<std::string>(), cj.get<std::size_t>()).second)
            throw FormatError(ctx + ": duplicate id " + idj.get<std::string>());
    }
    return out;
}

DisentScore score_disentanglement(const std::map<std::string, std::size_t>& truth,
                                  const std::vector<LatentAssignment>& outputs) {
    if (outputs.size() != truth.size())
        throw ContractError("score_disentanglement: " + std::to_string(outputs.size()) +
                            " outputs for " + std::to_string(truth.size()) + " truth ids");
    std::size_t agree = 0;
    std::map<std::size_t, std::map<std::size_t, std::size_t>> unit_hist;  // unit -> cat -> n
    std::set<std::string> seen;
    for (const auto& o : outputs) {
        auto it = truth.find(o.id);
        if (it == truth.end())
            throw ContractError("score_disentanglement: id " + o.id + " not in truth");
        if (!seen.insert(o.id).second)
            throw ContractError("score_disentanglement: duplicate id " + o.id);
        if (o.text_unit == o.visual_unit) ++agree;
        unit_hist[o.text_unit][it->second] += 1;
    }
    std::size_t majority_total = 0;
    for (const auto& [unit, hist] : unit_hist) {
        std::size_t best = 0;
        for (const auto& [cat, n] : hist) best = std::max(best, n);
        majority_total += best;
    }
    const double n = static_cast<double>(outputs.size());
    return {static_cast<double>(agree) / n, static_cast<double>(majority_total) / n};
}

}  // namespace dmh
