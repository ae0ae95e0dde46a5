#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dmh/error.hpp"
#include "dmh/features.hpp"

namespace dmh {

struct MemeSample {
    std::string id;
    int label = 0;  // 1 = hateful
    std::string text_ocr;
    std::vector<std::string> entities;
    std::vector<std::string> demographics;
    std::string feature_file;  // relative to the manifest directory
    std::string split;         // train | validation | test
    RegionFeatures features;   // resolved at load time

    // tokenizer input: ocr first, then entity and demographic groups
    std::vector<std::string> text_fields() const {
        std::vector<std::string> f = {text_ocr};
        f.insert(f.end(), entities.begin(), entities.end());
        f.insert(f.end(), demographics.begin(), demographics.end());
        return f;
    }
};

struct FieldMask {
    bool use_entities = true;
    bool use_demographics = true;
};

struct SplitCounts {
    struct PerSplit {
        std::size_t hateful = 0;
        std::size_t non_hateful = 0;
    };
    std::map<std::string, PerSplit> by_split;
};

struct Dataset {
    std::vector<MemeSample> samples;  // manifest order
    std::vector<std::size_t> split_indices(const std::string& split) const;
    SplitCounts counts() const;
    static const std::vector<std::string>& valid_splits();
};

// JSONL manifest, one record per line; masked fields are dropped before they
// ever reach tokenization. Feature files load eagerly relative to `path`.
Dataset load_manifest(const std::string& path, const FieldMask& mask = {},
                      bool load_features = true);

void write_manifest(const std::string& path, const std::vector<MemeSample>& samples);

struct SynthSpec {
    std::size_t k = 4;                // planted categories
    std::size_t train_per_class = 16; // per label class
    std::size_t val_per_class = 4;
    std::size_t test_per_class = 4;
    std::size_t cue_tokens = 2;       // category words planted in the text
    std::size_t d = 16;               // region feature dim, must be >= k
    std::size_t regions = 4;
    double noise = 0.1;               // sigma for feature noise
    std::uint64_t seed = 0;
};

// Plants a hidden category in both modalities. Each category reacts to the
// polarity word in its own way (immune, always hateful, hateful under attack,
// hateful under praise), so the label is predictable only from the pair and
// the classifier must recover the full category identity.
// Writes manifest.jsonl, truth.jsonl, spec.json and features/ under out_dir.
void generate_synthetic(const SynthSpec& spec, const std::string& out_dir);

// id -> planted category
std::map<std::string, std::size_t> load_truth(const std::string& path);

struct LatentAssignment {
    std::string id;
    std::size_t text_unit;    // argmax of the hard text representation
    std::size_t visual_unit;  // argmax of the visual unit probabilities
};

struct DisentScore {
    double agreement;  // fraction with text_unit == visual_unit
    double purity;     // mean majority-category mass of the text-unit clusters
};

DisentScore score_disentanglement(const std::map<std::string, std::size_t>& truth,
                                  const std::vector<LatentAssignment>& outputs);

}  // namespace dmh
