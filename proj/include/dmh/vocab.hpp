#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "dmh/error.hpp"

namespace dmh {

// fixed sequence length, CLS included
inline constexpr std::size_t kSeqLen = 64;

// lowercase + whitespace split
inline std::vector<std::string> normalize_words(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

class Vocab {
public:
    static constexpr std::uint32_t PAD = 0, CLS = 1, UNK = 2, SEP = 3;

    Vocab() {
        for (const char* t : {"<pad>", "<cls>", "<unk>", "<sep>"}) intern(t);
    }

    std::uint32_t intern(const std::string& token) {
        auto it = map_.find(token);
        if (it != map_.end()) return it->second;
        const auto id = static_cast<std::uint32_t>(tokens_.size());
        map_.emplace(token, id);
        tokens_.push_back(token);
        return id;
    }

    // add every word of every field; call over the training split only
    void absorb(const std::vector<std::string>& fields) {
        for (const auto& f : fields)
            for (const auto& w : normalize_words(f)) intern(w);
    }

    std::uint32_t id_of(const std::string& token) const {
        auto it = map_.find(token);
        return it == map_.end() ? UNK : it->second;
    }

    const std::string& token_of(std::uint32_t id) const {
        if (id >= tokens_.size()) throw ContractError("Vocab: id out of range");
        return tokens_[id];
    }

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    // rebuild from an id-ordered token list (checkpoint reload)
    static Vocab from_tokens(const std::vector<std::string>& tokens) {
        Vocab v;
        if (tokens.size() < 4) throw FormatError("Vocab: token list missing reserved entries");
        for (std::size_t i = 4; i < tokens.size(); ++i) {
            const auto id = v.intern(tokens[i]);
            if (id != i) throw FormatError("Vocab: duplicate token " + tokens[i]);
        }
        return v;
    }

private:
    std::unordered_map<std::string, std::uint32_t> map_;
    std::vector<std::string> tokens_;
};

struct TokenSeq {
    std::vector<std::uint32_t> ids;   // length kSeqLen, ids[0] = CLS
    std::vector<std::uint8_t> mask;   // 1 = real token (incl. CLS), 0 = PAD
    std::size_t real_len() const {
        std::size_t n = 0;
        while (n < mask.size() && mask[n]) ++n;
        return n;
    }
};

// Joins non-empty field groups with SEP, prepends CLS, truncates/pads to
// kSeqLen. Field order is (ocr text, entities..., demographics...).
inline TokenSeq tokenize(const std::vector<std::string>& fields, const Vocab& vocab) {
    std::vector<std::uint32_t> stream;
    bool any = false;
    for (const auto& f : fields) {
        auto words = normalize_words(f);
        if (words.empty()) continue;
        if (any) stream.push_back(Vocab::SEP);
        for (const auto& w : words) stream.push_back(vocab.id_of(w));
        any = true;
    }
    TokenSeq seq;
    seq.ids.assign(kSeqLen, Vocab::PAD);
    seq.mask.assign(kSeqLen, 0);
    seq.ids[0] = Vocab::CLS;
    seq.mask[0] = 1;
    const std::size_t take = std::min(stream.size(), kSeqLen - 1);
    for (std::size_t i = 0; i < take; ++i) {
        seq.ids[i + 1] = stream[i];
        seq.mask[i + 1] = 1;
    }
    return seq;
}

}  // namespace dmh
