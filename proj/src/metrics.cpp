#include "dmh/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace dmh {

namespace {

void require_nonempty(const std::vector<EvalPair>& pairs, const char* op) {
    if (pairs.empty()) throw ContractError(std::string(op) + ": empty input");
    for (const auto& p : pairs)
        if (p.label != 0 && p.label != 1)
            throw ContractError(std::string(op) + ": label must be 0 or 1");
}

}  // namespace

double accuracy(const std::vector<EvalPair>& pairs, double lambda) {
    require_nonempty(pairs, "accuracy");
    std::size_t hits = 0;
    for (const auto& p : pairs)
        if (static_cast<int>(predict_label(p.score, lambda)) == p.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double auroc(const std::vector<EvalPair>& pairs) {
    require_nonempty(pairs, "auroc");
    const std::size_t n = pairs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pairs[a].score < pairs[b].score; });

    // midrank ties, ranks are 1-based
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && pairs[order[j]].score == pairs[order[i]].score) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            if (pairs[order[t]].label == 1) {
                rank_sum_pos += midrank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DomainError("auroc: needs both classes, got " + std::to_string(n_pos) +
                          " positives out of " + std::to_string(n));
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                        static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

Prf weighted_prf(const std::vector<EvalPair>& pairs, double lambda) {
    require_nonempty(pairs, "weighted_prf");
    // confusion counts per class c: tp = predicted c and is c
    double support[2] = {0, 0}, tp[2] = {0, 0}, pred[2] = {0, 0};
    for (const auto& p : pairs) {
        const int d = predict_label(p.score, lambda) ? 1 : 0;
        support[p.label] += 1;
        pred[d] += 1;
        if (d == p.label) tp[d] += 1;
    }
    const double n = static_cast<double>(pairs.size());
    Prf out{0.0, 0.0, 0.0};
    for (int c = 0; c < 2; ++c) {
        if (support[c] == 0) continue;  // zero weight, contributes nothing
        const double prec = pred[c] > 0 ? tp[c] / pred[c] : 0.0;
        const double rec = tp[c] / support[c];
        const double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        const double w = support[c] / n;
        out.precision += w * prec;
        out.recall += w * rec;
        out.f1 += w * f1;
    }
    return out;
}

MetricsReport compute_metrics(const std::vector<EvalPair>& pairs, double lambda) {
    MetricsReport rep;
    rep.n = pairs.size();
    rep.accuracy = accuracy(pairs, lambda);
    const auto prf = weighted_prf(pairs, lambda);
    rep.weighted_precision = prf.precision;
    rep.weighted_recall = prf.recall;
    rep.weighted_f1 = prf.f1;
    bool has0 = false, has1 = false;
    for (const auto& p : pairs) (p.label ? has1 : has0) = true;
    if (has0 && has1) rep.auroc = auroc(pairs);
    return rep;
}

}  // namespace dmh
