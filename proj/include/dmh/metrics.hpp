#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "dmh/error.hpp"

namespace dmh {

struct EvalPair {
    double score;  // y in [0,1]
    int label;     // 0 or 1
};

struct MetricsReport {
    double accuracy = 0.0;
    std::optional<double> auroc;  // empty when the split has a single class
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    std::size_t n = 0;
};

// hateful iff the score is strictly above the threshold
inline bool predict_label(double y, double lambda) { return y > lambda; }

double accuracy(const std::vector<EvalPair>& pairs, double lambda);

// P(score_pos > score_neg) + 0.5 P(tie), computed by rank-sum with midrank
// ties; needs at least one positive and one negative
double auroc(const std::vector<EvalPair>& pairs);

struct Prf {
    double precision, recall, f1;
};

// per-class precision/recall/F1 averaged with true-class-support weights;
// a class never predicted gets precision 0
Prf weighted_prf(const std::vector<EvalPair>& pairs, double lambda);

// full report; auroc left empty on single-class input instead of failing
MetricsReport compute_metrics(const std::vector<EvalPair>& pairs, double lambda);

}  // namespace dmh
