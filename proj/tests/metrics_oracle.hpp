#pragma once

// Brute-force reference computations for the evaluation metrics; test-only.

#include <algorithm>
#include <map>
#include <vector>

#include "cxrssl/data.hpp"

namespace cxrssl::testing {

struct BruteForceBinary {
    double sen = 0, spe = 0, hm = 0, acc = 0;
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
};

/// Binarizes every sample individually (COVID vs rest) and counts.
inline BruteForceBinary brute_force_metrics(const std::vector<data::ClassLabel>& truth,
                                            const std::vector<data::ClassLabel>& pred) {
    BruteForceBinary r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool t = truth[i] == data::ClassLabel::covid;
        const bool p = pred[i] == data::ClassLabel::covid;
        r.tp += t && p;
        r.fn += t && !p;
        r.fp += !t && p;
        r.tn += !t && !p;
        correct += truth[i] == pred[i];
    }
    r.sen = double(r.tp) / double(r.tp + r.fn);
    r.spe = double(r.tn) / double(r.tn + r.fp);
    r.hm = (r.sen == 0 || r.spe == 0) ? 0.0 : 2 * r.sen * r.spe / (r.sen + r.spe);
    r.acc = double(correct) / double(truth.size());
    return r;
}

/// Counts every (positive, negative) pair directly.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0;
    double pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 0) {
            continue;
        }
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) {
                continue;
            }
            pairs += 1;
            wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

/// Trapezoidal integration of the ROC curve traced by sweeping the threshold
/// over the distinct scores from high to low.
inline double roc_trapezoid_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::map<double, std::pair<std::size_t, std::size_t>, std::greater<>> groups; // score -> (pos, neg)
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto& g = groups[scores[i]];
        if (labels[i] != 0) {
            ++g.first;
            ++n_pos;
        } else {
            ++g.second;
            ++n_neg;
        }
    }
    double area = 0, tpr = 0, fpr = 0;
    for (const auto& [score, g] : groups) {
        const double next_tpr = tpr + double(g.first) / double(n_pos);
        const double next_fpr = fpr + double(g.second) / double(n_neg);
        area += (next_fpr - fpr) * (tpr + next_tpr) / 2.0;
        tpr = next_tpr;
        fpr = next_fpr;
    }
    return area;
}

} // namespace cxrssl::testing
