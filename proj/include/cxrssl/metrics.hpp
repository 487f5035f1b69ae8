#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cxrssl/data.hpp"
#include "cxrssl/errors.hpp"

namespace cxrssl::metrics {

using data::ClassLabel;
using data::kNumClasses;

/// A metric that may be undefined (zero denominator, single-class input).
/// Undefined values carry NaN and `defined == false`; they never read as 0.
struct MetricValue {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool defined = false;

    static MetricValue of(double v) { return {v, true}; }
    static MetricValue undefined() { return {}; }

    /// Undefined values compare equal to each other regardless of payload.
    bool operator==(const MetricValue& o) const { return defined == o.defined && (!defined || value == o.value); }
};

/// counts[true][predicted], class order COVID, LungOpacity, Normal, ViralPneumonia.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& row : counts) {
            t += std::accumulate(row.begin(), row.end(), std::size_t{0});
        }
        return t;
    }
    std::size_t trace() const {
        std::size_t t = 0;
        for (std::size_t i = 0; i < kNumClasses; ++i) {
            t += counts[i][i];
        }
        return t;
    }
    bool operator==(const ConfusionMatrix&) const = default;
};

struct BinaryCounts {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    bool operator==(const BinaryCounts&) const = default;
};

inline ConfusionMatrix confusion(std::span<const ClassLabel> truth, std::span<const ClassLabel> predicted) {
    if (truth.size() != predicted.size()) {
        throw ShapeMismatch("confusion: " + std::to_string(truth.size()) + " labels vs " +
                            std::to_string(predicted.size()) + " predictions");
    }
    ConfusionMatrix cm;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        ++cm.counts[data::index_of(truth[k])][data::index_of(predicted[k])];
    }
    return cm;
}

/// COVID is positive, the other three classes negative.
inline BinaryCounts binarize_covid(const ConfusionMatrix& cm) {
    constexpr std::size_t pos = 0;
    BinaryCounts bc;
    bc.tp = cm.counts[pos][pos];
    for (std::size_t j = 1; j < kNumClasses; ++j) {
        bc.fn += cm.counts[pos][j];
        bc.fp += cm.counts[j][pos];
    }
    bc.tn = cm.total() - bc.tp - bc.fn - bc.fp;
    return bc;
}

/// TP / (TP + FN)
inline MetricValue sensitivity(const BinaryCounts& bc) {
    const std::size_t d = bc.tp + bc.fn;
    return d == 0 ? MetricValue::undefined() : MetricValue::of(static_cast<double>(bc.tp) / static_cast<double>(d));
}

/// TN / (TN + FP)
inline MetricValue specificity(const BinaryCounts& bc) {
    const std::size_t d = bc.tn + bc.fp;
    return d == 0 ? MetricValue::undefined() : MetricValue::of(static_cast<double>(bc.tn) / static_cast<double>(d));
}

/// 2 sen spe / (sen + spe), 0 when either factor is 0.
inline double harmonic_mean(double sen, double spe) {
    if (sen < 0.0 || sen > 1.0 || spe < 0.0 || spe > 1.0) {
        throw UsageError("harmonic_mean expects values in [0, 1]");
    }
    if (sen == 0.0 || spe == 0.0) {
        return 0.0;
    }
    return 2.0 * sen * spe / (sen + spe);
}

inline MetricValue harmonic_mean(const MetricValue& sen, const MetricValue& spe) {
    if (!sen.defined || !spe.defined) {
        return MetricValue::undefined();
    }
    return MetricValue::of(harmonic_mean(sen.value, spe.value));
}

/// trace / total.
inline MetricValue accuracy(const ConfusionMatrix& cm) {
    const std::size_t total = cm.total();
    return total == 0 ? MetricValue::undefined()
                      : MetricValue::of(static_cast<double>(cm.trace()) / static_cast<double>(total));
}

/// Area under the ROC curve as the Mann-Whitney statistic: the share of
/// (positive, negative) pairs where the positive scores higher, ties worth 1/2.
/// `positive` holds 1 for positives and 0 for negatives. Computed from
/// mid-ranks in O(n log n).
inline MetricValue auc(std::span<const double> scores, std::span<const int> positive) {
    if (scores.size() != positive.size()) {
        throw ShapeMismatch("auc: scores and labels differ in length");
    }
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) {
            if (positive[order[k]] != 0) {
                pos_rank_sum += mid_rank;
                ++n_pos;
            }
        }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        return MetricValue::undefined();
    }
    const double np = static_cast<double>(n_pos);
    const double u = pos_rank_sum - np * (np + 1.0) / 2.0;
    return MetricValue::of(u / (np * static_cast<double>(n_neg)));
}

/// Predicted class = argmax; ties go to the lowest class index.
inline ClassLabel argmax_class(std::span<const float> logits) {
    if (logits.size() != kNumClasses) {
        throw ShapeMismatch("expected " + std::to_string(kNumClasses) + " logits");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i) {
        if (logits[i] > logits[best]) {
            best = i;
        }
    }
    return data::class_from_index(best);
}

struct EvalReport {
    ConfusionMatrix confusion;
    BinaryCounts binary;
    MetricValue sen, spe, hm, auc, acc;

    bool operator==(const EvalReport&) const = default;
};

/// Full evaluation protocol for one set of predictions. `covid_scores` are the
/// model's COVID-class probabilities.
inline EvalReport evaluate(std::span<const ClassLabel> truth, std::span<const ClassLabel> predicted,
                           std::span<const double> covid_scores) {
    if (covid_scores.size() != truth.size()) {
        throw ShapeMismatch("evaluate: one COVID score per sample required");
    }
    EvalReport r;
    r.confusion = confusion(truth, predicted);
    r.binary = binarize_covid(r.confusion);
    r.sen = sensitivity(r.binary);
    r.spe = specificity(r.binary);
    r.hm = harmonic_mean(r.sen, r.spe);
    r.acc = accuracy(r.confusion);
    std::vector<int> positive(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        positive[i] = truth[i] == ClassLabel::covid ? 1 : 0;
    }
    r.auc = auc(covid_scores, positive);
    return r;
}

/// Comma-separated confusion matrix with a header row and row labels.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
    std::ostringstream os;
    os << "true\\predicted";
    for (ClassLabel c : data::kAllClasses) {
        os << ',' << data::class_name(c);
    }
    os << '\n';
    for (std::size_t i = 0; i < kNumClasses; ++i) {
        os << data::class_name(data::class_from_index(i));
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            os << ',' << cm.counts[i][j];
        }
        os << '\n';
    }
    return os.str();
}

} // namespace cxrssl::metrics
