#include "mobhsmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mobhsmm/error.hpp"

namespace mobhsmm::metrics {

double clip_probability(double p) {
    return std::min(1.0 - kClipEps, std::max(kClipEps, p));
}

double logit(double p) {
    if (std::isnan(p)) throw DataError("logit of NaN");
    double c = clip_probability(p);
    return std::log(c / (1.0 - c));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double cross_entropy(std::span<const double> y_soft, std::span<const double> y_hat) {
    if (y_soft.size() != y_hat.size())
        throw DataError("cross_entropy: length mismatch (" + std::to_string(y_soft.size()) + " vs " +
                        std::to_string(y_hat.size()) + ")");
    if (y_soft.empty()) throw DataError("cross_entropy: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < y_soft.size(); ++i) {
        double p = clip_probability(y_hat[i]);
        acc -= y_soft[i] * std::log(p) + (1.0 - y_soft[i]) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(y_soft.size());
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DataError("auroc: length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) throw DataError("auroc: labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(l);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("AUROC undefined: single-class labels");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Twice the positive rank-sum stays an exact integer (tie-averaged ranks
    // are multiples of 1/2), which makes the result identical to O(n^2)
    // pairwise counting.
    unsigned long long twice_rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        // Ranks i+1..j (1-based); tied block shares the average rank.
        unsigned long long twice_avg_rank = static_cast<unsigned long long>(i + 1 + j);
        std::size_t block_pos = 0;
        for (std::size_t k = i; k < j; ++k) block_pos += static_cast<std::size_t>(labels[order[k]]);
        twice_rank_sum_pos += twice_avg_rank * block_pos;
        i = j;
    }
    unsigned long long twice_u =
        twice_rank_sum_pos - static_cast<unsigned long long>(n_pos) * (n_pos + 1);
    return static_cast<double>(twice_u) /
           (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

void ScoredLabels::validate() const {
    if (!soft_targets && !hard_labels)
        throw DataError("scored labels need soft targets or hard labels");
    if (soft_targets && soft_targets->size() != scores.size())
        throw DataError("scored labels: soft target length mismatch");
    if (hard_labels && hard_labels->size() != scores.size())
        throw DataError("scored labels: hard label length mismatch");
}

} // namespace mobhsmm::metrics
