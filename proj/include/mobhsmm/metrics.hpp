#pragma once

// Probability/logit transforms and the two evaluation metrics used by the
// pipeline: cross-entropy against teacher probabilities and AUROC against
// hard labels. AUROC is computed from tie-averaged ranks in exact integer
// arithmetic so it matches pairwise counting bit for bit.

#include <optional>
#include <span>
#include <vector>

namespace mobhsmm::metrics {

// Predictions are clipped into [eps, 1-eps] before any log.
inline constexpr double kClipEps = 1e-6;

double clip_probability(double p);

// ln(p'/(1-p')) with p' clipped. NaN input is rejected.
double logit(double p);

double sigmoid(double x);

// Mean of -[y*ln(p') + (1-y)*ln(1-p')] with predictions clipped.
double cross_entropy(std::span<const double> y_soft, std::span<const double> y_hat);

// P(random positive outscores random negative), ties counting 1/2.
// Throws DataError when labels are single-class.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Scores paired with whichever reference signals are available.
struct ScoredLabels {
    std::vector<double> scores;
    std::optional<std::vector<double>> soft_targets;
    std::optional<std::vector<int>> hard_labels;

    void validate() const; // equal lengths, at least one reference present
};

} // namespace mobhsmm::metrics
