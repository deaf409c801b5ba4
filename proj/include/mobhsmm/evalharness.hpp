#pragma once

// Prequential growing-window evaluation: per-subject time-ordered folds,
// train on folds 1..k, validate on fold k+1, score the held-out test set
// each window, report per-window and mean cross-entropy/AUROC.

#include <span>
#include <string>
#include <vector>

#include "mobhsmm/dataio.hpp"
#include "mobhsmm/mobtree.hpp"

namespace mobhsmm::eval {

struct FoldPlan {
    int n_folds = 5;
    std::vector<std::vector<int>> fold_of; // [subject][local position] -> 0-based fold
};

// Cuts every subject's sequence into n_folds contiguous time-ordered chunks
// of length ceil(L/n) or floor(L/n), longer chunks first. Subjects shorter
// than n_folds fill the earliest folds one observation each.
FoldPlan make_folds(const data::Dataset& d, int n_folds);

// Global row indices of folds lo..hi (0-based, inclusive), dataset order.
std::vector<std::size_t> rows_in_folds(const data::Dataset& d, const FoldPlan& plan, int lo,
                                       int hi);

enum class TargetKind { Soft, Outcome };

// Modeling view of a dataset: partition_var features become partition
// columns, leaf_regressor features become regressors, and the fitting
// target is logit(soft_target) or logit(clipped outcome).
tree::TreeData make_tree_data(const data::Dataset& d, std::span<const std::size_t> rows,
                              TargetKind target);
tree::TreeData make_tree_data(const data::Dataset& d, TargetKind target);

struct WindowRow {
    int window = 0; // 1-based; 0 in the mean row
    double train_ce = 0.0, valid_ce = 0.0, test_ce = 0.0;
    double train_auroc = 0.0, valid_auroc = 0.0, test_auroc = 0.0; // NaN = undefined
};

struct PerformanceReport {
    std::vector<WindowRow> rows;
    WindowRow mean; // AUROC means skip undefined cells
    std::vector<std::string> warnings;

    std::string to_text() const;
    std::string to_csv() const;
};

WindowRow mean_row(std::span<const WindowRow> rows);

struct PipelineConfig {
    tree::TreeParams tree_params;
    int n_folds = 5;
    bool single_window = false; // only the last window (train folds 1..n-1)
    TargetKind target = TargetKind::Soft;
};

PerformanceReport run_prequential(const data::Dataset& train, const data::Dataset& test,
                                  const PipelineConfig& config);

} // namespace mobhsmm::eval
