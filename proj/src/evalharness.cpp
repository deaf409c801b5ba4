#include "mobhsmm/evalharness.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "mobhsmm/csv.hpp"
#include "mobhsmm/error.hpp"
#include "mobhsmm/metrics.hpp"
#include "mobhsmm/rng.hpp"

namespace mobhsmm::eval {

FoldPlan make_folds(const data::Dataset& d, int n_folds) {
    if (n_folds < 2) throw DataError("n_folds must be at least 2");
    if (d.subjects.empty()) throw DataError("empty dataset");
    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.fold_of.reserve(d.subjects.size());
    for (const auto& s : d.subjects) {
        const std::size_t len = s.length();
        const std::size_t q = len / static_cast<std::size_t>(n_folds);
        const std::size_t r = len % static_cast<std::size_t>(n_folds);
        std::vector<int> fold_of;
        fold_of.reserve(len);
        for (int f = 0; f < n_folds; ++f) {
            std::size_t size = q + (static_cast<std::size_t>(f) < r ? 1 : 0);
            fold_of.insert(fold_of.end(), size, f);
        }
        plan.fold_of.push_back(std::move(fold_of));
    }
    return plan;
}

std::vector<std::size_t> rows_in_folds(const data::Dataset& d, const FoldPlan& plan, int lo,
                                       int hi) {
    if (plan.fold_of.size() != d.subjects.size())
        throw DataError("fold plan does not match the dataset");
    std::vector<std::size_t> rows;
    for (std::size_t si = 0; si < d.subjects.size(); ++si) {
        const auto& s = d.subjects[si];
        const auto& fold_of = plan.fold_of[si];
        for (std::size_t local = 0; local < fold_of.size(); ++local)
            if (fold_of[local] >= lo && fold_of[local] <= hi) rows.push_back(s.begin + local);
    }
    return rows;
}

tree::TreeData make_tree_data(const data::Dataset& d, std::span<const std::size_t> rows,
                              TargetKind target) {
    if (target == TargetKind::Soft && !d.has_soft)
        throw DataError("dataset has no soft_target column");

    tree::TreeData td;
    for (const auto& f : d.features) {
        if (!f.has(data::Role::PartitionVar) && !f.has(data::Role::LeafRegressor)) continue;
        tree::Column col;
        col.name = f.name;
        col.categorical = f.categorical;
        col.categories = f.categories;
        col.values.reserve(rows.size());
        for (std::size_t row : rows) col.values.push_back(f.values[row]);
        if (f.has(data::Role::PartitionVar)) td.partition_vars.push_back(col);
        if (f.has(data::Role::LeafRegressor)) td.regressors.push_back(std::move(col));
    }
    td.target.reserve(rows.size());
    td.outcome.reserve(rows.size());
    for (std::size_t row : rows) {
        td.outcome.push_back(static_cast<double>(d.outcome[row]));
        if (target == TargetKind::Soft) {
            if (d.soft_missing[row])
                throw DataError("soft_target missing at row " + std::to_string(row + 1));
            td.target.push_back(metrics::logit(d.soft[row]));
        } else {
            td.target.push_back(metrics::logit(static_cast<double>(d.outcome[row])));
        }
    }
    return td;
}

tree::TreeData make_tree_data(const data::Dataset& d, TargetKind target) {
    std::vector<std::size_t> rows(d.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    return make_tree_data(d, rows, target);
}

namespace {

struct Cells {
    double ce = 0.0;
    double auroc = std::numeric_limits<double>::quiet_NaN();
};

// targets on the probability scale; labels are the binary outcome.
Cells score_rows(const tree::MobTree& t, const tree::TreeData& td,
                 std::span<const double> prob_targets, const std::string& what,
                 std::vector<std::string>& warnings) {
    const std::size_t n = td.n_rows();
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = metrics::sigmoid(t.predict(td, i));
    Cells cells;
    cells.ce = metrics::cross_entropy(prob_targets, probs);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(td.outcome[i]);
    try {
        cells.auroc = metrics::auroc(probs, labels);
    } catch (const DataError&) {
        warnings.push_back(what + " AUROC undefined (single-class labels); excluded from mean");
    }
    return cells;
}

std::vector<double> prob_targets_of(const data::Dataset& d, std::span<const std::size_t> rows,
                                    TargetKind target) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t row : rows)
        out.push_back(target == TargetKind::Soft ? d.soft[row]
                                                 : static_cast<double>(d.outcome[row]));
    return out;
}

double mean_defined(std::span<const double> v) {
    double total = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (!std::isnan(x)) {
            total += x;
            ++n;
        }
    return n ? total / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

std::string cell_text(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string cell_csv(double v) { return std::isnan(v) ? "NA" : csv::format_double(v); }

} // namespace

WindowRow mean_row(std::span<const WindowRow> rows) {
    WindowRow m;
    if (rows.empty()) return m;
    std::vector<double> tc, vc, ec, ta, va, ea;
    for (const auto& r : rows) {
        tc.push_back(r.train_ce);
        vc.push_back(r.valid_ce);
        ec.push_back(r.test_ce);
        ta.push_back(r.train_auroc);
        va.push_back(r.valid_auroc);
        ea.push_back(r.test_auroc);
    }
    auto mean_all = [](std::span<const double> v) {
        double total = 0.0;
        for (double x : v) total += x;
        return total / static_cast<double>(v.size());
    };
    m.train_ce = mean_all(tc);
    m.valid_ce = mean_all(vc);
    m.test_ce = mean_all(ec);
    m.train_auroc = mean_defined(ta);
    m.valid_auroc = mean_defined(va);
    m.test_auroc = mean_defined(ea);
    return m;
}

std::string PerformanceReport::to_text() const {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %12s %12s %12s\n", "window", "ce_train",
                  "ce_valid", "ce_test", "auroc_train", "auroc_valid", "auroc_test");
    out << line;
    auto emit = [&](const std::string& id, const WindowRow& r) {
        std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %12s %12s %12s\n", id.c_str(),
                      cell_text(r.train_ce).c_str(), cell_text(r.valid_ce).c_str(),
                      cell_text(r.test_ce).c_str(), cell_text(r.train_auroc).c_str(),
                      cell_text(r.valid_auroc).c_str(), cell_text(r.test_auroc).c_str());
        out << line;
    };
    for (const auto& r : rows) emit(std::to_string(r.window), r);
    emit("mean", mean);
    return out.str();
}

std::string PerformanceReport::to_csv() const {
    std::ostringstream out;
    out << "window,ce_train,ce_valid,ce_test,auroc_train,auroc_valid,auroc_test\n";
    auto emit = [&](const std::string& id, const WindowRow& r) {
        out << id << ',' << cell_csv(r.train_ce) << ',' << cell_csv(r.valid_ce) << ','
            << cell_csv(r.test_ce) << ',' << cell_csv(r.train_auroc) << ','
            << cell_csv(r.valid_auroc) << ',' << cell_csv(r.test_auroc) << '\n';
    };
    for (const auto& r : rows) emit(std::to_string(r.window), r);
    emit("mean", mean);
    return out.str();
}

PerformanceReport run_prequential(const data::Dataset& train, const data::Dataset& test,
                                  const PipelineConfig& config) {
    if (train.schema.to_json_text() != test.schema.to_json_text())
        throw DataError("train and test schemas differ");
    if (config.target == TargetKind::Soft && (!train.has_soft || !test.has_soft))
        throw DataError("dataset has no soft_target column");

    FoldPlan plan = make_folds(train, config.n_folds);
    PerformanceReport report;

    tree::TreeData test_td = make_tree_data(test, config.target);
    std::vector<std::size_t> test_rows(test.n_rows());
    std::iota(test_rows.begin(), test_rows.end(), 0);
    std::vector<double> test_targets = prob_targets_of(test, test_rows, config.target);

    const int first_window = config.single_window ? config.n_folds - 1 : 1;
    for (int k = first_window; k <= config.n_folds - 1; ++k) {
        auto train_rows = rows_in_folds(train, plan, 0, k - 1);
        auto valid_rows = rows_in_folds(train, plan, k, k);
        if (valid_rows.empty())
            throw DataError("validation fold " + std::to_string(k + 1) + " is empty");

        tree::TreeData train_td = make_tree_data(train, train_rows, config.target);
        tree::TreeData valid_td = make_tree_data(train, valid_rows, config.target);
        tree::TreeParams params = config.tree_params;
        params.seed = mix_seed(config.tree_params.seed, static_cast<std::uint64_t>(k));
        tree::MobTree t = tree::grow_tree(train_td, params);

        WindowRow row;
        row.window = k;
        const std::string tag = "window " + std::to_string(k);
        auto train_targets = prob_targets_of(train, train_rows, config.target);
        auto valid_targets = prob_targets_of(train, valid_rows, config.target);
        Cells c_train = score_rows(t, train_td, train_targets, tag + ": train", report.warnings);
        Cells c_valid = score_rows(t, valid_td, valid_targets, tag + ": valid", report.warnings);
        Cells c_test = score_rows(t, test_td, test_targets, tag + ": test", report.warnings);
        row.train_ce = c_train.ce;
        row.valid_ce = c_valid.ce;
        row.test_ce = c_test.ce;
        row.train_auroc = c_train.auroc;
        row.valid_auroc = c_valid.auroc;
        row.test_auroc = c_test.auroc;
        report.rows.push_back(row);
    }
    report.mean = mean_row(report.rows);
    return report;
}

} // namespace mobhsmm::eval
