#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mobhsmm/dataio.hpp"
#include "mobhsmm/error.hpp"
#include "mobhsmm/evalharness.hpp"
#include "mobhsmm/metrics.hpp"
#include "mobhsmm/rng.hpp"

using namespace mobhsmm;

namespace {

const char* kSchemaText = R"({
  "columns": [
    {"name": "pid", "role": "subject_id"},
    {"name": "t", "role": "time_index"},
    {"name": "died", "role": "outcome"},
    {"name": "risk", "role": "soft_target"},
    {"name": "z", "role": "partition_var"},
    {"name": "x", "role": "leaf_regressor"}
  ]
})";

struct TempCsv {
    std::filesystem::path path;
    explicit TempCsv(const std::string& name, const std::string& body) {
        path = std::filesystem::temp_directory_path() / name;
        std::ofstream out(path);
        out << body;
    }
    ~TempCsv() { std::filesystem::remove(path); }
};

// `n_subjects` sequences of length `len`; the first half carries outcome 1.
// Soft risk follows a logistic curve in x with a z-dependent slope.
data::Dataset synth_dataset(const std::string& file_tag, int n_subjects, int len,
                            std::uint64_t seed, bool single_class = false) {
    Rng rng(seed);
    std::ostringstream body;
    body << "pid,t,died,risk,z,x\n";
    for (int s = 0; s < n_subjects; ++s) {
        int died = !single_class && s < n_subjects / 2 ? 1 : 0;
        for (int t = 0; t < len; ++t) {
            double z = rng.uniform() * 2.0 - 1.0;
            double x = rng.uniform() * 2.0 - 1.0;
            double slope = z <= 0.0 ? 2.0 : -2.0;
            double risk = metrics::sigmoid(0.3 + slope * x + 0.05 * rng.normal());
            body << "p" << s << ',' << t << ',' << died << ',' << risk << ',' << z << ',' << x
                 << '\n';
        }
    }
    TempCsv file("mobhsmm_eval_" + file_tag + ".csv", body.str());
    return data::load_dataset(file.path, data::Schema::from_json_text(kSchemaText));
}

} // namespace

TEST_CASE("make_folds partitions each subject into contiguous chunks") {
    data::Dataset d = synth_dataset("folds10", 1, 10, 1);
    eval::FoldPlan plan = eval::make_folds(d, 5);
    CHECK(plan.fold_of[0] == std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4});

    data::Dataset d7 = synth_dataset("folds7", 1, 7, 2);
    CHECK(eval::make_folds(d7, 5).fold_of[0] == std::vector<int>{0, 0, 1, 1, 2, 3, 4});

    // shorter than n_folds: one observation in each of the earliest folds
    data::Dataset d3 = synth_dataset("folds3", 1, 3, 3);
    CHECK(eval::make_folds(d3, 5).fold_of[0] == std::vector<int>{0, 1, 2});

    CHECK_THROWS_WITH_AS(eval::make_folds(d, 1), "n_folds must be at least 2", DataError);
}

TEST_CASE("rows_in_folds preserves temporal order") {
    data::Dataset d = synth_dataset("rows", 6, 9, 4);
    eval::FoldPlan plan = eval::make_folds(d, 4);

    for (int k = 1; k < 4; ++k) {
        auto train = eval::rows_in_folds(d, plan, 0, k - 1);
        auto valid = eval::rows_in_folds(d, plan, k, k);
        for (std::size_t si = 0; si < d.subjects.size(); ++si) {
            const auto& s = d.subjects[si];
            std::size_t max_train = 0, min_valid = d.n_rows();
            for (std::size_t r : train)
                if (r >= s.begin && r < s.end) max_train = std::max(max_train, r);
            for (std::size_t r : valid)
                if (r >= s.begin && r < s.end) min_valid = std::min(min_valid, r);
            if (min_valid < d.n_rows()) CHECK(max_train < min_valid);
        }
    }

    auto all = eval::rows_in_folds(d, plan, 0, 3);
    CHECK(all.size() == d.n_rows());

    eval::FoldPlan stale = plan;
    stale.fold_of.pop_back();
    CHECK_THROWS_WITH_AS(eval::rows_in_folds(d, stale, 0, 1), "fold plan does not match the dataset",
                         DataError);
}

TEST_CASE("make_tree_data builds the modeling view") {
    data::Dataset d = synth_dataset("view", 4, 6, 5);
    tree::TreeData td = eval::make_tree_data(d, eval::TargetKind::Soft);
    REQUIRE(td.partition_vars.size() == 1);
    REQUIRE(td.regressors.size() == 1);
    CHECK(td.partition_vars[0].name == "z");
    CHECK(td.regressors[0].name == "x");
    CHECK(td.n_rows() == d.n_rows());
    for (std::size_t i = 0; i < td.n_rows(); ++i) {
        CHECK(td.target[i] == metrics::logit(d.soft[i]));
        CHECK(td.outcome[i] == static_cast<double>(d.outcome[i]));
    }

    // outcome targets: clipped logit of 0/1
    tree::TreeData to = eval::make_tree_data(d, eval::TargetKind::Outcome);
    for (std::size_t i = 0; i < to.n_rows(); ++i)
        CHECK(to.target[i] == metrics::logit(static_cast<double>(d.outcome[i])));

    std::vector<std::size_t> head{0, 1, 2};
    CHECK(eval::make_tree_data(d, head, eval::TargetKind::Soft).n_rows() == 3);
}

TEST_CASE("make_tree_data reports missing soft targets") {
    TempCsv file("mobhsmm_eval_missing.csv", "pid,t,died,risk,z,x\n"
                                             "a,0,0,0.2,1,1\n"
                                             "a,1,0,,1,1\n");
    data::Dataset d = data::load_dataset(file.path, data::Schema::from_json_text(kSchemaText));
    CHECK_THROWS_WITH_AS(eval::make_tree_data(d, eval::TargetKind::Soft),
                         "soft_target missing at row 2", DataError);
    CHECK_NOTHROW(eval::make_tree_data(d, eval::TargetKind::Outcome));
}

namespace {

eval::PipelineConfig small_config() {
    eval::PipelineConfig config;
    config.tree_params.alpha = 0.05;
    config.tree_params.min_node_size = 12;
    config.tree_params.max_depth = 3;
    config.tree_params.n_permutations = 49;
    config.tree_params.seed = 17;
    config.n_folds = 5;
    return config;
}

} // namespace

TEST_CASE("run_prequential emits one row per growing window") {
    data::Dataset train = synth_dataset("preq_train", 20, 10, 6);
    data::Dataset test = synth_dataset("preq_test", 8, 10, 7);
    eval::PipelineConfig config = small_config();

    eval::PerformanceReport report = eval::run_prequential(train, test, config);
    REQUIRE(report.rows.size() == 4);
    for (int k = 1; k <= 4; ++k) CHECK(report.rows[static_cast<std::size_t>(k - 1)].window == k);

    for (const auto& row : report.rows) {
        CHECK(row.train_ce > 0.0);
        CHECK(row.valid_ce > 0.0);
        CHECK(row.test_ce > 0.0);
        CHECK(row.train_auroc >= 0.0);
        CHECK(row.train_auroc <= 1.0);
    }

    // the mean row recomputes from the window rows
    eval::WindowRow mean = eval::mean_row(report.rows);
    CHECK(report.mean.train_ce == doctest::Approx(mean.train_ce).epsilon(1e-12));
    CHECK(report.mean.test_auroc == doctest::Approx(mean.test_auroc).epsilon(1e-12));
    double ce = 0.0;
    for (const auto& row : report.rows) ce += row.test_ce;
    CHECK(report.mean.test_ce == doctest::Approx(ce / 4.0).epsilon(1e-12));

    // determinism
    eval::PerformanceReport again = eval::run_prequential(train, test, config);
    CHECK(again.to_csv() == report.to_csv());
}

TEST_CASE("single_window evaluates only the last window") {
    data::Dataset train = synth_dataset("preq_train1", 20, 10, 6);
    data::Dataset test = synth_dataset("preq_test1", 8, 10, 7);
    eval::PipelineConfig config = small_config();
    config.single_window = true;

    eval::PerformanceReport report = eval::run_prequential(train, test, config);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].window == 4);

    // matches the final row of the full run
    config.single_window = false;
    eval::PerformanceReport full = eval::run_prequential(train, test, config);
    CHECK(report.rows[0].train_ce == full.rows[3].train_ce);
    CHECK(report.rows[0].test_auroc == full.rows[3].test_auroc);
}

TEST_CASE("undefined AUROC cells become NA and leave the mean") {
    data::Dataset train = synth_dataset("preq_train2", 20, 10, 8);
    data::Dataset test = synth_dataset("preq_test2", 8, 10, 9, /*single_class=*/true);
    eval::PipelineConfig config = small_config();

    eval::PerformanceReport report = eval::run_prequential(train, test, config);
    REQUIRE(report.warnings.size() == 4);
    CHECK(report.warnings[0] ==
          "window 1: test AUROC undefined (single-class labels); excluded from mean");
    for (const auto& row : report.rows) {
        CHECK(std::isnan(row.test_auroc));
        CHECK(!std::isnan(row.train_auroc));
    }
    CHECK(std::isnan(report.mean.test_auroc));
    CHECK(!std::isnan(report.mean.train_auroc));

    std::string text = report.to_text();
    CHECK(text.find("NA") != std::string::npos);
    std::string csv = report.to_csv();
    CHECK(csv.find(",NA\n") != std::string::npos);
}

TEST_CASE("run_prequential rejects mismatched schemas") {
    data::Dataset train = synth_dataset("preq_train3", 10, 10, 10);
    data::Dataset test = synth_dataset("preq_test3", 4, 10, 11);
    test.schema.columns[4].name = "z2";
    CHECK_THROWS_WITH_AS(eval::run_prequential(train, test, small_config()),
                         "train and test schemas differ", DataError);
}

TEST_CASE("run_prequential reports empty validation folds") {
    data::Dataset train = synth_dataset("preq_short", 30, 3, 12); // folds 4 and 5 empty
    data::Dataset test = synth_dataset("preq_test4", 4, 10, 13);
    CHECK_THROWS_WITH_AS(eval::run_prequential(train, test, small_config()),
                         "validation fold 4 is empty", DataError);
}

TEST_CASE("report formatting") {
    eval::PerformanceReport report;
    eval::WindowRow r1;
    r1.window = 1;
    r1.train_ce = 0.123456789;
    r1.valid_ce = 0.2;
    r1.test_ce = 0.25;
    r1.train_auroc = 0.875;
    r1.valid_auroc = std::numeric_limits<double>::quiet_NaN();
    r1.test_auroc = 0.5;
    eval::WindowRow r2 = r1;
    r2.window = 2;
    r2.valid_auroc = 0.75;
    report.rows = {r1, r2};
    report.mean = eval::mean_row(report.rows);

    CHECK(report.mean.valid_auroc == 0.75); // only the defined cell

    std::string text = report.to_text();
    CHECK(text.find("window") == 0);
    CHECK(text.find("0.1235") != std::string::npos); // %.4f rounds
    CHECK(text.find("NA") != std::string::npos);
    CHECK(text.find("mean") != std::string::npos);

    std::string csv = report.to_csv();
    CHECK(csv.find("window,ce_train,ce_valid,ce_test,auroc_train,auroc_valid,auroc_test\n") == 0);
    CHECK(csv.find("1,0.123456789,") != std::string::npos); // shortest round trip
    CHECK(csv.find("mean,") != std::string::npos);

    // means over no rows stay NaN-safe
    eval::WindowRow empty = eval::mean_row({});
    CHECK(empty.train_ce == 0.0);
}
