#pragma once

// Model-based recursive partitioning. Each node fits an ordinary
// least-squares model on the leaf regressors, tests the fitted parameters
// for instability across every partition variable with a permutation
// sup-LM test, and splits where the (Bonferroni-adjusted) instability is
// strongest. Leaves become numbered states with IF-THEN rules.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mobhsmm::tree {

// Fully imputed, column-major training view. Regressors are numeric;
// partition variables may be categorical (values are category codes).
struct Column {
    std::string name;
    bool categorical = false;
    std::vector<double> values;
    std::vector<std::string> categories;
};

struct TreeData {
    std::vector<Column> partition_vars;
    std::vector<Column> regressors;
    std::vector<double> target;  // logit-scale fitting target
    std::vector<double> outcome; // binary, only used for per-leaf mu_y

    std::size_t n_rows() const { return target.size(); }
    void validate() const;
    const Column* find_partition(std::string_view name) const;
    const Column* find_regressor(std::string_view name) const;
};

struct LinearModel {
    double intercept = 0.0;
    std::vector<double> coefficients; // per regressor, training order
    double residual_variance = 0.0;
    std::size_t n = 0;

    double response(std::span<const double> regressor_row) const;
};

struct TreeParams {
    double alpha = 0.05;
    int min_node_size = 50;
    int max_depth = 5;
    int n_permutations = 199;
    std::uint64_t seed = 0;

    void validate(std::size_t n_regressors) const;
};

struct Split {
    int var_index = -1; // into TreeData::partition_vars
    std::string var;
    bool categorical = false;
    double threshold = 0.0; // numeric: value <= threshold goes left
    int category = -1;      // categorical: value == category goes left
    std::string left_label;
    std::string other_label; // the remaining label when there are exactly two
    int n_categories = 0;
};

struct Node {
    std::optional<Split> split;
    std::unique_ptr<Node> left, right;
    LinearModel model; // fitted at every node; read from leaves
    int state_id = 0;  // leaves only, 1..S left to right
    double mu_y = 0.0; // leaves only: mean outcome
    std::size_t n_rows = 0;

    bool is_leaf() const { return !split.has_value(); }
};

enum class RuleOp { Le, Gt, Eq, Ne };

struct RuleTerm {
    std::string var;
    RuleOp op = RuleOp::Le;
    bool categorical = false;
    double threshold = 0.0; // numeric ops
    std::string label;      // categorical ops

    std::string text() const;
};

// One exported leaf: the row layout of the observation-matrix table.
struct StateDefinition {
    int state_id = 0;
    double mu_y = 0.0;
    double intercept = 0.0;
    std::vector<double> coefficients;
    std::vector<RuleTerm> rule; // root-to-leaf conditions, path order

    std::string rule_text() const; // terms joined with " & ", "TRUE" if empty
};

class MobTree {
public:
    MobTree() = default;
    MobTree(std::unique_ptr<Node> root, std::vector<std::string> partition_names,
            std::vector<std::string> regressor_names, TreeParams params);

    const Node& root() const { return *root_; }
    Node& root() { return *root_; }
    const std::vector<std::string>& partition_names() const { return partition_names_; }
    const std::vector<std::string>& regressor_names() const { return regressor_names_; }
    const TreeParams& params() const { return params_; }
    int n_states() const { return n_states_; }

    // Routes row `i` of `d` to its leaf. `d` must carry all columns the
    // tree was trained on (matched by name).
    const Node& route(const TreeData& d, std::size_t i) const;
    double predict(const TreeData& d, std::size_t i) const; // logit-scale response
    int assign_state(const TreeData& d, std::size_t i) const;

    std::vector<StateDefinition> export_rules() const;

    void renumber_states(); // left-to-right 1..S; called after construction

private:
    std::unique_ptr<Node> root_;
    std::vector<std::string> partition_names_;
    std::vector<std::string> regressor_names_;
    TreeParams params_;
    int n_states_ = 0;
};

// --- fitting primitives ---

// Ordinary least squares of y on [1, X]. Rank-deficient columns are dropped
// (their coefficient is 0). residual_variance = RSS / (n - p).
// Throws DataError when n < p.
LinearModel fit_leaf_model(std::span<const std::span<const double>> x_columns,
                           std::span<const double> y);

struct InstabilityOptions {
    int n_permutations = 199;
    int min_segment = 1; // smallest admissible side of a cut
    std::uint64_t seed = 0;
};

// Permutation sup-LM parameter-instability test. Scores are the
// per-observation OLS score contributions residual * [1, x]; the statistic
// is the maximal standardized squared norm of the cumulative score process
// with observations ordered by z. Returns the permutation p-value in
// (0, 1]; a constant z gives 1 by convention.
double instability_pvalue(std::span<const std::span<const double>> x_columns,
                          std::span<const double> y, const LinearModel& model,
                          std::span<const double> z, const InstabilityOptions& opts);

struct BestSplit {
    bool found = false;
    bool categorical = false;
    double threshold = 0.0;
    int category = -1;
    double objective = 0.0; // summed children RSS
};

// Scans admissible cut points of one partition variable over the row
// subset, minimizing the summed residual sum of squares of the two child
// OLS fits. Throws DataError when no split satisfies min_node_size.
BestSplit best_split(const TreeData& d, std::span<const std::size_t> rows, int var_index,
                     int min_node_size);

MobTree grow_tree(const TreeData& d, const TreeParams& params);

// --- rules ---

std::string render_rules_csv(const MobTree& tree);
std::vector<RuleTerm> parse_rule(const std::string& text);
bool rule_matches(std::span<const RuleTerm> rule, const TreeData& d, std::size_t row);

} // namespace mobhsmm::tree
