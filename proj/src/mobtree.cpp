#include "mobhsmm/mobtree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>

#include "mobhsmm/csv.hpp"
#include "mobhsmm/error.hpp"
#include "mobhsmm/kernels.hpp"
#include "mobhsmm/rng.hpp"

namespace mobhsmm::tree {

namespace {

// Symmetric positive semi-definite solve with pivot-based column dropping.
// Dropped dimensions get a zero solution component, which is how
// rank-deficient regressor matrices degrade to a reduced fit.
class SpdSolver {
public:
    // G is row-major p x p. Returns false only when every pivot collapses.
    bool factor(const std::vector<double>& gram, int p) {
        p_ = p;
        dropped_.assign(p, false);
        double max_diag = 0.0;
        for (int i = 0; i < p; ++i) max_diag = std::max(max_diag, gram[i * p + i]);
        if (max_diag <= 0.0) return false;
        const double tol = 1e-10 * max_diag;

        while (true) {
            chol_ = gram;
            bool restart = false;
            for (int k = 0; k < p_ && !restart; ++k) {
                if (dropped_[k]) continue;
                double d = chol_[k * p_ + k];
                for (int j = 0; j < k; ++j)
                    if (!dropped_[j]) d -= chol_[k * p_ + j] * chol_[k * p_ + j];
                if (d <= tol) {
                    dropped_[k] = true;
                    restart = true;
                    break;
                }
                chol_[k * p_ + k] = std::sqrt(d);
                for (int i = k + 1; i < p_; ++i) {
                    if (dropped_[i]) continue;
                    double v = chol_[i * p_ + k];
                    for (int j = 0; j < k; ++j)
                        if (!dropped_[j]) v -= chol_[i * p_ + j] * chol_[k * p_ + j];
                    chol_[i * p_ + k] = v / chol_[k * p_ + k];
                }
            }
            if (!restart) break;
            if (std::all_of(dropped_.begin(), dropped_.end(), [](bool b) { return b; })) return false;
        }
        return true;
    }

    void solve(std::span<const double> b, std::span<double> out) const {
        std::vector<double> w(p_, 0.0);
        for (int i = 0; i < p_; ++i) {
            if (dropped_[i]) continue;
            double v = b[i];
            for (int j = 0; j < i; ++j)
                if (!dropped_[j]) v -= chol_[i * p_ + j] * w[j];
            w[i] = v / chol_[i * p_ + i];
        }
        for (int i = p_ - 1; i >= 0; --i) {
            if (dropped_[i]) {
                out[i] = 0.0;
                continue;
            }
            double v = w[i];
            for (int j = i + 1; j < p_; ++j)
                if (!dropped_[j]) v -= chol_[j * p_ + i] * out[j];
            out[i] = v / chol_[i * p_ + i];
        }
    }

    bool any_dropped() const {
        return std::any_of(dropped_.begin(), dropped_.end(), [](bool b) { return b; });
    }

private:
    int p_ = 0;
    std::vector<double> chol_;
    std::vector<bool> dropped_;
};

// Gram matrix and right-hand side of the normal equations for [1, X].
void accumulate_normal_equations(std::span<const std::span<const double>> x_columns,
                                 std::span<const double> y, std::vector<double>& gram,
                                 std::vector<double>& rhs) {
    const int r = static_cast<int>(x_columns.size());
    const int p = r + 1;
    const std::size_t n = y.size();
    gram.assign(static_cast<std::size_t>(p) * p, 0.0);
    rhs.assign(p, 0.0);
    gram[0] = static_cast<double>(n);
    rhs[0] = kernels::sum(y.data(), n);
    for (int j = 0; j < r; ++j) {
        const double* xj = x_columns[j].data();
        gram[0 * p + (j + 1)] = gram[(j + 1) * p + 0] = kernels::sum(xj, n);
        rhs[j + 1] = kernels::dot(xj, y.data(), n);
        for (int k = 0; k <= j; ++k) {
            double v = kernels::dot(xj, x_columns[k].data(), n);
            gram[(j + 1) * p + (k + 1)] = gram[(k + 1) * p + (j + 1)] = v;
        }
    }
}

double model_rss(std::span<const std::span<const double>> x_columns, std::span<const double> y,
                 const LinearModel& m) {
    std::vector<double> resid(y.begin(), y.end());
    for (auto& v : resid) v -= m.intercept;
    for (std::size_t j = 0; j < x_columns.size(); ++j)
        kernels::axpy(-m.coefficients[j], x_columns[j].data(), resid.data(), resid.size());
    return kernels::sq_dev_sum(resid.data(), resid.size(), 0.0);
}

LinearModel solve_ols(std::span<const std::span<const double>> x_columns,
                      std::span<const double> y) {
    const int p = static_cast<int>(x_columns.size()) + 1;
    std::vector<double> gram, rhs;
    accumulate_normal_equations(x_columns, y, gram, rhs);
    SpdSolver solver;
    if (!solver.factor(gram, p)) throw DataError("degenerate regressor matrix in node fit");
    std::vector<double> beta(p, 0.0);
    solver.solve(rhs, beta);

    LinearModel m;
    m.intercept = beta[0];
    m.coefficients.assign(beta.begin() + 1, beta.end());
    m.n = y.size();
    double rss = std::max(0.0, model_rss(x_columns, y, m));
    m.residual_variance = (m.n > static_cast<std::size_t>(p))
                              ? rss / static_cast<double>(m.n - static_cast<std::size_t>(p))
                              : 0.0;
    return m;
}

} // namespace

void TreeData::validate() const {
    const std::size_t n = n_rows();
    if (n == 0) throw DataError("empty training data");
    if (outcome.size() != n) throw DataError("outcome column length mismatch");
    if (regressors.empty()) throw DataError("no leaf regressors");
    if (partition_vars.empty()) throw DataError("no partition variables");
    auto check = [&](const Column& c, bool allow_categorical) {
        if (c.values.size() != n) throw DataError("column '" + c.name + "' length mismatch");
        if (!allow_categorical && c.categorical)
            throw DataError("regressor '" + c.name + "' must be numeric");
        for (double v : c.values)
            if (std::isnan(v))
                throw DataError("column '" + c.name + "' contains missing values; impute first");
    };
    for (const auto& c : partition_vars) check(c, true);
    for (const auto& c : regressors) check(c, false);
    for (double v : target)
        if (std::isnan(v)) throw DataError("fitting target contains NaN");
}

const Column* TreeData::find_partition(std::string_view name) const {
    for (const auto& c : partition_vars)
        if (c.name == name) return &c;
    return nullptr;
}

const Column* TreeData::find_regressor(std::string_view name) const {
    for (const auto& c : regressors)
        if (c.name == name) return &c;
    return nullptr;
}

double LinearModel::response(std::span<const double> regressor_row) const {
    double v = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) v += coefficients[j] * regressor_row[j];
    return v;
}

void TreeParams::validate(std::size_t n_regressors) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must lie in (0,1)");
    const int p = static_cast<int>(n_regressors) + 1;
    if (min_node_size < 2 * p)
        throw DataError("min_node_size must be at least twice the parameter count (" +
                        std::to_string(2 * p) + ")");
    if (max_depth < 1 || max_depth > 40) throw DataError("max_depth must lie in [1,40]");
    if (n_permutations < 1) throw DataError("n_permutations must be positive");
}

LinearModel fit_leaf_model(std::span<const std::span<const double>> x_columns,
                           std::span<const double> y) {
    const std::size_t p = x_columns.size() + 1;
    for (const auto& col : x_columns)
        if (col.size() != y.size()) throw DataError("regressor column length mismatch");
    if (y.size() < p) throw DataError("node too small to fit model");
    return solve_ols(x_columns, y);
}

double instability_pvalue(std::span<const std::span<const double>> x_columns,
                          std::span<const double> y, const LinearModel& model,
                          std::span<const double> z, const InstabilityOptions& opts) {
    const std::size_t n = y.size();
    const std::size_t p = x_columns.size() + 1;
    if (z.size() != n) throw DataError("partition variable length mismatch");
    if (n < 2) return 1.0;

    // Constant partition variable: nothing to order by.
    if (std::all_of(z.begin(), z.end(), [&](double v) { return v == z[0]; })) return 1.0;

    // Per-observation score contributions of the fitted model.
    std::vector<double> resid(y.begin(), y.end());
    for (auto& v : resid) v -= model.intercept;
    for (std::size_t j = 0; j < x_columns.size(); ++j)
        kernels::axpy(-model.coefficients[j], x_columns[j].data(), resid.data(), n);
    std::vector<std::vector<double>> scores(p, std::vector<double>(n));
    scores[0] = resid;
    for (std::size_t j = 1; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) scores[j][i] = resid[i] * x_columns[j - 1][i];

    // Observations ordered by z; cuts sit between distinct z values with at
    // least min_segment rows on each side. The cut set is shared by the
    // observed and every permuted replicate.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
    const std::size_t trim = std::max<std::size_t>(1, static_cast<std::size_t>(opts.min_segment));
    std::vector<std::size_t> cuts; // cut after position t-1: left block size t
    for (std::size_t t = trim; t + trim <= n; ++t)
        if (z[order[t - 1]] < z[order[t]]) cuts.push_back(t);
    if (cuts.empty()) return 1.0;

    // Covariance of the scores (permutation invariant).
    std::vector<double> gram(p * p, 0.0);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            double v = kernels::dot(scores[a].data(), scores[b].data(), n) / static_cast<double>(n);
            gram[a * p + b] = gram[b * p + a] = v;
        }
    SpdSolver solver;
    if (!solver.factor(gram, static_cast<int>(p))) return 1.0; // all-zero scores

    std::vector<double> cum(p), solved(p);
    auto max_stat = [&](const std::vector<std::size_t>& positions) {
        std::fill(cum.begin(), cum.end(), 0.0);
        double best = 0.0;
        std::size_t next_cut = 0;
        for (std::size_t t = 1; t <= n && next_cut < cuts.size(); ++t) {
            const std::size_t row = positions[t - 1];
            for (std::size_t a = 0; a < p; ++a) cum[a] += scores[a][row];
            if (t == cuts[next_cut]) {
                ++next_cut;
                solver.solve(cum, solved);
                double q = 0.0;
                for (std::size_t a = 0; a < p; ++a) q += cum[a] * solved[a];
                double stat = q * static_cast<double>(n) /
                              (static_cast<double>(t) * static_cast<double>(n - t));
                if (stat > best) best = stat;
            }
        }
        return best;
    };

    const double observed = max_stat(order);
    Rng rng(opts.seed);
    std::vector<std::size_t> positions = order;
    int at_least = 0;
    for (int b = 0; b < opts.n_permutations; ++b) {
        rng.shuffle(positions);
        if (max_stat(positions) >= observed) ++at_least;
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(opts.n_permutations + 1);
}

namespace {

struct GatheredNode {
    std::vector<std::vector<double>> x; // regressor columns over the node rows
    std::vector<double> y;
    std::vector<std::span<const double>> x_spans;

    void gather(const TreeData& d, std::span<const std::size_t> rows) {
        const std::size_t r = d.regressors.size();
        x.assign(r, {});
        y.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) y[i] = d.target[rows[i]];
        for (std::size_t j = 0; j < r; ++j) {
            x[j].resize(rows.size());
            const auto& col = d.regressors[j].values;
            for (std::size_t i = 0; i < rows.size(); ++i) x[j][i] = col[rows[i]];
        }
        x_spans.assign(x.begin(), x.end());
    }
};

double subset_rss(const TreeData& d, std::span<const std::size_t> rows) {
    GatheredNode g;
    g.gather(d, rows);
    LinearModel m = solve_ols(g.x_spans, g.y);
    return model_rss(g.x_spans, g.y, m);
}

} // namespace

BestSplit best_split(const TreeData& d, std::span<const std::size_t> rows, int var_index,
                     int min_node_size) {
    const Column& var = d.partition_vars[static_cast<std::size_t>(var_index)];
    const std::size_t n = rows.size();
    const std::size_t m = static_cast<std::size_t>(min_node_size);
    BestSplit best;
    best.objective = std::numeric_limits<double>::infinity();

    if (var.categorical) {
        best.categorical = true;
        std::vector<std::size_t> left, right;
        for (std::size_t c = 0; c < var.categories.size(); ++c) {
            left.clear();
            right.clear();
            for (std::size_t row : rows)
                (var.values[row] == static_cast<double>(c) ? left : right).push_back(row);
            if (left.size() < m || right.size() < m) continue;
            double obj = subset_rss(d, left) + subset_rss(d, right);
            if (obj < best.objective) {
                best.found = true;
                best.objective = obj;
                best.category = static_cast<int>(c);
            }
        }
        if (!best.found) throw DataError("no admissible split on '" + var.name + "'");
        return best;
    }

    std::vector<std::size_t> sorted(rows.begin(), rows.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](std::size_t a, std::size_t b) { return var.values[a] < var.values[b]; });

    // Prefix sufficient statistics let both child fits come from one pass.
    const std::size_t r = d.regressors.size();
    const std::size_t p = r + 1;
    std::vector<double> tot_gram, tot_rhs;
    {
        GatheredNode g;
        g.gather(d, sorted);
        accumulate_normal_equations(g.x_spans, g.y, tot_gram, tot_rhs);
    }
    double tot_yy = 0.0;
    for (std::size_t row : sorted) tot_yy += d.target[row] * d.target[row];

    std::vector<double> pre_gram(p * p, 0.0), pre_rhs(p, 0.0);
    double pre_yy = 0.0;
    std::vector<double> xrow(r);

    std::vector<double> left_beta(p), right_beta(p), right_gram(p * p), right_rhs(p);
    SpdSolver solver;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const std::size_t row = sorted[t];
        const double yv = d.target[row];
        for (std::size_t j = 0; j < r; ++j) xrow[j] = d.regressors[j].values[row];
        pre_gram[0] += 1.0;
        pre_rhs[0] += yv;
        pre_yy += yv * yv;
        for (std::size_t j = 0; j < r; ++j) {
            pre_gram[0 * p + (j + 1)] += xrow[j];
            pre_gram[(j + 1) * p + 0] += xrow[j];
            pre_rhs[j + 1] += xrow[j] * yv;
            for (std::size_t k = 0; k < r; ++k) pre_gram[(j + 1) * p + (k + 1)] += xrow[j] * xrow[k];
        }

        const std::size_t left_n = t + 1;
        if (left_n < m || n - left_n < m) continue;
        const double zl = var.values[sorted[t]];
        const double zr = var.values[sorted[t + 1]];
        if (!(zl < zr)) continue; // cannot cut inside a tie block

        if (!solver.factor(pre_gram, static_cast<int>(p))) continue;
        solver.solve(pre_rhs, left_beta);
        double left_rss = pre_yy;
        for (std::size_t a = 0; a < p; ++a) left_rss -= left_beta[a] * pre_rhs[a];

        for (std::size_t a = 0; a < p * p; ++a) right_gram[a] = tot_gram[a] - pre_gram[a];
        for (std::size_t a = 0; a < p; ++a) right_rhs[a] = tot_rhs[a] - pre_rhs[a];
        if (!solver.factor(right_gram, static_cast<int>(p))) continue;
        solver.solve(right_rhs, right_beta);
        double right_rss = tot_yy - pre_yy;
        for (std::size_t a = 0; a < p; ++a) right_rss -= right_beta[a] * right_rhs[a];

        double obj = std::max(0.0, left_rss) + std::max(0.0, right_rss);
        if (obj < best.objective) {
            best.found = true;
            best.objective = obj;
            best.threshold = zl + 0.5 * (zr - zl);
        }
    }
    if (!best.found) throw DataError("no admissible split on '" + var.name + "'");
    return best;
}

namespace {

struct Grower {
    const TreeData& d;
    const TreeParams& params;

    std::unique_ptr<Node> grow(std::vector<std::size_t> rows, int depth, std::uint64_t path_id) {
        auto node = std::make_unique<Node>();
        node->n_rows = rows.size();

        GatheredNode g;
        g.gather(d, rows);
        node->model = fit_leaf_model(g.x_spans, g.y);
        double outcome_sum = 0.0;
        for (std::size_t row : rows) outcome_sum += d.outcome[row];
        node->mu_y = outcome_sum / static_cast<double>(rows.size());

        if (depth >= params.max_depth || rows.size() < 2 * static_cast<std::size_t>(params.min_node_size))
            return node;

        // Instability p-value per partition variable; constants are skipped.
        const std::size_t n_vars = d.partition_vars.size();
        std::vector<double> pvals(n_vars, 1.0);
        std::vector<bool> tested(n_vars, false);
        std::size_t n_tested = 0;
        std::vector<double> zbuf(rows.size());
        for (std::size_t v = 0; v < n_vars; ++v) {
            const auto& col = d.partition_vars[v].values;
            for (std::size_t i = 0; i < rows.size(); ++i) zbuf[i] = col[rows[i]];
            if (std::all_of(zbuf.begin(), zbuf.end(), [&](double x) { return x == zbuf[0]; }))
                continue;
            InstabilityOptions opts;
            opts.n_permutations = params.n_permutations;
            opts.min_segment = params.min_node_size;
            opts.seed = mix_seed(params.seed, path_id, v);
            pvals[v] = instability_pvalue(g.x_spans, g.y, node->model, zbuf, opts);
            tested[v] = true;
            ++n_tested;
        }
        if (n_tested == 0) return node;

        std::vector<std::size_t> var_order;
        for (std::size_t v = 0; v < n_vars; ++v)
            if (tested[v]) var_order.push_back(v);
        std::stable_sort(var_order.begin(), var_order.end(),
                         [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });

        const double p_min = pvals[var_order.front()];
        const double p_adj = std::min(1.0, p_min * static_cast<double>(n_tested));
        const double floor = 1.0 / static_cast<double>(params.n_permutations + 1);
        // alpha below the permutation resolution means "split whenever the
        // observed statistic beats every permutation".
        const bool significant =
            (p_adj <= params.alpha) || (params.alpha < floor && p_min <= floor);
        if (!significant) return node;

        // Most unstable variable first; fall through when a variable has no
        // admissible cut under min_node_size.
        for (std::size_t v : var_order) {
            if (std::min(1.0, pvals[v] * static_cast<double>(n_tested)) > params.alpha &&
                !(params.alpha < floor && pvals[v] <= floor))
                break;
            BestSplit candidate;
            try {
                candidate = best_split(d, rows, static_cast<int>(v), params.min_node_size);
            } catch (const DataError&) {
                continue;
            }
            Split split;
            split.var_index = static_cast<int>(v);
            split.var = d.partition_vars[v].name;
            split.categorical = candidate.categorical;
            split.threshold = candidate.threshold;
            split.category = candidate.category;
            if (candidate.categorical) {
                const auto& cats = d.partition_vars[v].categories;
                split.left_label = cats[static_cast<std::size_t>(candidate.category)];
                split.n_categories = static_cast<int>(cats.size());
                if (cats.size() == 2) split.other_label = cats[candidate.category == 0 ? 1 : 0];
            }

            std::vector<std::size_t> left_rows, right_rows;
            const auto& col = d.partition_vars[v].values;
            for (std::size_t row : rows) {
                bool go_left = candidate.categorical
                                   ? col[row] == static_cast<double>(candidate.category)
                                   : col[row] <= candidate.threshold;
                (go_left ? left_rows : right_rows).push_back(row);
            }
            node->split = split;
            node->left = grow(std::move(left_rows), depth + 1, path_id * 2);
            node->right = grow(std::move(right_rows), depth + 1, path_id * 2 + 1);
            return node;
        }
        return node;
    }
};

} // namespace

MobTree grow_tree(const TreeData& d, const TreeParams& params) {
    d.validate();
    params.validate(d.regressors.size());
    if (d.n_rows() < 2 * static_cast<std::size_t>(params.min_node_size))
        throw DataError("root too small: " + std::to_string(d.n_rows()) + " rows, need at least " +
                        std::to_string(2 * params.min_node_size));

    std::vector<std::size_t> rows(d.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    Grower grower{d, params};
    auto root = grower.grow(std::move(rows), 0, 1);

    std::vector<std::string> pnames, rnames;
    for (const auto& c : d.partition_vars) pnames.push_back(c.name);
    for (const auto& c : d.regressors) rnames.push_back(c.name);
    MobTree tree(std::move(root), std::move(pnames), std::move(rnames), params);
    tree.renumber_states();
    return tree;
}

MobTree::MobTree(std::unique_ptr<Node> root, std::vector<std::string> partition_names,
                 std::vector<std::string> regressor_names, TreeParams params)
    : root_(std::move(root)),
      partition_names_(std::move(partition_names)),
      regressor_names_(std::move(regressor_names)),
      params_(params) {}

void MobTree::renumber_states() {
    int next = 0;
    auto walk = [&](auto&& self, Node& node) -> void {
        if (node.is_leaf()) {
            node.state_id = ++next;
            return;
        }
        self(self, *node.left);
        self(self, *node.right);
    };
    walk(walk, *root_);
    n_states_ = next;
}

namespace {

const Column& resolve_partition(const TreeData& d, const Split& split) {
    if (split.var_index >= 0 && static_cast<std::size_t>(split.var_index) < d.partition_vars.size() &&
        d.partition_vars[static_cast<std::size_t>(split.var_index)].name == split.var)
        return d.partition_vars[static_cast<std::size_t>(split.var_index)];
    const Column* col = d.find_partition(split.var);
    if (!col) throw DataError("missing required column '" + split.var + "'");
    return *col;
}

} // namespace

const Node& MobTree::route(const TreeData& d, std::size_t i) const {
    const Node* node = root_.get();
    while (!node->is_leaf()) {
        const Split& split = *node->split;
        const Column& col = resolve_partition(d, split);
        double v = col.values[i];
        if (std::isnan(v)) throw DataError("missing value in column '" + split.var + "'");
        bool go_left;
        if (split.categorical) {
            // Category codes are dataset-relative; the label is authoritative
            // (loaded artifacts carry only the label).
            int code = split.category;
            if (!split.left_label.empty()) {
                code = -1;
                for (std::size_t c = 0; c < col.categories.size(); ++c)
                    if (col.categories[c] == split.left_label) {
                        code = static_cast<int>(c);
                        break;
                    }
            }
            go_left = code >= 0 && v == static_cast<double>(code);
        } else {
            go_left = v <= split.threshold;
        }
        node = go_left ? node->left.get() : node->right.get();
    }
    return *node;
}

double MobTree::predict(const TreeData& d, std::size_t i) const {
    const Node& leaf = route(d, i);
    double v = leaf.model.intercept;
    for (std::size_t j = 0; j < regressor_names_.size(); ++j) {
        const Column* col = d.find_regressor(regressor_names_[j]);
        if (!col) throw DataError("missing required column '" + regressor_names_[j] + "'");
        v += leaf.model.coefficients[j] * col->values[i];
    }
    return v;
}

int MobTree::assign_state(const TreeData& d, std::size_t i) const { return route(d, i).state_id; }

std::string RuleTerm::text() const {
    switch (op) {
    case RuleOp::Le: return var + " <= " + csv::format_double(threshold);
    case RuleOp::Gt: return var + " > " + csv::format_double(threshold);
    case RuleOp::Eq: return var + " = " + label;
    case RuleOp::Ne: return var + " != " + label;
    }
    return {};
}

std::string StateDefinition::rule_text() const {
    if (rule.empty()) return "TRUE";
    std::string out;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        if (i) out += " & ";
        out += rule[i].text();
    }
    return out;
}

std::vector<StateDefinition> MobTree::export_rules() const {
    std::vector<StateDefinition> defs;
    std::vector<RuleTerm> path;
    auto walk = [&](auto&& self, const Node& node) -> void {
        if (node.is_leaf()) {
            StateDefinition def;
            def.state_id = node.state_id;
            def.mu_y = node.mu_y;
            def.intercept = node.model.intercept;
            def.coefficients = node.model.coefficients;
            def.rule = path;
            defs.push_back(std::move(def));
            return;
        }
        const Split& split = *node.split;
        RuleTerm left_term, right_term;
        left_term.var = right_term.var = split.var;
        left_term.categorical = right_term.categorical = split.categorical;
        if (!split.categorical) {
            left_term.op = RuleOp::Le;
            right_term.op = RuleOp::Gt;
            left_term.threshold = right_term.threshold = split.threshold;
        } else {
            left_term.op = RuleOp::Eq;
            left_term.label = split.left_label;
            // Binary categories stay in "=" form; larger ones need "!=".
            if (split.n_categories == 2) {
                right_term.op = RuleOp::Eq;
                right_term.label = split.other_label;
            } else {
                right_term.op = RuleOp::Ne;
                right_term.label = split.left_label;
            }
        }
        path.push_back(left_term);
        self(self, *node.left);
        path.back() = right_term;
        self(self, *node.right);
        path.pop_back();
    };
    walk(walk, *root_);
    std::sort(defs.begin(), defs.end(),
              [](const StateDefinition& a, const StateDefinition& b) { return a.state_id < b.state_id; });
    return defs;
}

std::string render_rules_csv(const MobTree& tree) {
    std::ostringstream out;
    out << "state,mu_y,intercept";
    for (const auto& name : tree.regressor_names()) out << ",coef_" << name;
    out << ",rule\n";
    for (const auto& def : tree.export_rules()) {
        out << 's' << def.state_id << ',' << csv::format_double(def.mu_y) << ','
            << csv::format_double(def.intercept);
        for (double c : def.coefficients) out << ',' << csv::format_double(c);
        out << ',' << def.rule_text() << '\n';
    }
    return out.str();
}

std::vector<RuleTerm> parse_rule(const std::string& text) {
    std::vector<RuleTerm> terms;
    if (text == "TRUE") return terms;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t amp = text.find(" & ", start);
        std::string part =
            amp == std::string::npos ? text.substr(start) : text.substr(start, amp - start);

        static const std::pair<const char*, RuleOp> ops[] = {
            {" <= ", RuleOp::Le}, {" != ", RuleOp::Ne}, {" > ", RuleOp::Gt}, {" = ", RuleOp::Eq}};
        RuleTerm term;
        bool parsed = false;
        for (const auto& [pat, op] : ops) {
            std::size_t pos = part.find(pat);
            if (pos == std::string::npos) continue;
            term.var = part.substr(0, pos);
            std::string value = part.substr(pos + std::strlen(pat));
            term.op = op;
            if (op == RuleOp::Le || op == RuleOp::Gt) {
                term.threshold = csv::parse_double(value, "rule term '" + part + "'");
            } else {
                term.label = value;
                const char* first = value.data();
                double num = 0.0;
                auto res = std::from_chars(first, first + value.size(), num);
                if (res.ec == std::errc{} && res.ptr == first + value.size()) term.threshold = num;
            }
            parsed = true;
            break;
        }
        if (!parsed) throw DataError("cannot parse rule term: '" + part + "'");
        terms.push_back(std::move(term));
        if (amp == std::string::npos) break;
        start = amp + 3;
    }
    return terms;
}

bool rule_matches(std::span<const RuleTerm> rule, const TreeData& d, std::size_t row) {
    for (const auto& term : rule) {
        const Column* col = d.find_partition(term.var);
        if (!col) throw DataError("missing required column '" + term.var + "'");
        double v = col->values[row];
        bool ok = false;
        switch (term.op) {
        case RuleOp::Le: ok = v <= term.threshold; break;
        case RuleOp::Gt: ok = v > term.threshold; break;
        case RuleOp::Eq:
        case RuleOp::Ne: {
            double want;
            if (col->categorical) {
                auto it = std::find(col->categories.begin(), col->categories.end(), term.label);
                // Unknown label can never match.
                want = it == col->categories.end() ? std::numeric_limits<double>::quiet_NaN()
                                                   : static_cast<double>(it - col->categories.begin());
            } else {
                want = term.threshold;
            }
            ok = (v == want);
            if (term.op == RuleOp::Ne) ok = !ok;
            break;
        }
        }
        if (!ok) return false;
    }
    return true;
}

} // namespace mobhsmm::tree
