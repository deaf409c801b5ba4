// mobhsmm: staged pipeline CLI.
//   impute -> split -> oversample -> fit-tree -> build-hsmm -> decode /
//   predict-next / simulate / evaluate
// Exit codes: 0 ok, 1 user or data error, 2 internal invariant failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mobhsmm/csv.hpp"
#include "mobhsmm/dataio.hpp"
#include "mobhsmm/error.hpp"
#include "mobhsmm/evalharness.hpp"
#include "mobhsmm/hsmm.hpp"
#include "mobhsmm/metrics.hpp"
#include "mobhsmm/mobtree.hpp"
#include "mobhsmm/model_io.hpp"

namespace {

using namespace mobhsmm;

// Reconstruction command embedded in artifacts: re-running it reproduces the
// file byte for byte.
std::string command_line(const io::ArtifactMeta& meta) {
    std::string line = "mobhsmm " + meta.command;
    for (const auto& f : meta.flags) line += " " + f;
    return line;
}

std::vector<std::string> artifact_comments(const io::ArtifactMeta& meta) {
    return {command_line(meta), "seed " + std::to_string(meta.seed)};
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

data::Dataset load(const std::string& csv_path, const std::string& schema_path) {
    return data::load_dataset(csv_path, data::Schema::from_json_file(schema_path));
}

// '#'-prefixed metadata block prepended to CSV artifacts.
std::string with_comments(const io::ArtifactMeta& meta, const std::string& body) {
    std::string out;
    for (const auto& c : artifact_comments(meta)) out += "# " + c + "\n";
    return out + body;
}

struct TreeView {
    tree::MobTree model;
    tree::TreeData td; // partition/regressor columns over all rows
};

TreeView load_tree_view(const std::string& tree_path, const data::Dataset& d) {
    TreeView v{io::load_tree(tree_path), eval::make_tree_data(d, eval::TargetKind::Outcome)};
    return v;
}

int cmd_impute(const std::string& in, const std::string& schema, const std::string& out,
               const io::ArtifactMeta& meta) {
    data::Dataset d = impute_dataset(load(in, schema));
    data::write_dataset_csv(out, d, artifact_comments(meta));
    std::cout << "imputed " << d.n_rows() << " rows over " << d.subjects.size() << " subjects\n";
    return 0;
}

int cmd_split(const std::string& in, const std::string& schema, double test_fraction,
              std::uint64_t seed, const std::string& train_out, const std::string& test_out,
              const io::ArtifactMeta& meta) {
    data::Dataset d = load(in, schema);
    data::SplitResult r = data::split_subjects(d, test_fraction, seed);
    print_warnings(r.warnings);
    data::write_dataset_csv(train_out, r.train, artifact_comments(meta));
    data::write_dataset_csv(test_out, r.test, artifact_comments(meta));
    std::cout << "train " << r.train.subjects.size() << " subjects / " << r.train.n_rows()
              << " rows; test " << r.test.subjects.size() << " subjects / " << r.test.n_rows()
              << " rows\n";
    return 0;
}

int cmd_oversample(const std::string& in, const std::string& schema, double target_ratio,
                   int max_copies, std::uint64_t seed, const std::string& out,
                   const io::ArtifactMeta& meta) {
    data::Dataset d = load(in, schema);
    data::OversampleResult r = data::oversample_crops(d, target_ratio, max_copies, seed);
    print_warnings(r.warnings);
    data::write_dataset_csv(out, r.data, artifact_comments(meta));
    std::cout << "positive ratio " << csv::format_double(d.positive_ratio()) << " -> "
              << csv::format_double(r.data.positive_ratio())
              << (r.target_reached ? "" : " (best effort)") << "\n";
    return 0;
}

int cmd_fit_tree(const std::string& train_path, const std::string& schema,
                 const std::string& target, const tree::TreeParams& params,
                 const std::string& out, const std::string& rules_out,
                 const io::ArtifactMeta& meta) {
    data::Dataset d = load(train_path, schema);
    eval::TargetKind kind = target == "outcome" ? eval::TargetKind::Outcome : eval::TargetKind::Soft;
    if (kind == eval::TargetKind::Outcome)
        std::cerr << "warning: fitting logit of clipped binary outcomes; soft targets are the "
                     "intended use\n";
    tree::TreeData td = eval::make_tree_data(d, kind);
    tree::MobTree t = tree::grow_tree(td, params);
    io::save_tree(out, t, meta);
    if (!rules_out.empty())
        write_text_file(rules_out, with_comments(meta, tree::render_rules_csv(t)));

    std::vector<double> probs(td.n_rows()), targets(td.n_rows());
    std::vector<int> labels(td.n_rows());
    for (std::size_t i = 0; i < td.n_rows(); ++i) {
        probs[i] = metrics::sigmoid(t.predict(td, i));
        targets[i] = metrics::sigmoid(td.target[i]);
        labels[i] = static_cast<int>(td.outcome[i]);
    }
    std::cout << "states " << t.n_states() << "\n";
    std::cout << "train_cross_entropy " << csv::format_double(metrics::cross_entropy(targets, probs))
              << "\n";
    try {
        std::cout << "train_auroc " << csv::format_double(metrics::auroc(probs, labels)) << "\n";
    } catch (const DataError&) {
        std::cerr << "warning: train AUROC undefined (single-class labels)\n";
        std::cout << "train_auroc NA\n";
    }
    return 0;
}

int cmd_build_hsmm(const std::string& train_path, const std::string& schema,
                   const std::string& tree_path, const std::string& risk,
                   const hsmm::BuildConfig& config, const std::string& out,
                   const io::ArtifactMeta& meta) {
    data::Dataset d = load(train_path, schema);
    TreeView v = load_tree_view(tree_path, d);

    std::vector<hsmm::LabeledSequence> sequences;
    sequences.reserve(d.subjects.size());
    std::cout << "segments:\n";
    for (const auto& s : d.subjects) {
        hsmm::LabeledSequence seq;
        for (std::size_t row = s.begin; row < s.end; ++row) {
            seq.states.push_back(v.model.assign_state(v.td, row));
            double value;
            if (risk == "teacher") {
                if (!d.has_soft || d.soft_missing[row])
                    throw DataError("risk is missing for subject " + s.id + " at t=" +
                                    std::to_string(d.time[row]));
                value = d.soft[row];
            } else {
                value = metrics::sigmoid(v.model.predict(v.td, row));
            }
            seq.observations.push_back(value);
        }
        std::cout << "subject " << s.id << ":";
        for (const auto& seg : hsmm::run_length_encode(seq.states))
            std::cout << " (" << seg.state << "," << seg.duration << ")";
        std::cout << "\n";
        sequences.push_back(std::move(seq));
    }

    hsmm::BuildResult r = hsmm::build_hsmm(sequences, v.model.n_states(), config);
    print_warnings(r.warnings);
    io::save_hsmm(out, r.model, meta);

    std::vector<std::size_t> counts(static_cast<std::size_t>(v.model.n_states()), 0);
    for (const auto& seq : sequences)
        for (int st : seq.states) ++counts[static_cast<std::size_t>(st - 1)];
    auto defs = v.model.export_rules();
    std::cout << "state counts:\n";
    for (const auto& def : defs)
        std::cout << "state " << def.state_id << ": "
                  << counts[static_cast<std::size_t>(def.state_id - 1)] << " observations, mu_y "
                  << csv::format_double(def.mu_y) << "\n";
    std::cout << "observation matrix:\n" << tree::render_rules_csv(v.model);
    return 0;
}

int cmd_decode(const std::string& model_path, const std::string& in, const std::string& schema,
               const std::string& tree_path, const std::string& risk_column,
               const std::string& out, const io::ArtifactMeta& meta) {
    hsmm::Hsmm model = io::load_hsmm(model_path);
    data::Dataset d = load(in, schema);
    if (tree_path.empty() == risk_column.empty())
        throw DataError("provide exactly one of --tree (student risk) or --risk-column");

    std::vector<double> risk(d.n_rows());
    if (!tree_path.empty()) {
        TreeView v = load_tree_view(tree_path, d);
        for (std::size_t i = 0; i < d.n_rows(); ++i)
            risk[i] = metrics::sigmoid(v.model.predict(v.td, i));
    } else {
        const data::ColumnSpec* soft_spec = d.schema.optional_unique(data::Role::SoftTarget);
        if (soft_spec && soft_spec->name == risk_column) {
            risk = d.soft;
        } else {
            const auto& col = d.feature(risk_column);
            if (col.categorical) throw DataError("risk column '" + risk_column + "' is categorical");
            risk = col.values;
        }
    }
    for (const auto& s : d.subjects)
        for (std::size_t row = s.begin; row < s.end; ++row)
            if (std::isnan(risk[row]))
                throw DataError("risk is missing for subject " + s.id + " at t=" +
                                std::to_string(d.time[row]));

    std::string body = "subject,t,risk,decoded_state\n";
    std::string loglik_comments;
    for (const auto& s : d.subjects) {
        std::span<const double> obs(risk.data() + s.begin, s.length());
        hsmm::DecodeResult r = hsmm::viterbi(model, obs);
        std::cout << "subject " << s.id << " log_likelihood "
                  << csv::format_double(r.log_likelihood) << "\n";
        loglik_comments +=
            "# log_likelihood " + s.id + " " + csv::format_double(r.log_likelihood) + "\n";
        for (std::size_t i = 0; i < s.length(); ++i) {
            body += s.id;
            body += ',' + std::to_string(d.time[s.begin + i]);
            body += ',' + csv::format_double(obs[i]);
            body += ',' + std::to_string(r.states[i]);
            body += '\n';
        }
    }
    write_text_file(out, with_comments(meta, loglik_comments + body));
    return 0;
}

int cmd_predict_next(const std::string& model_path, int state, int k) {
    hsmm::Hsmm model = io::load_hsmm(model_path);
    for (const auto& next : hsmm::predict_next(model, state, k))
        std::cout << next.state << " " << csv::format_double(next.probability) << "\n";
    return 0;
}

int cmd_simulate(const std::string& model_path, int t_len, std::uint64_t seed,
                 const std::string& out, const io::ArtifactMeta& meta) {
    hsmm::Hsmm model = io::load_hsmm(model_path);
    hsmm::LabeledSequence seq = hsmm::sample(model, t_len, seed);
    std::string body = "t,state,observed_value\n";
    for (std::size_t i = 0; i < seq.states.size(); ++i)
        body += std::to_string(i + 1) + ',' + std::to_string(seq.states[i]) + ',' +
                csv::format_double(seq.observations[i]) + '\n';
    write_text_file(out, with_comments(meta, body));
    std::cout << "simulated " << seq.states.size() << " observations\n";
    return 0;
}

int cmd_evaluate(const std::string& train_path, const std::string& test_path,
                 const std::string& schema, const std::string& target,
                 const eval::PipelineConfig& base_config, const std::string& report_out,
                 const io::ArtifactMeta& meta) {
    data::Dataset train = load(train_path, schema);
    data::Dataset test = load(test_path, schema);
    eval::PipelineConfig config = base_config;
    config.target = target == "outcome" ? eval::TargetKind::Outcome : eval::TargetKind::Soft;
    eval::PerformanceReport report = eval::run_prequential(train, test, config);
    print_warnings(report.warnings);
    std::cout << report.to_text();
    if (!report_out.empty()) write_text_file(report_out, with_comments(meta, report.to_csv()));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MOB-tree + explicit-duration HSMM pipeline for longitudinal risk sequences"};
    app.require_subcommand(1);

    io::ArtifactMeta meta;
    if (argc >= 2) meta.command = argv[1];
    for (int i = 2; i < argc; ++i) meta.flags.push_back(argv[i]);

    std::string in, out, schema, train_path, test_path, train_out, test_out, tree_path, rules_out,
        model_path, risk_column, report_out;
    std::string target = "soft";
    std::string risk = "student";
    std::uint64_t seed = 0;
    double test_fraction = 0.2, target_ratio = 0.173;
    int max_copies = 100, state = 1, k = 1, t_len = 1, n_folds = 5;
    bool single_window = false;
    tree::TreeParams params;
    hsmm::BuildConfig build_config;

    auto* s_impute = app.add_subcommand("impute", "fill gaps per subject");
    s_impute->add_option("--in", in)->required();
    s_impute->add_option("--schema", schema)->required();
    s_impute->add_option("--out", out)->required();

    auto* s_split = app.add_subcommand("split", "subject-level stratified train/test split");
    s_split->add_option("--in", in)->required();
    s_split->add_option("--schema", schema)->required();
    s_split->add_option("--test-fraction", test_fraction);
    s_split->add_option("--seed", seed);
    s_split->add_option("--train-out", train_out)->required();
    s_split->add_option("--test-out", test_out)->required();

    auto* s_over = app.add_subcommand("oversample", "suffix-crop positive subjects");
    s_over->add_option("--in", in)->required();
    s_over->add_option("--schema", schema)->required();
    s_over->add_option("--target-ratio", target_ratio);
    s_over->add_option("--max-copies", max_copies);
    s_over->add_option("--seed", seed);
    s_over->add_option("--out", out)->required();

    auto* s_fit = app.add_subcommand("fit-tree", "grow the partition tree on logit targets");
    s_fit->add_option("--train", train_path)->required();
    s_fit->add_option("--schema", schema)->required();
    s_fit->add_option("--target", target)->check(CLI::IsMember({"soft", "outcome"}));
    s_fit->add_option("--alpha", params.alpha);
    s_fit->add_option("--min-node-size", params.min_node_size);
    s_fit->add_option("--max-depth", params.max_depth);
    s_fit->add_option("--n-permutations", params.n_permutations);
    s_fit->add_option("--seed", seed);
    s_fit->add_option("--out", out)->required();
    s_fit->add_option("--rules-out", rules_out);

    auto* s_build = app.add_subcommand("build-hsmm", "states from the tree, durations from data");
    s_build->add_option("--train", train_path)->required();
    s_build->add_option("--schema", schema)->required();
    s_build->add_option("--tree", tree_path)->required();
    s_build->add_option("--risk", risk)->check(CLI::IsMember({"student", "teacher"}));
    s_build->add_option("--dmax", build_config.dmax);
    s_build->add_option("--bandwidth", build_config.bandwidth);
    s_build->add_option("--transition-smoothing", build_config.transition_smoothing);
    s_build->add_option("--out", out)->required();

    auto* s_decode = app.add_subcommand("decode", "most probable state sequence per subject");
    s_decode->add_option("--model", model_path)->required();
    s_decode->add_option("--in", in)->required();
    s_decode->add_option("--schema", schema)->required();
    s_decode->add_option("--tree", tree_path);
    s_decode->add_option("--risk-column", risk_column);
    s_decode->add_option("--out", out)->required();

    auto* s_next = app.add_subcommand("predict-next", "top-k successor states");
    s_next->add_option("--model", model_path)->required();
    s_next->add_option("--state", state)->required();
    s_next->add_option("--k", k);

    auto* s_sim = app.add_subcommand("simulate", "draw a synthetic sequence");
    s_sim->add_option("--model", model_path)->required();
    s_sim->add_option("--t-len", t_len)->required();
    s_sim->add_option("--seed", seed);
    s_sim->add_option("--out", out)->required();

    auto* s_eval = app.add_subcommand("evaluate", "prequential growing-window report");
    s_eval->add_option("--train", train_path)->required();
    s_eval->add_option("--test", test_path)->required();
    s_eval->add_option("--schema", schema)->required();
    s_eval->add_option("--target", target)->check(CLI::IsMember({"soft", "outcome"}));
    s_eval->add_option("--alpha", params.alpha);
    s_eval->add_option("--min-node-size", params.min_node_size);
    s_eval->add_option("--max-depth", params.max_depth);
    s_eval->add_option("--n-permutations", params.n_permutations);
    s_eval->add_option("--seed", seed);
    s_eval->add_option("--n-folds", n_folds);
    s_eval->add_flag("--single-window", single_window);
    s_eval->add_option("--report-out", report_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        meta.seed = seed;
        params.seed = seed;
        if (s_impute->parsed()) return cmd_impute(in, schema, out, meta);
        if (s_split->parsed())
            return cmd_split(in, schema, test_fraction, seed, train_out, test_out, meta);
        if (s_over->parsed())
            return cmd_oversample(in, schema, target_ratio, max_copies, seed, out, meta);
        if (s_fit->parsed())
            return cmd_fit_tree(train_path, schema, target, params, out, rules_out, meta);
        if (s_build->parsed())
            return cmd_build_hsmm(train_path, schema, tree_path, risk, build_config, out, meta);
        if (s_decode->parsed())
            return cmd_decode(model_path, in, schema, tree_path, risk_column, out, meta);
        if (s_next->parsed()) return cmd_predict_next(model_path, state, k);
        if (s_sim->parsed()) return cmd_simulate(model_path, t_len, seed, out, meta);
        if (s_eval->parsed()) {
            eval::PipelineConfig config;
            config.tree_params = params;
            config.n_folds = n_folds;
            config.single_window = single_window;
            return cmd_evaluate(train_path, test_path, schema, target, config, report_out, meta);
        }
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
