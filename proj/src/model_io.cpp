#include "mobhsmm/model_io.hpp"

#include <fstream>

#include <json.hpp>

#include "mobhsmm/error.hpp"

namespace mobhsmm::io {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kFormatVersion = "1";

json meta_to_json(const ArtifactMeta& meta) {
    json j;
    j["command"] = meta.command;
    j["flags"] = meta.flags;
    j["seed"] = meta.seed;
    return j;
}

json parse_document(const std::string& text, const char* expected_kind) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("model file is not a JSON object");
    if (doc.value("format_version", "") != kFormatVersion)
        throw DataError("unsupported format_version '" + doc.value("format_version", "") +
                        "', expected '" + kFormatVersion + "'");
    const std::string kind = doc.value("kind", "");
    if (kind != expected_kind)
        throw DataError("expected a " + std::string(expected_kind) + " artifact, found '" + kind +
                        "'");
    return doc;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + path + "'");
}

json node_to_json(const tree::Node& node, const std::vector<std::string>& regressors) {
    json j;
    if (node.is_leaf()) {
        json leaf;
        leaf["state"] = node.state_id;
        leaf["intercept"] = node.model.intercept;
        json coef;
        for (std::size_t i = 0; i < regressors.size(); ++i)
            coef[regressors[i]] = node.model.coefficients[i];
        leaf["coef"] = std::move(coef);
        leaf["mu_y"] = node.mu_y;
        leaf["n"] = node.n_rows;
        leaf["residual_variance"] = node.model.residual_variance;
        j["leaf"] = std::move(leaf);
        return j;
    }
    const tree::Split& s = *node.split;
    json split;
    split["var"] = s.var;
    if (s.categorical) {
        split["category"] = s.left_label;
        split["n_categories"] = s.n_categories;
        if (!s.other_label.empty()) split["other"] = s.other_label;
    } else {
        split["threshold"] = s.threshold;
    }
    j["split"] = std::move(split);
    j["left"] = node_to_json(*node.left, regressors);
    j["right"] = node_to_json(*node.right, regressors);
    return j;
}

std::unique_ptr<tree::Node> node_from_json(const json& j,
                                           const std::vector<std::string>& partition_vars,
                                           const std::vector<std::string>& regressors) {
    auto node = std::make_unique<tree::Node>();
    if (j.contains("leaf")) {
        const json& leaf = j.at("leaf");
        node->state_id = leaf.at("state").get<int>();
        node->mu_y = leaf.at("mu_y").get<double>();
        node->n_rows = leaf.at("n").get<std::size_t>();
        node->model.intercept = leaf.at("intercept").get<double>();
        node->model.residual_variance = leaf.value("residual_variance", 0.0);
        node->model.n = node->n_rows;
        const json& coef = leaf.at("coef");
        for (const auto& name : regressors) {
            if (!coef.contains(name))
                throw DataError("leaf is missing coefficient for '" + name + "'");
            node->model.coefficients.push_back(coef.at(name).get<double>());
        }
        return node;
    }
    if (!j.contains("split")) throw DataError("tree node has neither 'split' nor 'leaf'");
    const json& sj = j.at("split");
    tree::Split s;
    s.var = sj.at("var").get<std::string>();
    s.var_index = -1;
    for (std::size_t i = 0; i < partition_vars.size(); ++i)
        if (partition_vars[i] == s.var) s.var_index = static_cast<int>(i);
    if (sj.contains("category")) {
        s.categorical = true;
        s.left_label = sj.at("category").get<std::string>();
        s.n_categories = sj.value("n_categories", 0);
        s.other_label = sj.value("other", std::string());
    } else {
        s.threshold = sj.at("threshold").get<double>();
    }
    node->split = std::move(s);
    node->left = node_from_json(j.at("left"), partition_vars, regressors);
    node->right = node_from_json(j.at("right"), partition_vars, regressors);
    return node;
}

} // namespace

std::string tree_to_text(const tree::MobTree& t, const ArtifactMeta& meta) {
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "mobtree";
    doc["meta"] = meta_to_json(meta);
    doc["partition_vars"] = t.partition_names();
    doc["regressors"] = t.regressor_names();
    json params;
    params["alpha"] = t.params().alpha;
    params["min_node_size"] = t.params().min_node_size;
    params["max_depth"] = t.params().max_depth;
    params["n_permutations"] = t.params().n_permutations;
    params["seed"] = t.params().seed;
    doc["params"] = std::move(params);
    doc["n_states"] = t.n_states();
    doc["root"] = node_to_json(t.root(), t.regressor_names());
    return doc.dump(2) + "\n";
}

tree::MobTree tree_from_text(const std::string& text) {
    json doc = parse_document(text, "mobtree");
    try {
        auto partition_vars = doc.at("partition_vars").get<std::vector<std::string>>();
        auto regressors = doc.at("regressors").get<std::vector<std::string>>();
        const json& pj = doc.at("params");
        tree::TreeParams params;
        params.alpha = pj.at("alpha").get<double>();
        params.min_node_size = pj.at("min_node_size").get<int>();
        params.max_depth = pj.at("max_depth").get<int>();
        params.n_permutations = pj.at("n_permutations").get<int>();
        params.seed = pj.at("seed").get<std::uint64_t>();
        auto root = node_from_json(doc.at("root"), partition_vars, regressors);
        tree::MobTree t(std::move(root), std::move(partition_vars), std::move(regressors), params);
        t.renumber_states();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed tree artifact: ") + e.what());
    }
}

void save_tree(const std::string& path, const tree::MobTree& t, const ArtifactMeta& meta) {
    write_file(path, tree_to_text(t, meta));
}

tree::MobTree load_tree(const std::string& path) { return tree_from_text(read_file(path)); }

std::string hsmm_to_text(const hsmm::Hsmm& m, const ArtifactMeta& meta) {
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "hsmm";
    doc["meta"] = meta_to_json(meta);
    doc["S"] = m.n_states;
    doc["pi"] = m.pi;
    doc["A"] = m.transition;
    json emissions = json::array();
    for (const auto& e : m.emissions) {
        json ej;
        ej["mu"] = e.mu;
        ej["sigma"] = e.sigma;
        emissions.push_back(std::move(ej));
    }
    doc["emissions"] = std::move(emissions);
    doc["sojourn"] = m.sojourn;
    doc["dmax"] = m.dmax;
    json defaulted = json::array();
    for (bool b : m.defaulted) defaulted.push_back(b);
    doc["defaulted"] = std::move(defaulted);
    return doc.dump(2) + "\n";
}

hsmm::Hsmm hsmm_from_text(const std::string& text) {
    json doc = parse_document(text, "hsmm");
    hsmm::Hsmm m;
    try {
        m.n_states = doc.at("S").get<int>();
        m.pi = doc.at("pi").get<std::vector<double>>();
        m.transition = doc.at("A").get<std::vector<std::vector<double>>>();
        for (const auto& ej : doc.at("emissions"))
            m.emissions.push_back({ej.at("mu").get<double>(), ej.at("sigma").get<double>()});
        m.sojourn = doc.at("sojourn").get<std::vector<std::vector<double>>>();
        m.dmax = doc.at("dmax").get<int>();
        if (doc.contains("defaulted"))
            m.defaulted = doc.at("defaulted").get<std::vector<bool>>();
        else
            m.defaulted.assign(static_cast<std::size_t>(m.n_states), false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed hsmm artifact: ") + e.what());
    }
    m.validate();
    return m;
}

void save_hsmm(const std::string& path, const hsmm::Hsmm& m, const ArtifactMeta& meta) {
    write_file(path, hsmm_to_text(m, meta));
}

hsmm::Hsmm load_hsmm(const std::string& path) { return hsmm_from_text(read_file(path)); }

} // namespace mobhsmm::io
